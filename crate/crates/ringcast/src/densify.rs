//! Probe-to-population flow estimation.
//!
//! Each probe signal detected on segment `j` stands in for `d_i = v_i * h`
//! meters of traveled road, where `h` is the sampling interval. Summing the
//! covered fractions gives the estimated probe vehicles on the segment,
//!
//! ```text
//! m_j = sum_i (v_i * h) / L_j
//! ```
//!
//! and dividing by the penetration rate `a` scales up to the full population:
//! `q_j = m_j / a`. Signals with zero speed contribute nothing, so stationary
//! probes vanish from the estimate; that is a property of the model, not a
//! bug. For a four-hour period the per-epoch estimates are averaged, which is
//! the stationary reading of a long window.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{Direction, RingGeometry};
use crate::trace::EpochSnapshot;

#[derive(Debug, Error)]
pub enum DensifyError {
    #[error("invalid densify parameter: {0}")]
    InvalidParams(String),
}

/// One probe observation feeding the estimator.
#[derive(Debug, Clone, Copy)]
pub struct ProbeSignal {
    pub vehicle_id: u64,
    /// Speed at detection, m/s.
    pub speed_mps: f64,
}

impl ProbeSignal {
    /// Road meters this signal stands in for: `d_i = v_i * h`.
    pub fn covered_m(&self, h_s: f64) -> f64 {
        self.speed_mps * h_s
    }
}

/// Estimator parameters.
#[derive(Debug, Clone, Copy)]
pub struct DensifyParams {
    /// Sampling interval `h` in seconds.
    pub h_s: f64,
    /// Probe penetration rate `a` in `(0, 1]`.
    pub penetration: f64,
}

impl DensifyParams {
    pub fn validate(&self) -> Result<(), DensifyError> {
        if !(self.h_s > 0.0) {
            return Err(DensifyError::InvalidParams(format!("h_s must be > 0, got {}", self.h_s)));
        }
        if !(self.penetration > 0.0 && self.penetration <= 1.0) {
            return Err(DensifyError::InvalidParams(format!(
                "penetration must be in (0, 1], got {}",
                self.penetration
            )));
        }
        Ok(())
    }
}

impl Default for DensifyParams {
    fn default() -> Self {
        Self {
            h_s: 30.0,
            penetration: 0.02,
        }
    }
}

/// Per-segment estimate: `n_j` probe signals observed, `m_j` estimated probe
/// vehicles, `q_j = m_j / a` estimated full-population vehicles.
#[derive(Debug, Clone, Copy)]
pub struct SegmentFlowEstimate {
    pub segment: u32,
    pub n: f64,
    pub m: f64,
    pub q: f64,
    pub length_m: f64,
}

/// Evaluates the estimator for one segment from the signals observed on it.
pub fn estimate_segment(
    signals: &[ProbeSignal],
    segment: u32,
    length_m: f64,
    params: &DensifyParams,
) -> Result<SegmentFlowEstimate, DensifyError> {
    params.validate()?;
    if !(length_m > 0.0) {
        return Err(DensifyError::InvalidParams(format!(
            "segment length must be > 0, got {length_m}"
        )));
    }
    let m: f64 = signals.iter().map(|s| s.covered_m(params.h_s) / length_m).sum();
    Ok(SegmentFlowEstimate {
        segment,
        n: signals.len() as f64,
        m,
        q: m / params.penetration,
        length_m,
    })
}

/// Per-direction estimates for every segment of the ring.
#[derive(Debug, Clone)]
pub struct FlowTable {
    pub clockwise: Vec<SegmentFlowEstimate>,
    pub counterclockwise: Vec<SegmentFlowEstimate>,
    /// Number of epochs averaged over.
    pub epochs: u64,
}

impl FlowTable {
    pub fn estimates(&self, dir: Direction) -> &[SegmentFlowEstimate] {
        match dir {
            Direction::Clockwise => &self.clockwise,
            Direction::Counterclockwise => &self.counterclockwise,
        }
    }
}

/// Runs the estimator over a set of epoch snapshots (typically one time
/// period) and averages the per-epoch estimates per (direction, segment).
/// `n` reports the mean signals per epoch so `n = 0` still implies
/// `m = q = 0`.
pub fn estimate_all(
    snapshots: &[EpochSnapshot],
    g: &RingGeometry,
    params: &DensifyParams,
) -> Result<FlowTable, DensifyError> {
    params.validate()?;
    let epochs = snapshots.len() as u64;
    let mut table = FlowTable {
        clockwise: zero_estimates(g),
        counterclockwise: zero_estimates(g),
        epochs,
    };
    if epochs == 0 {
        return Ok(table);
    }

    for snap in snapshots {
        for dir in [Direction::Clockwise, Direction::Counterclockwise] {
            // Bucket this epoch's signals by segment, then fold the
            // per-epoch estimates into the running means.
            let mut buckets: BTreeMap<u32, Vec<ProbeSignal>> = BTreeMap::new();
            for entry in snap.entries(dir) {
                let j = g.segment_of(entry.arc);
                buckets.entry(j).or_default().push(ProbeSignal {
                    vehicle_id: entry.vehicle_id,
                    speed_mps: entry.speed_mps,
                });
            }
            let out = match dir {
                Direction::Clockwise => &mut table.clockwise,
                Direction::Counterclockwise => &mut table.counterclockwise,
            };
            for (j, signals) in buckets {
                let seg = g.segment_by_index(j).expect("segment_of returns valid index");
                let est = estimate_segment(&signals, j, seg.length_m, params)?;
                let slot = &mut out[(j - 1) as usize];
                slot.n += est.n;
                slot.m += est.m;
                slot.q += est.q;
            }
        }
    }

    let inv = 1.0 / epochs as f64;
    for out in [&mut table.clockwise, &mut table.counterclockwise] {
        for slot in out.iter_mut() {
            slot.n *= inv;
            slot.m *= inv;
            slot.q *= inv;
        }
    }
    Ok(table)
}

/// Flow file header: one row per (direction, segment).
pub const FLOW_HEADER: &str = "direction,segment,n_j,m_j,q_j,L_j";

/// Serializes a flow table in the delimited flow format.
pub fn flow_table_to_text(table: &FlowTable) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(FLOW_HEADER);
    out.push('\n');
    for dir in [Direction::Clockwise, Direction::Counterclockwise] {
        for est in table.estimates(dir) {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.3}",
                dir, est.segment, est.n, est.m, est.q, est.length_m
            );
        }
    }
    out
}

/// Reads per-(direction, segment) q targets back from a flow file. Returns
/// `(targets_cw, targets_ccw)` indexed by segment - 1.
pub fn parse_flow_targets(text: &str, segment_count: usize) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut cw = vec![None; segment_count];
    let mut ccw = vec![None; segment_count];
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == FLOW_HEADER => {}
        _ => return Err(format!("flow file must start with '{FLOW_HEADER}'")),
    }
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(format!("line {}: expected 6 fields, got {}", lineno + 1, fields.len()));
        }
        let dir = Direction::parse(fields[0])
            .ok_or_else(|| format!("line {}: bad direction '{}'", lineno + 1, fields[0]))?;
        let segment: usize = fields[1]
            .parse()
            .map_err(|_| format!("line {}: bad segment '{}'", lineno + 1, fields[1]))?;
        let q: f64 = fields[4]
            .parse()
            .map_err(|_| format!("line {}: bad q '{}'", lineno + 1, fields[4]))?;
        if segment == 0 || segment > segment_count {
            return Err(format!("line {}: segment {} out of range 1..={segment_count}", lineno + 1, segment));
        }
        let slot = match dir {
            Direction::Clockwise => &mut cw[segment - 1],
            Direction::Counterclockwise => &mut ccw[segment - 1],
        };
        if slot.replace(q).is_some() {
            return Err(format!("line {}: duplicate ({dir}, {segment}) row", lineno + 1));
        }
    }
    let unwrap_all = |v: Vec<Option<f64>>, dir: &str| {
        v.into_iter()
            .enumerate()
            .map(|(i, q)| q.ok_or(format!("missing {dir} row for segment {}", i + 1)))
            .collect::<Result<Vec<f64>, String>>()
    };
    Ok((unwrap_all(cw, "cw")?, unwrap_all(ccw, "ccw")?))
}

fn zero_estimates(g: &RingGeometry) -> Vec<SegmentFlowEstimate> {
    g.segments()
        .iter()
        .map(|s| SegmentFlowEstimate {
            segment: s.index,
            n: 0.0,
            m: 0.0,
            q: 0.0,
            length_m: s.length_m,
        })
        .collect()
}
