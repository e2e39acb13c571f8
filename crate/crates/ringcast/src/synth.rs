//! Synthetic trace generator with known ground truth.
//!
//! Builds an open, stationary traffic system on the ring: for each direction,
//! vehicles are injected at every exit at a constant per-exit rate, traverse a
//! fixed number of segments at constant speed, and leave. Injection rates are
//! derived from per-segment target counts, so the stationary count on each
//! segment is (a moving average of) the targets. Every vehicle reports once
//! per sampling interval at a per-vehicle phase.
//!
//! Two properties make this a usable estimator oracle:
//!
//! * the default speed is `segment length / report interval`, so one report
//!   covers exactly one segment length and the per-epoch flow estimate is an
//!   unbiased count estimate;
//! * the generator measures the *realized* per-epoch counts from the
//!   noise-free positions and writes them next to the configured targets, so
//!   estimates are compared against physical truth rather than intent.
//!
//! Thinning is vehicle-level: a probe subset keeps every record of a kept
//! vehicle, which mirrors how an instrumented fleet reports.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

use chrono::NaiveDateTime;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{ArcPosition, Direction, RingGeometry, EARTH_RADIUS_M};
use crate::trace::{GpsRecord, TRACE_HEADER};

pub const TRUTH_HEADER: &str = "direction,segment,target_count,mean_count,length_m";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// First record window opens here; must be aligned to the report
    /// interval so epochs tile the trace exactly.
    pub start: NaiveDateTime,
    pub duration_s: i64,
    pub report_interval_s: i64,
    /// Constant vehicle speed; `None` derives `mean segment length /
    /// report interval`, the speed at which the flow estimator is unbiased.
    pub speed_mps: Option<f64>,
    /// Segments each trip traverses (trip lifetime in reports).
    pub trip_segments: u32,
    /// Isotropic position noise amplitude (uniform square, meters).
    pub noise_m: f64,
    /// GPS quality value stamped on every record.
    pub quality: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start: NaiveDateTime::parse_from_str("2010-05-15T15:00:00", "%Y-%m-%dT%H:%M:%S").unwrap(),
            duration_s: 1800,
            report_interval_s: 30,
            speed_mps: None,
            trip_segments: 2,
            noise_m: 5.0,
            quality: 3,
        }
    }
}

/// Ground truth for one (direction, segment): the configured target and the
/// realized epoch-averaged count.
#[derive(Debug, Clone, Copy)]
pub struct TruthRow {
    pub dir: Direction,
    pub segment: u32,
    pub target_count: f64,
    pub mean_count: f64,
    pub length_m: f64,
}

/// Full-population synthetic trace plus its measured truth.
#[derive(Debug)]
pub struct SynthTrace {
    pub records: Vec<GpsRecord>,
    pub truth: Vec<TruthRow>,
    pub epochs: u64,
    pub vehicle_count: u64,
}

struct Trip {
    vehicle_id: u64,
    t_inject: f64,
    entry_arc: f64,
    dir: Direction,
    speed: f64,
    life_s: f64,
    phase_s: f64,
}

/// Generates the full-population trace for per-segment target counts (one
/// entry per segment, per direction).
pub fn generate(
    g: &RingGeometry,
    targets_cw: &[f64],
    targets_ccw: &[f64],
    cfg: &SynthConfig,
    seed: u64,
) -> Result<SynthTrace, SynthError> {
    let s = g.segments().len();
    if targets_cw.len() != s || targets_ccw.len() != s {
        return Err(SynthError::InvalidDensity(format!(
            "need one target per segment and direction ({s} segments)"
        )));
    }
    if targets_cw.iter().chain(targets_ccw).any(|t| !t.is_finite() || *t < 0.0) {
        return Err(SynthError::InvalidDensity("targets must be finite and >= 0".into()));
    }
    if cfg.report_interval_s <= 0 || cfg.duration_s <= 0 {
        return Err(SynthError::InvalidConfig("durations must be positive".into()));
    }
    if cfg.duration_s % cfg.report_interval_s != 0 {
        return Err(SynthError::InvalidConfig(format!(
            "duration {}s must be a multiple of the report interval {}s",
            cfg.duration_s, cfg.report_interval_s
        )));
    }
    if cfg.start.and_utc().timestamp() % cfg.report_interval_s != 0 {
        return Err(SynthError::InvalidConfig(
            "start must be aligned to the report interval".into(),
        ));
    }
    if cfg.trip_segments < 1 || (cfg.trip_segments as usize) >= s {
        return Err(SynthError::InvalidConfig(format!(
            "trip_segments must be in [1, {})",
            s
        )));
    }

    let h = cfg.report_interval_s as f64;
    let mean_len = g.circumference() / s as f64;
    let speed = cfg.speed_mps.unwrap_or(mean_len / h);
    if !(speed > 0.0) {
        return Err(SynthError::InvalidConfig(format!("speed must be positive, got {speed}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cfg.trip_segments;
    let start_unix = cfg.start.and_utc().timestamp() as f64;
    let end_rel = cfg.duration_s as f64;

    // Injection streams: segment j's target is attached to the exit where a
    // trip entering it begins. A clockwise trip from exit e covers segments
    // e..e+k-1; a counterclockwise trip from exit e covers e-1..e-k.
    let mut trips: Vec<Trip> = Vec::new();
    let mut next_vehicle = 1u64;
    for dir in [Direction::Clockwise, Direction::Counterclockwise] {
        let targets = match dir {
            Direction::Clockwise => targets_cw,
            Direction::Counterclockwise => targets_ccw,
        };
        for seg in g.segments() {
            let j = seg.index as usize - 1;
            let target = targets[j];
            if target <= 0.0 {
                continue;
            }
            // Rate such that this stream alone sustains target/k vehicles on
            // each of the k segments it covers.
            let rate = speed * target / (seg.length_m * k as f64);
            let spacing = 1.0 / rate;
            let entry_exit = match dir {
                Direction::Clockwise => seg.start_exit,
                Direction::Counterclockwise => seg.end_exit,
            };
            let entry_arc = g.exit_by_id(entry_exit).unwrap().arc.0;
            // Trip lifetime: k segments at constant speed, starting from the
            // entry exit.
            let life = trip_length_m(g, seg.index, dir, k) / speed;
            let burnin = life;
            let phase0: f64 = rng.random_range(0.0..spacing);
            let mut t = -burnin + phase0;
            while t < end_rel {
                let phase = rng.random_range(0.0..h);
                trips.push(Trip {
                    vehicle_id: next_vehicle,
                    t_inject: t,
                    entry_arc,
                    dir,
                    speed,
                    life_s: life,
                    phase_s: phase,
                });
                next_vehicle += 1;
                t += spacing;
            }
        }
    }

    // Roll the trips out into records and tally ground truth per epoch.
    let c = g.circumference();
    let epochs = (cfg.duration_s / cfg.report_interval_s) as u64;
    let mut truth_counts: BTreeMap<(Direction, u32), u64> = BTreeMap::new();
    let mut rows: Vec<(f64, u64, f64, f64, f64)> = Vec::new(); // (t_rel, vehicle, lat, lon, speed)
    let lat0 = g.point_at_arc(ArcPosition(0.0)).lat.to_radians();
    let m_per_deg = EARTH_RADIUS_M * PI / 180.0;
    for trip in &trips {
        let mut m = 0u32;
        loop {
            let t_rel = trip.t_inject + trip.phase_s + m as f64 * h;
            m += 1;
            if t_rel >= trip.t_inject + trip.life_s {
                break;
            }
            if t_rel < 0.0 {
                continue;
            }
            if t_rel >= end_rel {
                break;
            }
            let dist = trip.speed * (t_rel - trip.t_inject);
            let arc = match trip.dir {
                Direction::Clockwise => (trip.entry_arc + dist).rem_euclid(c),
                Direction::Counterclockwise => (trip.entry_arc - dist).rem_euclid(c),
            };
            let seg = g.segment_of(ArcPosition(arc));
            *truth_counts.entry((trip.dir, seg)).or_default() += 1;

            let p = g.point_at_arc(ArcPosition(arc));
            let (dx, dy) = (
                rng.random_range(-cfg.noise_m..=cfg.noise_m),
                rng.random_range(-cfg.noise_m..=cfg.noise_m),
            );
            let lat = p.lat + dy / m_per_deg;
            let lon = p.lon + dx / (m_per_deg * lat0.cos());
            rows.push((t_rel, trip.vehicle_id, lat, lon, trip.speed * 3.6));
        }
    }

    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let records = rows
        .into_iter()
        .enumerate()
        .map(|(i, (t_rel, vehicle_id, lat, lon, speed_kmh))| GpsRecord {
            record_id: i as u64 + 1,
            vehicle_id,
            t: chrono::DateTime::from_timestamp((start_unix + t_rel).floor() as i64, 0)
                .unwrap()
                .naive_utc(),
            lat,
            lon,
            speed_kmh,
            quality: cfg.quality,
        })
        .collect();

    let mut truth = Vec::new();
    for dir in [Direction::Clockwise, Direction::Counterclockwise] {
        let targets = match dir {
            Direction::Clockwise => targets_cw,
            Direction::Counterclockwise => targets_ccw,
        };
        for seg in g.segments() {
            let total = truth_counts
                .get(&(dir, seg.index))
                .copied()
                .unwrap_or(0);
            truth.push(TruthRow {
                dir,
                segment: seg.index,
                target_count: targets[(seg.index - 1) as usize],
                mean_count: total as f64 / epochs as f64,
                length_m: seg.length_m,
            });
        }
    }

    Ok(SynthTrace {
        records,
        truth,
        epochs,
        vehicle_count: next_vehicle - 1,
    })
}

fn trip_length_m(g: &RingGeometry, first_segment: u32, dir: Direction, k: u32) -> f64 {
    let s = g.segments().len() as i64;
    let mut total = 0.0;
    for i in 0..k as i64 {
        let idx = match dir {
            Direction::Clockwise => (first_segment as i64 - 1 + i).rem_euclid(s),
            Direction::Counterclockwise => (first_segment as i64 - 1 - i).rem_euclid(s),
        };
        total += g.segments()[idx as usize].length_m;
    }
    total
}

/// Vehicle ids kept by an independent Bernoulli(`a`) thinning.
pub fn kept_vehicle_set(records: &[GpsRecord], a: f64, thin_seed: u64) -> BTreeSet<u64> {
    let ids: BTreeSet<u64> = records.iter().map(|r| r.vehicle_id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(thin_seed);
    ids.into_iter().filter(|_| rng.random_bool(a)).collect()
}

/// Probe subset: every record of every kept vehicle.
pub fn thin_vehicles(records: &[GpsRecord], a: f64, thin_seed: u64) -> Vec<GpsRecord> {
    let kept = kept_vehicle_set(records, a, thin_seed);
    records
        .iter()
        .filter(|r| kept.contains(&r.vehicle_id))
        .cloned()
        .collect()
}

/// Serializes records in the trace file format.
pub fn trace_to_text(records: &[GpsRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 64 + TRACE_HEADER.len() + 1);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{:.8},{:.8},{:.3},{}",
            r.record_id,
            r.vehicle_id,
            r.t.format("%Y-%m-%dT%H:%M:%S"),
            r.lat,
            r.lon,
            r.speed_kmh,
            r.quality
        );
    }
    out
}

/// Serializes the ground-truth table.
pub fn truth_to_text(truth: &[TruthRow]) -> String {
    let mut out = String::from(TRUTH_HEADER);
    out.push('\n');
    for row in truth {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.3}",
            row.dir, row.segment, row.target_count, row.mean_count, row.length_m
        );
    }
    out
}
