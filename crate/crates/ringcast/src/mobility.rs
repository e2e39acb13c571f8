//! Closed-population ring mobility: per-segment target counts seed the
//! population, every vehicle cruises at a constant sampled speed toward a
//! destination exit, and each extraction triggers one replacement injection
//! at an exit chosen proportionally to the target of the segment it begins.
//! Population is therefore constant over any horizon and density stays pinned
//! to the targets.

use rand::Rng;
use thiserror::Error;

use crate::geometry::{ArcPosition, Direction, RingGeometry};
use crate::trace::Histogram;

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("invalid mobility config: {0}")]
    InvalidConfig(String),
}

/// Speed source for injected vehicles, in m/s.
#[derive(Debug, Clone)]
pub enum SpeedSampler {
    Fixed(f64),
    /// Weighted draw over histogram bins, uniform within the chosen bin.
    /// Non-positive draws are rejected and resampled.
    Empirical(Histogram),
}

impl SpeedSampler {
    pub fn validate(&self) -> Result<(), MobilityError> {
        match self {
            SpeedSampler::Fixed(v) if *v > 0.0 => Ok(()),
            SpeedSampler::Fixed(v) => Err(MobilityError::InvalidConfig(format!(
                "fixed speed must be positive, got {v}"
            ))),
            SpeedSampler::Empirical(h) if h.total > 0 => Ok(()),
            SpeedSampler::Empirical(_) => {
                Err(MobilityError::InvalidConfig("empirical speed histogram is empty".into()))
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            SpeedSampler::Fixed(v) => *v,
            SpeedSampler::Empirical(h) => {
                loop {
                    let mut pick = rng.random_range(0..h.total);
                    let mut idx = 0;
                    for (i, &c) in h.counts.iter().enumerate() {
                        if pick < c {
                            idx = i;
                            break;
                        }
                        pick -= c;
                    }
                    let (lo, hi) = h.bin_range(idx);
                    let v = rng.random_range(lo..hi);
                    if v > 0.0 {
                        return v;
                    }
                }
            }
        }
    }
}

/// Trip length in exits traversed, sampled uniformly in `[min, max]`.
#[derive(Debug, Clone, Copy)]
pub struct TripSampler {
    pub min_exits: u32,
    pub max_exits: u32,
}

impl TripSampler {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        rng.random_range(self.min_exits..=self.max_exits)
    }
}

/// Target vehicle counts per (direction, segment) plus the samplers that
/// drive injection.
#[derive(Debug, Clone)]
pub struct MobilityConfig {
    /// Target count per segment, clockwise; index 0 is segment 1.
    pub targets_cw: Vec<f64>,
    /// Target count per segment, counterclockwise.
    pub targets_ccw: Vec<f64>,
    pub speed: SpeedSampler,
    pub trip: TripSampler,
}

impl MobilityConfig {
    /// Uniform split of a total population across both directions and all
    /// segments.
    pub fn uniform(total: f64, segment_count: usize, speed: SpeedSampler, trip: TripSampler) -> Self {
        let per = total / (2.0 * segment_count as f64);
        Self {
            targets_cw: vec![per; segment_count],
            targets_ccw: vec![per; segment_count],
            speed,
            trip,
        }
    }

    pub fn validate(&self, g: &RingGeometry) -> Result<(), MobilityError> {
        let s = g.segments().len();
        if self.targets_cw.len() != s || self.targets_ccw.len() != s {
            return Err(MobilityError::InvalidConfig(format!(
                "targets must cover all {s} segments (got cw {}, ccw {})",
                self.targets_cw.len(),
                self.targets_ccw.len()
            )));
        }
        if self
            .targets_cw
            .iter()
            .chain(&self.targets_ccw)
            .any(|q| !q.is_finite() || *q < 0.0)
        {
            return Err(MobilityError::InvalidConfig("targets must be finite and >= 0".into()));
        }
        self.speed.validate()?;
        let exits = g.exits().len() as u32;
        if self.trip.min_exits < 1 || self.trip.min_exits > self.trip.max_exits {
            return Err(MobilityError::InvalidConfig(format!(
                "trip exit range [{}, {}] is empty or starts below 1",
                self.trip.min_exits, self.trip.max_exits
            )));
        }
        if self.trip.max_exits >= exits {
            return Err(MobilityError::InvalidConfig(format!(
                "trips of {} exits would lap a ring with only {} exits",
                self.trip.max_exits, exits
            )));
        }
        Ok(())
    }

    pub fn targets(&self, dir: Direction) -> &[f64] {
        match dir {
            Direction::Clockwise => &self.targets_cw,
            Direction::Counterclockwise => &self.targets_ccw,
        }
    }
}

/// A vehicle on the ring: constant speed, fixed destination exit.
#[derive(Debug, Clone, Copy)]
pub struct VehicleState {
    pub id: u64,
    pub arc: ArcPosition,
    pub dir: Direction,
    pub speed_mps: f64,
    pub destination_exit: u32,
}

/// Round-half-up, the deterministic rounding used for `round(q_j)`.
pub fn round_half_up(q: f64) -> u64 {
    (q + 0.5).floor() as u64
}

/// Places `round(q_j)` vehicles uniformly at random on each segment, for both
/// directions, with sampled speeds and destinations. Ids are assigned in
/// placement order starting at `first_id`.
pub fn seed_population<R: Rng>(
    cfg: &MobilityConfig,
    g: &RingGeometry,
    first_id: u64,
    rng: &mut R,
) -> Result<Vec<VehicleState>, MobilityError> {
    cfg.validate(g)?;
    let mut out = Vec::new();
    let mut next_id = first_id;
    for dir in [Direction::Clockwise, Direction::Counterclockwise] {
        for seg in g.segments() {
            let q = cfg.targets(dir)[(seg.index - 1) as usize];
            for _ in 0..round_half_up(q) {
                let arc = g.advance(
                    ArcPosition(seg.start_arc),
                    rng.random_range(0.0..seg.length_m),
                    Direction::Clockwise,
                );
                let speed = sample_speed(&cfg.speed, rng);
                let hops = cfg.trip.sample(rng);
                let destination = g.exit_ahead(arc, dir, hops).id;
                out.push(VehicleState {
                    id: next_id,
                    arc,
                    dir,
                    speed_mps: speed,
                    destination_exit: destination,
                });
                next_id += 1;
            }
        }
    }
    Ok(out)
}

fn sample_speed<R: Rng>(sampler: &SpeedSampler, rng: &mut R) -> f64 {
    sampler.sample(rng)
}

/// Constant-speed kinematics: advance `dt` seconds along the travel
/// direction, wrapping around the ring.
pub fn advance(v: &VehicleState, dt_s: f64, g: &RingGeometry) -> VehicleState {
    debug_assert!(dt_s >= 0.0);
    VehicleState {
        arc: g.advance(v.arc, v.speed_mps * dt_s, v.dir),
        ..*v
    }
}

/// Seconds until the vehicle reaches its destination exit.
pub fn extraction_time(v: &VehicleState, g: &RingGeometry) -> f64 {
    let exit = g.exit_by_id(v.destination_exit).expect("destination exit exists");
    g.directed_arc_distance(v.arc, exit.arc, v.dir) / v.speed_mps
}

/// Cumulative target mass per segment, used to pick injection segments with
/// probability proportional to `q`.
#[derive(Debug, Clone)]
pub struct InjectionDistribution {
    cumulative_cw: Vec<f64>,
    cumulative_ccw: Vec<f64>,
}

impl InjectionDistribution {
    pub fn new(cfg: &MobilityConfig) -> Self {
        let cumsum = |targets: &[f64]| {
            let mut acc = 0.0;
            targets
                .iter()
                .map(|q| {
                    acc += q;
                    acc
                })
                .collect::<Vec<f64>>()
        };
        Self {
            cumulative_cw: cumsum(&cfg.targets_cw),
            cumulative_ccw: cumsum(&cfg.targets_ccw),
        }
    }

    /// Picks a 1-based segment index proportionally to target mass.
    /// Returns `None` when all targets in this direction are zero.
    pub fn sample_segment<R: Rng>(&self, dir: Direction, rng: &mut R) -> Option<u32> {
        let cum = match dir {
            Direction::Clockwise => &self.cumulative_cw,
            Direction::Counterclockwise => &self.cumulative_ccw,
        };
        let total = *cum.last()?;
        if total <= 0.0 {
            return None;
        }
        let x = rng.random_range(0.0..total);
        let idx = cum.partition_point(|&c| c <= x);
        Some((idx.min(cum.len() - 1) + 1) as u32)
    }
}

/// Builds the replacement for an extracted vehicle: same direction, injected
/// at the entry exit of a target-weighted segment, fresh speed and
/// destination. The entry exit is the segment's start for clockwise travel
/// and its end for counterclockwise travel, so the vehicle actually traverses
/// the segment it was assigned to.
pub fn replacement_injection<R: Rng>(
    extracted: &VehicleState,
    cfg: &MobilityConfig,
    dist: &InjectionDistribution,
    g: &RingGeometry,
    new_id: u64,
    rng: &mut R,
) -> Option<VehicleState> {
    let dir = extracted.dir;
    let segment = dist.sample_segment(dir, rng)?;
    let seg = g.segment_by_index(segment).expect("sampled segment exists");
    let entry_exit = match dir {
        Direction::Clockwise => seg.start_exit,
        Direction::Counterclockwise => seg.end_exit,
    };
    let arc = g.exit_by_id(entry_exit).expect("segment exits exist").arc;
    let speed = sample_speed(&cfg.speed, rng);
    let hops = cfg.trip.sample(rng);
    let destination = g.exit_ahead(arc, dir, hops).id;
    Some(VehicleState {
        id: new_id,
        arc,
        dir,
        speed_mps: speed,
        destination_exit: destination,
    })
}
