//! Broadcast channel model: unit-disk radio over the ring embedded as a
//! circle, fixed-bitrate airtime, zero propagation delay, carrier sensing
//! with bounded retry jitter, and receiver-side overlap collisions.
//!
//! Distance between nodes is the Euclidean chord computed from arc positions
//! (radio crosses space, not pavement); for ranges much smaller than the ring
//! the chord is within a fraction of a percent of the arc. The in-range
//! boundary is closed: a node exactly at `r_radio_m` hears the frame.

use std::f64::consts::PI;

use super::{MessageId, NodeId};

/// Radio and MAC parameters.
#[derive(Debug, Clone, Copy)]
pub struct ChannelConfig {
    pub bitrate_bps: f64,
    pub r_radio_m: f64,
    /// Upper bound of the uniform re-attempt jitter after a busy carrier.
    /// The re-attempt is committed: it transmits at its slot without sensing
    /// again, so simultaneous deferrals are separated only by this jitter and
    /// can pile up into collisions when it is shorter than the airtime.
    pub cs_jitter_max_s: f64,
    /// When false the channel is ideal: overlapping frames are all received
    /// and the collision counter stays at zero.
    pub collisions: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            bitrate_bps: 160_000.0,
            r_radio_m: 300.0,
            cs_jitter_max_s: 0.001,
            collisions: true,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.bitrate_bps > 0.0) {
            return Err(format!("bitrate must be positive, got {}", self.bitrate_bps));
        }
        if !(self.r_radio_m > 0.0) {
            return Err(format!("radio range must be positive, got {}", self.r_radio_m));
        }
        if !(self.cs_jitter_max_s > 0.0) {
            return Err(format!("carrier-sense jitter must be positive, got {}", self.cs_jitter_max_s));
        }
        Ok(())
    }

    pub fn airtime_s(&self, size_bits: u64) -> f64 {
        size_bits as f64 / self.bitrate_bps
    }
}

/// One transmission on the air. Position is frozen at transmit start.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub message: MessageId,
    pub hop: u32,
    pub sender: NodeId,
    pub sender_arc: f64,
    pub size_bits: u64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Frame {
    /// Frames destroy each other only on positive-measure overlap; touching
    /// end points do not collide.
    pub fn overlaps_open(&self, other: &Frame) -> bool {
        self.t_start < other.t_end && other.t_start < self.t_end
    }
}

/// Euclidean chord between two arc positions on a circle of circumference
/// `c`: `2r * sin(delta_arc / 2r)` with `r = c / 2pi`.
pub fn chord_distance(c: f64, arc_a: f64, arc_b: f64) -> f64 {
    let d = (arc_b - arc_a).rem_euclid(c);
    let shorter = d.min(c - d);
    let r = c / (2.0 * PI);
    2.0 * r * (shorter / (2.0 * r)).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airtime_is_exact_division() {
        let cfg = ChannelConfig::default();
        assert_eq!(cfg.airtime_s(2000), 2000.0 / 160_000.0);
        assert_eq!(cfg.airtime_s(2000), 0.0125);
    }

    #[test]
    fn chord_of_antipodal_points_is_diameter() {
        let c = 10_000.0;
        let d = chord_distance(c, 0.0, c / 2.0);
        // Oracle: 2r sin(pi * ds / c) with ds = C/2 gives the diameter C/pi.
        let oracle = c / PI;
        assert!((d - oracle).abs() < 1e-9, "{d} vs {oracle}");
        assert!((d - 3183.0).abs() < 1.0);
    }

    #[test]
    fn chord_is_close_to_arc_for_short_spans() {
        let c = 1_000_000.0;
        let d = chord_distance(c, 100.0, 400.0);
        assert!((d - 300.0).abs() < 0.01, "{d}");
        assert!(d < 300.0, "chord is strictly below the arc");
    }

    #[test]
    fn chord_is_symmetric_and_wraps() {
        let c = 10_000.0;
        assert_eq!(
            chord_distance(c, 9_900.0, 100.0).to_bits(),
            chord_distance(c, 100.0, 9_900.0).to_bits()
        );
        assert!((chord_distance(c, 9_900.0, 100.0) - chord_distance(c, 0.0, 200.0)).abs() < 1e-9);
        assert_eq!(chord_distance(c, 123.0, 123.0), 0.0);
    }

    #[test]
    fn open_overlap_semantics() {
        let f = |t0: f64, t1: f64| Frame {
            message: MessageId(0),
            hop: 0,
            sender: NodeId(0),
            sender_arc: 0.0,
            size_bits: 2000,
            t_start: t0,
            t_end: t1,
        };
        assert!(f(0.0, 1.0).overlaps_open(&f(0.5, 1.5)));
        assert!(!f(0.0, 1.0).overlaps_open(&f(1.0, 2.0)), "touching ends do not overlap");
        assert!(f(0.0, 3.0).overlaps_open(&f(1.0, 2.0)));
    }
}
