//! The four broadcast dissemination protocols as per-node state machines.
//!
//! Every protocol forwards a given message at most once per node. They differ
//! in how the forward timer is set on the first received copy and in what a
//! duplicate does to a pending timer:
//!
//! * Flooding — forward after a small uniform jitter; duplicates are ignored.
//! * DBF — wait `T_max * (1 - d_AB / R_max)` so farther receivers fire first;
//!   any duplicate heard while pending cancels the forward.
//! * DBF hop-count — like DBF, but a duplicate cancels the pending forward
//!   only when it carries a larger hop count than the copy that armed the
//!   timer. Same-hop duplicates from a near-simultaneous co-forwarder no
//!   longer kill the next hop, which is the failure mode plain DBF has when
//!   two forwarders sit at almost the same distance from the sender.
//! * RND — forward after a uniform random delay; any duplicate cancels.
//!
//! Inhibition always requires a successful reception: frames destroyed by a
//! collision suppress nothing.

use rand::Rng;
use thiserror::Error;

use super::sim::NodeId;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("timer fired for a message that is not pending (engine bug)")]
    StaleTimer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Flooding,
    Dbf,
    DbfHopCount,
    Rnd,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Flooding,
        ProtocolKind::Dbf,
        ProtocolKind::DbfHopCount,
        ProtocolKind::Rnd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Flooding => "flooding",
            ProtocolKind::Dbf => "dbf",
            ProtocolKind::DbfHopCount => "dbf_hc",
            ProtocolKind::Rnd => "rnd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flooding" => Some(ProtocolKind::Flooding),
            "dbf" => Some(ProtocolKind::Dbf),
            "dbf_hc" => Some(ProtocolKind::DbfHopCount),
            "rnd" => Some(ProtocolKind::Rnd),
            _ => None,
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProtocolParams {
    pub kind: ProtocolKind,
    /// Maximum DBF defer time at distance zero.
    pub t_max_s: f64,
    /// Upper bound of the radio range in the DBF timer formula.
    pub r_max_m: f64,
    /// Upper bound of the RND timer.
    pub rnd_max_s: f64,
    /// Upper bound of the flooding forward jitter.
    pub flood_jitter_s: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            kind: ProtocolKind::DbfHopCount,
            t_max_s: 0.5,
            r_max_m: 300.0,
            rnd_max_s: 0.100,
            flood_jitter_s: 0.001,
        }
    }
}

impl ProtocolParams {
    /// `r_radio_m` is the channel's radio range; R_max must bound it.
    pub fn validate(&self, r_radio_m: f64) -> Result<(), String> {
        if !(self.t_max_s > 0.0) {
            return Err(format!("t_max_s must be positive, got {}", self.t_max_s));
        }
        if !(self.rnd_max_s > 0.0) {
            return Err(format!("rnd_max_s must be positive, got {}", self.rnd_max_s));
        }
        if !(self.flood_jitter_s > 0.0) {
            return Err(format!("flood_jitter_s must be positive, got {}", self.flood_jitter_s));
        }
        if self.r_max_m < r_radio_m {
            return Err(format!(
                "r_max_m ({}) must be >= the radio range ({r_radio_m})",
                self.r_max_m
            ));
        }
        Ok(())
    }
}

/// Per-message protocol status at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MsgStatus {
    /// Forward scheduled; `hop0` is the hop count of the copy that armed it.
    Pending { fire_at: f64, hop0: u32 },
    Forwarded,
    Suppressed,
}

/// What a successful reception asks the engine to do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReceiveAction {
    /// Arm the forward timer; the forwarded frame will carry `hop0 + 1`.
    ScheduleForward { fire_at: f64, hop0: u32 },
    CancelPending,
    /// Duplicate that changes nothing.
    Ignore,
}

/// Context of one successful reception.
#[derive(Debug, Clone, Copy)]
pub struct ReceptionContext {
    pub receiver: NodeId,
    pub sender: NodeId,
    /// Euclidean chord distance receiver-sender, meters.
    pub d_ab_m: f64,
    /// Hop count carried by the received copy.
    pub hop: u32,
}

/// DBF defer timer: `T_max * (1 - d_AB / R_max)`, clamped at zero beyond
/// `R_max`. Strictly decreasing in the distance, so among simultaneous
/// receivers of one frame the farthest fires first.
pub fn dbf_delay(d_ab_m: f64, p: &ProtocolParams) -> f64 {
    (p.t_max_s * (1.0 - d_ab_m / p.r_max_m)).max(0.0)
}

/// RND defer timer: uniform in `[0, rnd_max]`.
pub fn rnd_delay<R: Rng>(p: &ProtocolParams, rng: &mut R) -> f64 {
    rng.random_range(0.0..=p.rnd_max_s)
}

/// Uniform draw in the half-open interval `(0, max]`.
fn jitter_half_open<R: Rng>(max: f64, rng: &mut R) -> f64 {
    max - rng.random_range(0.0..max)
}

/// Reacts to a successful reception. `state` is the node's current status
/// for the message (`None` for the first copy).
pub fn on_receive<R: Rng>(
    state: Option<&MsgStatus>,
    ctx: &ReceptionContext,
    p: &ProtocolParams,
    now: f64,
    rng: &mut R,
) -> ReceiveAction {
    match state {
        None => {
            let delay = match p.kind {
                ProtocolKind::Flooding => jitter_half_open(p.flood_jitter_s, rng),
                ProtocolKind::Dbf | ProtocolKind::DbfHopCount => dbf_delay(ctx.d_ab_m, p),
                ProtocolKind::Rnd => rnd_delay(p, rng),
            };
            ReceiveAction::ScheduleForward {
                fire_at: now + delay,
                hop0: ctx.hop,
            }
        }
        Some(MsgStatus::Pending { hop0, .. }) => match p.kind {
            ProtocolKind::Flooding => ReceiveAction::Ignore,
            ProtocolKind::Dbf | ProtocolKind::Rnd => ReceiveAction::CancelPending,
            ProtocolKind::DbfHopCount => {
                if ctx.hop > *hop0 {
                    // Larger hop count is evidence of downstream progress.
                    ReceiveAction::CancelPending
                } else {
                    ReceiveAction::Ignore
                }
            }
        },
        Some(MsgStatus::Forwarded) | Some(MsgStatus::Suppressed) => ReceiveAction::Ignore,
    }
}

/// Outcome of a forward timer reaching its fire time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerOutcome {
    /// Transmit the message with this hop count and mark Forwarded.
    Transmit { hop: u32 },
    /// The pending forward was cancelled in the meantime.
    Cancelled,
}

/// Resolves a fired timer against the node's message status. A timer firing
/// for a message that was never pending nor suppressed is an engine bug.
pub fn on_timer_fired(state: Option<&MsgStatus>) -> Result<TimerOutcome, ProtocolError> {
    match state {
        Some(MsgStatus::Pending { hop0, .. }) => Ok(TimerOutcome::Transmit { hop: hop0 + 1 }),
        Some(MsgStatus::Suppressed) => Ok(TimerOutcome::Cancelled),
        Some(MsgStatus::Forwarded) | None => Err(ProtocolError::StaleTimer),
    }
}

/// Generation instants for the road-side unit: one message every `period_s`
/// starting at `t = period_s`, up to and including `run_s`.
pub fn rsu_schedule(period_s: f64, run_s: f64) -> Vec<f64> {
    assert!(period_s > 0.0, "rsu period must be positive");
    let mut times = Vec::new();
    let mut k = 1u64;
    loop {
        let t = period_s * k as f64;
        if t > run_s {
            break;
        }
        times.push(t);
        k += 1;
    }
    times
}
