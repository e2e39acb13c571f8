//! Deterministic single-threaded discrete-event engine driving the broadcast
//! channel, the protocol state machines and the ring mobility model.
//!
//! Everything a run does is a function of (scenario, seed): events dequeue in
//! `(time, insertion)` order, random draws come from named sub-streams, and
//! all iteration runs over ordered containers. Two runs with the same inputs
//! produce byte-identical logs and reports.
//!
//! Channel resolution happens at each frame's transmit end. A node within
//! radio range of the sender receives the frame unless some other in-range
//! transmission (its own included: radios are half-duplex) overlapped the
//! frame's airtime, in which case the reception is destroyed. Destroyed
//! receptions are counted once per overlap episode per receiver, where an
//! episode is a maximal chain of overlap-connected destroyed frames.

mod channel;
mod log;
mod queue;
mod rng;

pub use channel::{chord_distance, ChannelConfig, Frame};
pub use log::{serialize_log, LogEntry, LogKind, LOG_HEADER};
pub use queue::EventQueue;
pub use rng::RngStreams;

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::geometry::{ArcPosition, Direction, RingGeometry};
use crate::metrics::{
    compute_e2e, compute_pdr, FarthestDelivery, MetricsCollector, MetricsReport, NodeLedger,
};
use crate::mobility::{
    extraction_time, replacement_injection, seed_population, InjectionDistribution, MobilityConfig,
    VehicleState,
};
use crate::protocols::{
    on_receive, on_timer_fired, ProtocolParams, ReceiveAction, ReceptionContext, TimerOutcome,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event scheduled at {event_t} which is before the current time {now}")]
    PastEvent { event_t: f64, now: f64 },
    #[error("unknown or absent node {0}")]
    UnknownNode(u32),
    #[error("run_until target {target} is before the current time {now}")]
    PastHorizon { target: f64, now: f64 },
    #[error("protocol failure: {0}")]
    Protocol(#[from] crate::protocols::ProtocolError),
    #[error("mobility failure: {0}")]
    Mobility(#[from] crate::mobility::MobilityError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("pdr undefined: {0}")]
    Metrics(#[from] crate::metrics::MetricsError),
}

/// Engine-local node handle. The road-side unit is always node 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId(pub u32);

pub type FrameId = usize;

/// Work unit of the engine.
#[derive(Debug, Clone, Copy)]
pub enum EventKind {
    /// RSU creates and transmits the next message.
    MessageGenerate,
    /// Carrier-sense attempt for one frame. A request denied by a busy
    /// carrier is re-scheduled once as `committed`: it then transmits at its
    /// slot without sensing again, so contention after a busy period is
    /// resolved by the deferral jitter alone.
    TransmitRequest {
        node: NodeId,
        message: MessageId,
        hop: u32,
        committed: bool,
    },
    /// Frame airtime over; resolve receptions.
    TransmitEnd { frame: FrameId },
    /// A pending forward timer reached its fire time.
    TimerFired { node: NodeId, message: MessageId },
    /// Vehicle reaches its destination exit.
    VehicleExtract { node: NodeId },
    /// Periodic position dump tick.
    MobilitySample,
}

/// A scheduled event as seen by the queue: `(time, seq)` orders execution.
#[derive(Debug)]
pub struct SimEvent {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Rsu,
    Vehicle,
}

#[derive(Debug)]
struct Node {
    kind: NodeKind,
    /// Trajectory anchor: at `t0` the node was at `arc0`.
    arc0: f64,
    t0: f64,
    speed_mps: f64,
    dir: Direction,
    destination_exit: u32,
    injected_at: f64,
    extracted_at: Option<f64>,
    /// Protocol status per message. Presence of a key means at least one
    /// copy was received (or, for the RSU, originated).
    proto: BTreeMap<MessageId, crate::protocols::MsgStatus>,
}

impl Node {
    fn present(&self) -> bool {
        self.extracted_at.is_none()
    }

    fn arc_at(&self, t: f64, c: f64) -> f64 {
        let dist = self.speed_mps * (t - self.t0);
        let s = match self.dir {
            Direction::Clockwise => self.arc0 + dist,
            Direction::Counterclockwise => self.arc0 - dist,
        };
        s.rem_euclid(c)
    }
}

#[derive(Debug, Clone, Copy)]
struct MessageRecord {
    t_gen: f64,
    size_bits: u64,
    farthest: Option<NodeId>,
}

#[derive(Debug)]
struct RsuState {
    node: NodeId,
    size_bits: u64,
}

#[derive(Debug)]
struct MobilityRuntime {
    cfg: MobilityConfig,
    dist: InjectionDistribution,
    geometry: RingGeometry,
}

/// Per-receiver collision-episode tracker: end of the span of the last
/// counted episode.
#[derive(Debug, Default)]
struct EpisodeTracker {
    span_end: BTreeMap<NodeId, f64>,
}

impl EpisodeTracker {
    /// Returns true when this destroyed cluster opens a new episode.
    fn observe(&mut self, receiver: NodeId, cluster_start: f64, cluster_end: f64) -> bool {
        match self.span_end.get_mut(&receiver) {
            Some(end) if cluster_start < *end => {
                *end = end.max(cluster_end);
                false
            }
            _ => {
                self.span_end.insert(receiver, cluster_end);
                true
            }
        }
    }
}

/// One scenario run: ring of given circumference, a channel, a protocol, and
/// nodes that are either statically placed or managed by the mobility model.
pub struct Simulation {
    circumference: f64,
    channel: ChannelConfig,
    protocol: ProtocolParams,
    seed: u64,
    now: f64,
    queue: EventQueue,
    nodes: Vec<Node>,
    frames: Vec<Frame>,
    active_frames: Vec<FrameId>,
    /// Frames that may still overlap a frame yet to be resolved.
    recent_frames: Vec<FrameId>,
    episodes: EpisodeTracker,
    messages: Vec<MessageRecord>,
    rsu: Option<RsuState>,
    mobility: Option<MobilityRuntime>,
    rng: RngStreams,
    metrics: MetricsCollector,
    log: Vec<LogEntry>,
    capture_log: bool,
    seeded_count: u64,
    injections: u64,
    extractions: u64,
    mobility_dump: Vec<(f64, u32, f64, Direction, f64)>,
    mobility_sample_interval: Option<f64>,
}

impl Simulation {
    pub fn new(
        circumference: f64,
        channel: ChannelConfig,
        protocol: ProtocolParams,
        seed: u64,
    ) -> Result<Self, SimError> {
        if !(circumference > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "circumference must be positive, got {circumference}"
            )));
        }
        channel.validate().map_err(SimError::InvalidConfig)?;
        protocol
            .validate(channel.r_radio_m)
            .map_err(SimError::InvalidConfig)?;
        Ok(Self {
            circumference,
            channel,
            protocol,
            seed,
            now: 0.0,
            queue: EventQueue::new(),
            nodes: Vec::new(),
            frames: Vec::new(),
            active_frames: Vec::new(),
            recent_frames: Vec::new(),
            episodes: EpisodeTracker::default(),
            messages: Vec::new(),
            rsu: None,
            mobility: None,
            rng: RngStreams::new(seed),
            metrics: MetricsCollector::new(),
            log: Vec::new(),
            capture_log: true,
            seeded_count: 0,
            injections: 0,
            extractions: 0,
            mobility_dump: Vec::new(),
            mobility_sample_interval: None,
        })
    }

    pub fn set_capture_log(&mut self, capture: bool) {
        self.capture_log = capture;
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    pub fn channel(&self) -> &ChannelConfig {
        &self.channel
    }

    pub fn log_entries(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn serialized_log(&self) -> String {
        serialize_log(&self.log)
    }

    pub fn metrics(&self) -> &MetricsCollector {
        &self.metrics
    }

    pub fn message_count(&self) -> u64 {
        self.messages.len() as u64
    }

    pub fn injection_counts(&self) -> (u64, u64, u64) {
        (self.seeded_count, self.injections, self.extractions)
    }

    pub fn present_vehicle_count(&self) -> u64 {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Vehicle && n.present())
            .count() as u64
    }

    fn push_log(&mut self, entry: LogEntry) {
        if self.capture_log {
            self.log.push(entry);
        }
    }

    /// Installs the road-side unit at a fixed arc and schedules one message
    /// per `period_s`, starting at `t = period_s`, up to `run_s` inclusive.
    pub fn install_rsu(&mut self, arc: ArcPosition, period_s: f64, size_bits: u64, run_s: f64) -> NodeId {
        assert!(self.rsu.is_none(), "only one RSU is supported");
        assert!(size_bits > 0, "frames need at least one bit");
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            kind: NodeKind::Rsu,
            arc0: arc.0.rem_euclid(self.circumference),
            t0: self.now,
            speed_mps: 0.0,
            dir: Direction::Clockwise,
            destination_exit: 0,
            injected_at: self.now,
            extracted_at: None,
            proto: BTreeMap::new(),
        });
        self.rsu = Some(RsuState { node: id, size_bits });
        for t in crate::protocols::rsu_schedule(period_s, run_s) {
            self.queue.push(t, EventKind::MessageGenerate);
        }
        id
    }

    /// Adds a stationary protocol-running node, used by line and cluster
    /// fixtures.
    pub fn add_static_node(&mut self, arc: ArcPosition) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let arc0 = arc.0.rem_euclid(self.circumference);
        self.nodes.push(Node {
            kind: NodeKind::Vehicle,
            arc0,
            t0: self.now,
            speed_mps: 0.0,
            dir: Direction::Clockwise,
            destination_exit: 0,
            injected_at: self.now,
            extracted_at: None,
            proto: BTreeMap::new(),
        });
        self.push_log(LogEntry {
            t: self.now,
            kind: LogKind::Inject,
            node: Some(id),
            message: None,
            hop: None,
            detail: format!("arc={arc0:.6};dir=cw;speed=0.000000;seed=1"),
        });
        id
    }

    /// Seeds the mobility population and schedules every vehicle's
    /// extraction. Replacements keep the population constant afterwards.
    pub fn install_mobility(&mut self, cfg: MobilityConfig, geometry: &RingGeometry) -> Result<(), SimError> {
        assert!(self.mobility.is_none(), "mobility already installed");
        if (geometry.circumference() - self.circumference).abs() > 1e-6 * self.circumference {
            return Err(SimError::InvalidConfig(format!(
                "geometry circumference {} does not match the simulation ring {}",
                geometry.circumference(),
                self.circumference
            )));
        }
        let population = seed_population(&cfg, geometry, 0, &mut self.rng.mobility)?;
        for v in &population {
            self.spawn_vehicle(v, geometry, true);
        }
        self.seeded_count = population.len() as u64;
        self.mobility = Some(MobilityRuntime {
            dist: InjectionDistribution::new(&cfg),
            cfg,
            geometry: geometry.clone(),
        });
        Ok(())
    }

    /// Enables the periodic `t,vehicle_id,arc,dir,speed` position dump.
    pub fn enable_mobility_dump(&mut self, interval_s: f64) {
        assert!(interval_s > 0.0);
        self.mobility_sample_interval = Some(interval_s);
        self.queue.push(self.now, EventKind::MobilitySample);
    }

    pub fn mobility_dump_text(&self) -> String {
        let mut out = String::from("t,vehicle_id,arc,dir,speed\n");
        for (t, id, arc, dir, speed) in &self.mobility_dump {
            out.push_str(&format!("{t:.3},{id},{arc:.6},{dir},{speed:.6}\n"));
        }
        out
    }

    fn spawn_vehicle(&mut self, v: &VehicleState, geometry: &RingGeometry, seeded: bool) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let node = Node {
            kind: NodeKind::Vehicle,
            arc0: v.arc.0.rem_euclid(self.circumference),
            t0: self.now,
            speed_mps: v.speed_mps,
            dir: v.dir,
            destination_exit: v.destination_exit,
            injected_at: self.now,
            extracted_at: None,
            proto: BTreeMap::new(),
        };
        let eta = extraction_time(
            &VehicleState {
                arc: ArcPosition(node.arc0),
                ..*v
            },
            geometry,
        );
        self.nodes.push(node);
        self.queue.push(self.now + eta, EventKind::VehicleExtract { node: id });
        let detail = format!(
            "arc={:.6};dir={};speed={:.6}{}",
            v.arc.0.rem_euclid(self.circumference),
            v.dir,
            v.speed_mps,
            if seeded { ";seed=1" } else { "" }
        );
        self.push_log(LogEntry {
            t: self.now,
            kind: LogKind::Inject,
            node: Some(id),
            message: None,
            hop: None,
            detail,
        });
        id
    }

    /// Current arc of a node.
    pub fn node_arc(&self, node: NodeId) -> Option<f64> {
        let n = self.nodes.get(node.0 as usize)?;
        if !n.present() {
            return None;
        }
        Some(n.arc_at(self.now, self.circumference))
    }

    /// All present nodes within the (closed-ball) radio range of `node`.
    pub fn neighbors(&self, node: NodeId) -> Vec<NodeId> {
        let Some(arc) = self.node_arc(node) else { return Vec::new() };
        self.nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| *i != node.0 as usize && n.present())
            .filter(|(_, n)| {
                chord_distance(self.circumference, arc, n.arc_at(self.now, self.circumference))
                    <= self.channel.r_radio_m
            })
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }

    /// Schedules a raw event. Engine-internal paths use the queue directly;
    /// this is the validated public entry.
    pub fn schedule(&mut self, time: f64, kind: EventKind) -> Result<(), SimError> {
        if time < self.now {
            return Err(SimError::PastEvent {
                event_t: time,
                now: self.now,
            });
        }
        self.queue.push(time, kind);
        Ok(())
    }

    /// Requests a transmission: carrier-sense happens at the current time.
    pub fn transmit(&mut self, node: NodeId, message: MessageId, hop: u32) -> Result<(), SimError> {
        let n = self
            .nodes
            .get(node.0 as usize)
            .ok_or(SimError::UnknownNode(node.0))?;
        if !n.present() {
            return Err(SimError::UnknownNode(node.0));
        }
        self.queue.push(
            self.now,
            EventKind::TransmitRequest {
                node,
                message,
                hop,
                committed: false,
            },
        );
        Ok(())
    }

    /// Executes every event with `time <= horizon` and advances the clock to
    /// the horizon.
    pub fn run_until(&mut self, horizon: f64) -> Result<(), SimError> {
        if horizon < self.now {
            return Err(SimError::PastHorizon {
                target: horizon,
                now: self.now,
            });
        }
        while let Some(t) = self.queue.peek_time() {
            if t > horizon {
                break;
            }
            let ev = self.queue.pop().expect("peeked event exists");
            debug_assert!(ev.time >= self.now, "causality violation");
            self.now = ev.time;
            self.handle(ev)?;
        }
        self.now = horizon;
        Ok(())
    }

    fn handle(&mut self, ev: SimEvent) -> Result<(), SimError> {
        match ev.kind {
            EventKind::MessageGenerate => self.on_generate(),
            EventKind::TransmitRequest {
                node,
                message,
                hop,
                committed,
            } => self.on_transmit_request(node, message, hop, committed),
            EventKind::TransmitEnd { frame } => self.on_transmit_end(frame),
            EventKind::TimerFired { node, message } => self.on_timer(node, message),
            EventKind::VehicleExtract { node } => self.on_extract(node),
            EventKind::MobilitySample => {
                self.on_mobility_sample();
                Ok(())
            }
        }
    }

    fn on_generate(&mut self) -> Result<(), SimError> {
        let rsu = self.rsu.as_ref().expect("generate without an RSU");
        let rsu_node = rsu.node;
        let size_bits = rsu.size_bits;
        let id = MessageId(self.messages.len() as u32);
        let rsu_arc = self.nodes[rsu_node.0 as usize].arc_at(self.now, self.circumference);

        // The farthest node is fixed at generation time: the present vehicle
        // maximizing the shorter-way ring distance from the RSU, ties to the
        // smaller id.
        let mut farthest: Option<(f64, NodeId)> = None;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind != NodeKind::Vehicle || !n.present() {
                continue;
            }
            let arc = n.arc_at(self.now, self.circumference);
            let d = ring_distance(self.circumference, rsu_arc, arc);
            let candidate = (d, NodeId(i as u32));
            farthest = match farthest {
                None => Some(candidate),
                Some((best, _)) if d > best => Some(candidate),
                keep => keep,
            };
        }

        self.messages.push(MessageRecord {
            t_gen: self.now,
            size_bits,
            farthest: farthest.map(|(_, n)| n),
        });
        // The RSU originates the message; it never re-forwards it.
        self.nodes[rsu_node.0 as usize]
            .proto
            .insert(id, crate::protocols::MsgStatus::Forwarded);
        let detail = match farthest {
            Some((_, n)) => format!("farthest={};bits={}", n.0, size_bits),
            None => format!("farthest=;bits={size_bits}"),
        };
        self.push_log(LogEntry {
            t: self.now,
            kind: LogKind::Gen,
            node: Some(rsu_node),
            message: Some(id),
            hop: Some(0),
            detail,
        });
        self.transmit(rsu_node, id, 0)
    }

    fn on_transmit_request(
        &mut self,
        node: NodeId,
        message: MessageId,
        hop: u32,
        committed: bool,
    ) -> Result<(), SimError> {
        let Some(n) = self.nodes.get(node.0 as usize) else {
            return Err(SimError::UnknownNode(node.0));
        };
        if !n.present() {
            // The sender left the ring while deferring; the frame dies.
            return Ok(());
        }
        let arc = n.arc_at(self.now, self.circumference);

        // A committed attempt transmits at its slot regardless of the
        // carrier, except that a radio cannot start a second frame while its
        // own previous one is still on the air.
        let busy_end = if committed {
            self.active_frames
                .iter()
                .map(|&fid| &self.frames[fid])
                .filter(|f| f.sender == node)
                .map(|f| f.t_end)
                .fold(None, |acc: Option<f64>, end| Some(acc.map_or(end, |a| a.max(end))))
        } else {
            // Carrier sense: any in-range ongoing transmission defers us to
            // the end of the busy period plus a short random jitter.
            let mut busy: Option<f64> = None;
            for &fid in &self.active_frames {
                let f = &self.frames[fid];
                if chord_distance(self.circumference, f.sender_arc, arc) <= self.channel.r_radio_m {
                    busy = Some(busy.map_or(f.t_end, |b: f64| b.max(f.t_end)));
                }
            }
            busy
        };
        if let Some(end) = busy_end {
            let jitter = self.channel.cs_jitter_max_s
                - self.rng.channel.random_range(0.0..self.channel.cs_jitter_max_s);
            self.queue.push(
                end + jitter,
                EventKind::TransmitRequest {
                    node,
                    message,
                    hop,
                    committed: true,
                },
            );
            return Ok(());
        }

        let size_bits = self.messages[message.0 as usize].size_bits;
        let frame = Frame {
            message,
            hop,
            sender: node,
            sender_arc: arc,
            size_bits,
            t_start: self.now,
            t_end: self.now + self.channel.airtime_s(size_bits),
        };
        let fid = self.frames.len();
        self.frames.push(frame);
        self.active_frames.push(fid);
        self.recent_frames.push(fid);
        self.push_log(LogEntry {
            t: self.now,
            kind: LogKind::TxStart,
            node: Some(node),
            message: Some(message),
            hop: Some(hop),
            detail: format!("arc={arc:.6};t_end={:.9};bits={size_bits}", frame.t_end),
        });
        self.queue.push(frame.t_end, EventKind::TransmitEnd { frame: fid });
        Ok(())
    }

    fn on_transmit_end(&mut self, fid: FrameId) -> Result<(), SimError> {
        let frame = self.frames[fid];
        self.active_frames.retain(|&f| f != fid);
        self.push_log(LogEntry {
            t: self.now,
            kind: LogKind::TxEnd,
            node: Some(frame.sender),
            message: Some(frame.message),
            hop: Some(frame.hop),
            detail: String::new(),
        });

        // Collect receivers and their garbler clusters first, then apply
        // protocol reactions; reactions cannot affect this frame's outcome.
        let mut deliveries: Vec<(NodeId, f64)> = Vec::new();
        for i in 0..self.nodes.len() {
            let receiver = NodeId(i as u32);
            let n = &self.nodes[i];
            if n.kind != NodeKind::Vehicle || !n.present() || receiver == frame.sender {
                continue;
            }
            // Nodes injected mid-frame heard only part of it; they neither
            // receive nor count episodes.
            if n.injected_at > frame.t_start {
                continue;
            }
            let r_arc = n.arc_at(frame.t_start, self.circumference);
            let d_ab = chord_distance(self.circumference, frame.sender_arc, r_arc);
            if d_ab > self.channel.r_radio_m {
                continue;
            }

            if self.channel.collisions {
                let mut cluster_start = frame.t_start;
                let mut cluster_end = frame.t_end;
                let mut destroyed = false;
                for &gid in &self.recent_frames {
                    if gid == fid {
                        continue;
                    }
                    let g = &self.frames[gid];
                    if !g.overlaps_open(&frame) {
                        continue;
                    }
                    let gd = chord_distance(self.circumference, g.sender_arc, r_arc);
                    let own = g.sender == receiver;
                    if gd <= self.channel.r_radio_m || own {
                        destroyed = true;
                        cluster_start = cluster_start.min(g.t_start);
                        cluster_end = cluster_end.max(g.t_end);
                    }
                }
                if destroyed {
                    if self.episodes.observe(receiver, cluster_start, cluster_end) {
                        self.metrics.record_collision(receiver);
                        self.push_log(LogEntry {
                            t: self.now,
                            kind: LogKind::Collision,
                            node: Some(receiver),
                            message: Some(frame.message),
                            hop: Some(frame.hop),
                            detail: format!("frame={fid}"),
                        });
                    }
                    continue;
                }
            }
            deliveries.push((receiver, d_ab));
        }

        // Prune the overlap window: anything ending at or before the earliest
        // start among still-active frames can never garble a later one.
        let threshold = self
            .active_frames
            .iter()
            .map(|&f| self.frames[f].t_start)
            .fold(self.now, f64::min);
        let frames = &self.frames;
        self.recent_frames.retain(|&f| frames[f].t_end > threshold);

        for (receiver, d_ab) in deliveries {
            self.deliver(receiver, &frame, d_ab)?;
        }
        Ok(())
    }

    fn deliver(&mut self, receiver: NodeId, frame: &Frame, d_ab: f64) -> Result<(), SimError> {
        self.metrics.record_reception(receiver, frame.message, self.now);
        self.push_log(LogEntry {
            t: self.now,
            kind: LogKind::Rx,
            node: Some(receiver),
            message: Some(frame.message),
            hop: Some(frame.hop),
            detail: format!("from={};d={d_ab:.3}", frame.sender.0),
        });

        let state = self.nodes[receiver.0 as usize].proto.get(&frame.message);
        let ctx = ReceptionContext {
            receiver,
            sender: frame.sender,
            d_ab_m: d_ab,
            hop: frame.hop,
        };
        let action = on_receive(state, &ctx, &self.protocol, self.now, &mut self.rng.protocol);
        match action {
            ReceiveAction::ScheduleForward { fire_at, hop0 } => {
                self.nodes[receiver.0 as usize]
                    .proto
                    .insert(frame.message, crate::protocols::MsgStatus::Pending { fire_at, hop0 });
                self.queue.push(
                    fire_at,
                    EventKind::TimerFired {
                        node: receiver,
                        message: frame.message,
                    },
                );
            }
            ReceiveAction::CancelPending => {
                self.nodes[receiver.0 as usize]
                    .proto
                    .insert(frame.message, crate::protocols::MsgStatus::Suppressed);
            }
            ReceiveAction::Ignore => {}
        }
        Ok(())
    }

    fn on_timer(&mut self, node: NodeId, message: MessageId) -> Result<(), SimError> {
        let Some(n) = self.nodes.get(node.0 as usize) else {
            return Err(SimError::UnknownNode(node.0));
        };
        if !n.present() {
            // Extraction cancels every pending forward.
            return Ok(());
        }
        match on_timer_fired(n.proto.get(&message))? {
            TimerOutcome::Cancelled => Ok(()),
            TimerOutcome::Transmit { hop } => {
                self.nodes[node.0 as usize]
                    .proto
                    .insert(message, crate::protocols::MsgStatus::Forwarded);
                self.push_log(LogEntry {
                    t: self.now,
                    kind: LogKind::Timer,
                    node: Some(node),
                    message: Some(message),
                    hop: Some(hop),
                    detail: String::new(),
                });
                self.transmit(node, message, hop)
            }
        }
    }

    fn on_extract(&mut self, node: NodeId) -> Result<(), SimError> {
        let c = self.circumference;
        let n = &mut self.nodes[node.0 as usize];
        debug_assert!(n.present(), "double extraction of node {}", node.0);
        let arc = n.arc_at(self.now, c);
        let exit = n.destination_exit;
        n.extracted_at = Some(self.now);
        self.extractions += 1;
        self.push_log(LogEntry {
            t: self.now,
            kind: LogKind::Extract,
            node: Some(node),
            message: None,
            hop: None,
            detail: format!("arc={arc:.6};exit={exit}"),
        });

        if let Some(mob) = self.mobility.take() {
            let extracted = VehicleState {
                id: node.0 as u64,
                arc: ArcPosition(arc),
                dir: self.nodes[node.0 as usize].dir,
                speed_mps: self.nodes[node.0 as usize].speed_mps,
                destination_exit: exit,
            };
            let replacement = replacement_injection(
                &extracted,
                &mob.cfg,
                &mob.dist,
                &mob.geometry,
                self.nodes.len() as u64,
                &mut self.rng.mobility,
            );
            if let Some(v) = replacement {
                self.spawn_vehicle(&v, &mob.geometry, false);
                self.injections += 1;
            }
            self.mobility = Some(mob);
            // Population stays constant: every extraction re-injects.
            debug_assert_eq!(
                self.seeded_count + self.injections - self.extractions,
                self.present_vehicle_count()
            );
        }
        Ok(())
    }

    fn on_mobility_sample(&mut self) {
        let Some(interval) = self.mobility_sample_interval else { return };
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind != NodeKind::Vehicle || !n.present() {
                continue;
            }
            self.mobility_dump.push((
                self.now,
                i as u32,
                n.arc_at(self.now, self.circumference),
                n.dir,
                n.speed_mps,
            ));
        }
        self.queue.push(self.now + interval, EventKind::MobilitySample);
    }

    /// Assembles the run report. `duration_s` is the nominal scenario length
    /// recorded in the metadata (fixtures may run past it to drain).
    pub fn report(&self, duration_s: f64) -> Result<MetricsReport, SimError> {
        let mut per_node = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind != NodeKind::Vehicle {
                continue;
            }
            let node = NodeId(i as u32);
            let mut deliverable = 0u64;
            let mut received = 0u64;
            for (mid, m) in self.messages.iter().enumerate() {
                let in_window = m.t_gen >= n.injected_at
                    && n.extracted_at.is_none_or(|ex| m.t_gen < ex);
                if !in_window {
                    continue;
                }
                deliverable += 1;
                if self
                    .metrics
                    .reception_time(node, MessageId(mid as u32))
                    .is_some()
                {
                    received += 1;
                }
            }
            per_node.push(NodeLedger {
                node,
                deliverable,
                received,
            });
        }
        let pdr = compute_pdr(&per_node)?;

        let deliveries: Vec<FarthestDelivery> = self
            .messages
            .iter()
            .enumerate()
            .map(|(mid, m)| {
                let delay = m.farthest.and_then(|node| {
                    self.metrics
                        .reception_time(node, MessageId(mid as u32))
                        .map(|t| t - m.t_gen)
                });
                FarthestDelivery {
                    message: MessageId(mid as u32),
                    delay_s: delay,
                }
            })
            .collect();
        let (avg_e2e_s, delivered, undelivered) = compute_e2e(&deliveries);

        Ok(MetricsReport {
            protocol: self.protocol.kind,
            seed: self.seed,
            duration_s,
            nodes: per_node.len() as u64,
            messages: self.messages.len() as u64,
            pdr,
            collisions: self.metrics.collisions(),
            avg_e2e_s,
            delivered_to_farthest: delivered,
            undelivered_to_farthest: undelivered,
            per_node,
        })
    }
}

/// Shorter-way arc distance between two positions on a ring of circumference
/// `c`.
pub fn ring_distance(c: f64, arc_a: f64, arc_b: f64) -> f64 {
    let d = (arc_b - arc_a).rem_euclid(c);
    d.min(c - d)
}
