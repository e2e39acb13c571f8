//! Per-run statistics: packet delivery ratio, MAC collision count and
//! end-to-end delay to the node farthest from the road-side unit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::protocols::ProtocolKind;
use crate::sim::{MessageId, NodeId};

pub const REPORT_HEADER: &str =
    "protocol,seed,duration_s,nodes,messages,pdr,collisions,avg_e2e_s,undelivered_farthest";
pub const APPENDIX_HEADER: &str = "node_id,deliverable,received";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no node had a deliverable message; PDR is undefined")]
    NoEligibleNodes,
    #[error("cannot write report: {0}")]
    IoFailure(#[from] std::io::Error),
}

/// Reception and collision ledger filled in by the engine during a run.
#[derive(Debug, Default)]
pub struct MetricsCollector {
    /// First reception time per (receiver, message).
    receptions: BTreeMap<(NodeId, MessageId), f64>,
    collisions: u64,
    collisions_per_receiver: BTreeMap<NodeId, u64>,
}

impl MetricsCollector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a clean reception; only the first one per pair sticks.
    pub fn record_reception(&mut self, node: NodeId, message: MessageId, t: f64) {
        self.receptions.entry((node, message)).or_insert(t);
    }

    /// One destroyed-reception episode at a receiver. Called by the channel
    /// model only.
    pub fn record_collision(&mut self, receiver: NodeId) {
        self.collisions += 1;
        *self.collisions_per_receiver.entry(receiver).or_default() += 1;
    }

    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    pub fn reception_time(&self, node: NodeId, message: MessageId) -> Option<f64> {
        self.receptions.get(&(node, message)).copied()
    }

    pub fn receptions(&self) -> impl Iterator<Item = (&(NodeId, MessageId), &f64)> {
        self.receptions.iter()
    }

    pub fn distinct_received(&self, node: NodeId) -> u64 {
        self.receptions.keys().filter(|(n, _)| *n == node).count() as u64
    }
}

/// Per-node delivery ledger row: how many messages were generated while the
/// node was present, and how many of those it received.
#[derive(Debug, Clone, Copy)]
pub struct NodeLedger {
    pub node: NodeId,
    pub deliverable: u64,
    pub received: u64,
}

/// Unweighted mean reception fraction over nodes with at least one
/// deliverable message. The road-side unit never appears in the ledger.
pub fn compute_pdr(ledgers: &[NodeLedger]) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    let mut eligible = 0u64;
    for l in ledgers {
        if l.deliverable == 0 {
            continue;
        }
        debug_assert!(l.received <= l.deliverable);
        sum += l.received as f64 / l.deliverable as f64;
        eligible += 1;
    }
    if eligible == 0 {
        return Err(MetricsError::NoEligibleNodes);
    }
    Ok(sum / eligible as f64)
}

/// Delay of one message to the node that was farthest from the RSU at
/// generation time; `None` when that node never received it.
#[derive(Debug, Clone, Copy)]
pub struct FarthestDelivery {
    pub message: MessageId,
    pub delay_s: Option<f64>,
}

/// Average end-to-end delay over messages that reached their farthest node,
/// plus the count of those that did not. Undelivered messages are excluded
/// from the average rather than averaged as infinities.
pub fn compute_e2e(deliveries: &[FarthestDelivery]) -> (Option<f64>, u64, u64) {
    let mut sum = 0.0;
    let mut delivered = 0u64;
    let mut undelivered = 0u64;
    for d in deliveries {
        match d.delay_s {
            Some(delay) => {
                sum += delay;
                delivered += 1;
            }
            None => undelivered += 1,
        }
    }
    let avg = if delivered > 0 { Some(sum / delivered as f64) } else { None };
    (avg, delivered, undelivered)
}

/// One scenario run's metrics.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub duration_s: f64,
    /// Vehicle instances that were present at any time during the run.
    pub nodes: u64,
    pub messages: u64,
    pub pdr: f64,
    pub collisions: u64,
    pub avg_e2e_s: Option<f64>,
    pub delivered_to_farthest: u64,
    pub undelivered_to_farthest: u64,
    pub per_node: Vec<NodeLedger>,
}

impl MetricsReport {
    /// Run row plus (optionally) the per-node appendix, byte-stable for a
    /// fixed scenario and seed. PDR carries six decimal digits.
    pub fn to_text(&self, with_appendix: bool) -> String {
        let mut out = String::new();
        out.push_str(REPORT_HEADER);
        out.push('\n');
        let _ = write!(
            out,
            "{},{},{},{},{},{:.6},{},",
            self.protocol,
            self.seed,
            self.duration_s,
            self.nodes,
            self.messages,
            self.pdr,
            self.collisions,
        );
        if let Some(e2e) = self.avg_e2e_s {
            let _ = write!(out, "{e2e:.6}");
        }
        let _ = writeln!(out, ",{}", self.undelivered_to_farthest);
        if with_appendix {
            out.push_str(APPENDIX_HEADER);
            out.push('\n');
            for l in &self.per_node {
                let _ = writeln!(out, "{},{},{}", l.node.0, l.deliverable, l.received);
            }
        }
        out
    }

    pub fn write_to(&self, path: &Path, with_appendix: bool) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_text(with_appendix))?;
        Ok(())
    }
}
