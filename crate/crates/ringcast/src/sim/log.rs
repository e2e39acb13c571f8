//! Structured run log and its delimited-text serialization. For a fixed
//! scenario and seed the serialized log is byte-stable, which is what the
//! determinism checks compare.

use std::fmt::Write as _;

use super::{MessageId, NodeId};

pub const LOG_HEADER: &str = "t,kind,node,msg,hop,detail";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogKind {
    /// Vehicle entered the ring (initial seeding carries `seed=1`).
    Inject,
    /// Vehicle left at its destination exit.
    Extract,
    /// RSU created a new message.
    Gen,
    TxStart,
    TxEnd,
    /// Clean reception.
    Rx,
    /// One counted overlap episode at a receiver.
    Collision,
    /// A pending forward timer fired.
    Timer,
}

impl LogKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LogKind::Inject => "inject",
            LogKind::Extract => "extract",
            LogKind::Gen => "gen",
            LogKind::TxStart => "tx_start",
            LogKind::TxEnd => "tx_end",
            LogKind::Rx => "rx",
            LogKind::Collision => "col",
            LogKind::Timer => "timer",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogEntry {
    pub t: f64,
    pub kind: LogKind,
    pub node: Option<NodeId>,
    pub message: Option<MessageId>,
    pub hop: Option<u32>,
    pub detail: String,
}

/// Serializes entries in emission order under the documented header.
pub fn serialize_log(entries: &[LogEntry]) -> String {
    let mut out = String::with_capacity(entries.len() * 48 + LOG_HEADER.len() + 1);
    out.push_str(LOG_HEADER);
    out.push('\n');
    for e in entries {
        let _ = write!(out, "{:.9},{},", e.t, e.kind.as_str());
        if let Some(n) = e.node {
            let _ = write!(out, "{}", n.0);
        }
        out.push(',');
        if let Some(m) = e.message {
            let _ = write!(out, "{}", m.0);
        }
        out.push(',');
        if let Some(h) = e.hop {
            let _ = write!(out, "{h}");
        }
        out.push(',');
        out.push_str(&e.detail);
        out.push('\n');
    }
    out
}
