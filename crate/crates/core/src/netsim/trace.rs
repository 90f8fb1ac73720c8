//! Event trace and its line format.
//!
//! One event per line, whitespace separated:
//!
//! ```text
//! # slot seq kind node payload
//! 3 17 deliver 2 1a1d47...
//! 5 23 protocol_event.DestinationCommit - 9f01...
//! ```
//!
//! `node` is a decimal id or `-`. `payload` is lowercase hex or `-` when
//! empty. Kinds:
//!
//! | kind | node | payload |
//! |------|------|---------|
//! | `scenario` | - | scenario name, UTF-8 |
//! | `secret` | - | the message `m` |
//! | `send` | sender, `-` for the adversary | encoded packet |
//! | `deliver` | receiver | encoded packet as received |
//! | `drop` | sender | encoded packet |
//! | `cellular` | sender | message label, UTF-8 |
//! | `state_transition` | node | `accept`, `reject <error>` or similar, UTF-8 |
//! | `protocol_event.<Name>` | relay id or `-` | 32-byte key value |
//! | `intruder_alert` | detecting node | error label, UTF-8 |
//! | `attacker_knowledge_update` | - | eavesdropped packet |
//! | `attacker_knowledge` | - | one 32-byte atom of the final closure |

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::properties::{ProtocolEvent, ProtocolEventKind};
use crate::{NodeId, Scenario, Slot};

pub const TRACE_HEADER: &str = "# slot seq kind node payload";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimEventKind {
    Scenario,
    Secret,
    Send,
    Deliver,
    Drop,
    Cellular,
    StateTransition,
    Protocol(ProtocolEventKind),
    IntruderAlert,
    AttackerKnowledgeUpdate,
    AttackerKnowledge,
}

impl SimEventKind {
    pub fn name(self) -> String {
        match self {
            SimEventKind::Scenario => "scenario".into(),
            SimEventKind::Secret => "secret".into(),
            SimEventKind::Send => "send".into(),
            SimEventKind::Deliver => "deliver".into(),
            SimEventKind::Drop => "drop".into(),
            SimEventKind::Cellular => "cellular".into(),
            SimEventKind::StateTransition => "state_transition".into(),
            SimEventKind::Protocol(k) => format!("protocol_event.{}", k.name()),
            SimEventKind::IntruderAlert => "intruder_alert".into(),
            SimEventKind::AttackerKnowledgeUpdate => "attacker_knowledge_update".into(),
            SimEventKind::AttackerKnowledge => "attacker_knowledge".into(),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        if let Some(rest) = s.strip_prefix("protocol_event.") {
            return rest.parse().ok().map(SimEventKind::Protocol);
        }
        Some(match s {
            "scenario" => SimEventKind::Scenario,
            "secret" => SimEventKind::Secret,
            "send" => SimEventKind::Send,
            "deliver" => SimEventKind::Deliver,
            "drop" => SimEventKind::Drop,
            "cellular" => SimEventKind::Cellular,
            "state_transition" => SimEventKind::StateTransition,
            "intruder_alert" => SimEventKind::IntruderAlert,
            "attacker_knowledge_update" => SimEventKind::AttackerKnowledgeUpdate,
            "attacker_knowledge" => SimEventKind::AttackerKnowledge,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub slot: Slot,
    pub seq: u64,
    pub kind: SimEventKind,
    pub node: Option<NodeId>,
    pub payload: Vec<u8>,
}

impl SimEvent {
    /// Payload as text, for the kinds that carry labels.
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.payload).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {msg}")]
pub struct TraceParseError {
    pub line: usize,
    pub msg: String,
}

/// Ordered list of simulator events. Every other view is a projection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTrace {
    pub events: Vec<SimEvent>,
}

impl EventTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, slot: Slot, kind: SimEventKind, node: Option<NodeId>, payload: impl Into<Vec<u8>>) {
        let seq = self.events.len() as u64;
        self.events.push(SimEvent { slot, seq, kind, node, payload: payload.into() });
    }

    pub fn of_kind(&self, kind: SimEventKind) -> impl Iterator<Item = &SimEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn protocol_events(&self) -> Vec<ProtocolEvent> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                SimEventKind::Protocol(kind) => Some(ProtocolEvent {
                    kind,
                    node: e.node,
                    value: e.payload.as_slice().try_into().ok()?,
                    slot: e.slot,
                }),
                _ => None,
            })
            .collect()
    }

    /// Final closure of everything the adversary can derive.
    pub fn attacker_knowledge(&self) -> BTreeSet<Vec<u8>> {
        self.of_kind(SimEventKind::AttackerKnowledge).map(|e| e.payload.clone()).collect()
    }

    pub fn scenario(&self) -> Option<Scenario> {
        self.of_kind(SimEventKind::Scenario).next()?.text().parse().ok()
    }

    pub fn secret(&self) -> Option<Vec<u8>> {
        self.of_kind(SimEventKind::Secret).next().map(|e| e.payload.clone())
    }

    /// `(node, error label)` for every rejected input.
    pub fn rejections(&self) -> Vec<(Option<NodeId>, String)> {
        self.of_kind(SimEventKind::StateTransition)
            .filter_map(|e| e.text().strip_prefix("reject ").map(|r| (e.node, r.to_owned())))
            .collect()
    }

    pub fn source_accepted(&self) -> bool {
        self.of_kind(SimEventKind::StateTransition).any(|e| e.payload == b"accept")
    }

    pub fn to_log(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 96);
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for e in &self.events {
            let node = e.node.map_or_else(|| "-".to_owned(), |n| n.0.to_string());
            let payload = if e.payload.is_empty() { "-".to_owned() } else { hex::encode(&e.payload) };
            writeln!(out, "{} {} {} {} {}", e.slot, e.seq, e.kind.name(), node, payload).expect("string write");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceParseError> {
        let mut trace = EventTrace::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| TraceParseError { line: i + 1, msg };
            let cols: Vec<&str> = line.split_whitespace().collect();
            let [slot, seq, kind, node, payload] = cols[..] else {
                return Err(err(format!("expected 5 columns, found {}", cols.len())));
            };
            let slot = slot.parse().map_err(|_| err(format!("bad slot {slot:?}")))?;
            let seq = seq.parse().map_err(|_| err(format!("bad seq {seq:?}")))?;
            let kind = SimEventKind::parse(kind).ok_or_else(|| err(format!("unknown kind {kind:?}")))?;
            let node = match node {
                "-" => None,
                n => Some(NodeId(n.parse().map_err(|_| err(format!("bad node {n:?}")))?)),
            };
            let payload = match payload {
                "-" => Vec::new(),
                p => hex::decode(p).map_err(|_| err("payload is not hex".into()))?,
            };
            if let SimEventKind::Protocol(_) = kind {
                if payload.len() != 32 {
                    return Err(err("protocol event value must be 32 bytes".into()));
                }
            }
            trace.events.push(SimEvent { slot, seq, kind, node, payload });
        }
        Ok(trace)
    }
}
