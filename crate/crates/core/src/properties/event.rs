use std::fmt;
use std::str::FromStr;

use crate::{NodeId, Slot};

/// Protocol party, for reachability events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Source,
    Destination,
    Relay,
    Mme,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Source, Role::Destination, Role::Relay, Role::Mme];

    pub fn name(self) -> &'static str {
        match self {
            Role::Source => "Source",
            Role::Destination => "Destination",
            Role::Relay => "Relay",
            Role::Mme => "mme",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Running/commit style events placed at fixed protocol points.
///
/// A party emits `*Running(k)` the first time it uses key `k` and
/// `*Commit(k)` when it settles on it: the source when it accepts the reply,
/// the destination when it accepts the request, the MME when it hands the key
/// to the destination. Relay events carry the relay id in
/// [`ProtocolEvent::node`] and the relay's TESLA key as the value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolEventKind {
    SourceRunning,
    MmeRunning,
    DestinationRunning,
    ClientRunning,
    SourceCommit,
    MmeCommit,
    DestinationCommit,
    AcceptsServerClient,
    AcceptsServerDestination,
    TermDestination,
    Reachable(Role),
}

impl ProtocolEventKind {
    pub fn name(self) -> String {
        match self {
            ProtocolEventKind::SourceRunning => "SourceRunning".into(),
            ProtocolEventKind::MmeRunning => "mmeRunning".into(),
            ProtocolEventKind::DestinationRunning => "DestinationRunning".into(),
            ProtocolEventKind::ClientRunning => "ClientRunning".into(),
            ProtocolEventKind::SourceCommit => "SourceCommit".into(),
            ProtocolEventKind::MmeCommit => "mmeCommit".into(),
            ProtocolEventKind::DestinationCommit => "DestinationCommit".into(),
            ProtocolEventKind::AcceptsServerClient => "acceptsServerClient".into(),
            ProtocolEventKind::AcceptsServerDestination => "acceptsServerDestination".into(),
            ProtocolEventKind::TermDestination => "termDestination".into(),
            ProtocolEventKind::Reachable(r) => format!("{}Reachable", r.name()),
        }
    }
}

impl fmt::Display for ProtocolEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ProtocolEventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use ProtocolEventKind::*;
        let simple = [
            SourceRunning,
            MmeRunning,
            DestinationRunning,
            ClientRunning,
            SourceCommit,
            MmeCommit,
            DestinationCommit,
            AcceptsServerClient,
            AcceptsServerDestination,
            TermDestination,
        ];
        simple
            .into_iter()
            .chain(Role::ALL.into_iter().map(Reachable))
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown protocol event {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolEvent {
    pub kind: ProtocolEventKind,
    pub node: Option<NodeId>,
    pub value: [u8; 32],
    pub slot: Slot,
}
