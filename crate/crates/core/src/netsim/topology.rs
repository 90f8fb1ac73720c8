use std::collections::{BTreeMap, BTreeSet};

use crate::{NodeId, Scenario};

/// Node id of the MME. Never on the radio channel.
pub const MME_ID: NodeId = NodeId(0);
pub const SOURCE_ID: NodeId = NodeId(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Source,
    Relay,
    Destination,
    Mme,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub roles: BTreeMap<NodeId, NodeRole>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub coverage: BTreeSet<NodeId>,
    pub enodeb_count: u64,
}

impl Topology {
    /// Line `1 - 2 - ... - n`: node 1 is the source, node `n` the
    /// destination, everything between relays. Covered by the cellular
    /// network only in infrastructure scenarios.
    pub fn line(scenario: Scenario, n: usize, enodeb_count: u64) -> Self {
        let n = n as u8;
        let mut roles = BTreeMap::new();
        let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for i in 1..=n {
            let role = match i {
                1 => NodeRole::Source,
                i if i == n => NodeRole::Destination,
                _ => NodeRole::Relay,
            };
            roles.insert(NodeId(i), role);
            if i > 1 {
                adjacency.entry(NodeId(i)).or_default().insert(NodeId(i - 1));
                adjacency.entry(NodeId(i - 1)).or_default().insert(NodeId(i));
            }
        }
        let mut coverage = BTreeSet::new();
        if scenario.has_infrastructure() {
            roles.insert(MME_ID, NodeRole::Mme);
            coverage.extend(roles.keys().copied());
        }
        Self { roles, adjacency, coverage, enodeb_count }
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    pub fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn role(&self, id: NodeId) -> Option<NodeRole> {
        self.roles.get(&id).copied()
    }

    pub fn destination(&self) -> NodeId {
        self.with_role(NodeRole::Destination).next().expect("line has a destination")
    }

    pub fn with_role(&self, role: NodeRole) -> impl Iterator<Item = NodeId> + '_ {
        self.roles.iter().filter(move |(_, r)| **r == role).map(|(id, _)| *id)
    }

    /// Every node on the radio channel.
    pub fn radio_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.roles.iter().filter(|(_, r)| **r != NodeRole::Mme).map(|(id, _)| *id)
    }

    /// Breadth-first reachability between two radio nodes.
    pub fn connected(&self, a: NodeId, b: NodeId) -> bool {
        let mut seen = BTreeSet::from([a]);
        let mut frontier = vec![a];
        while let Some(x) = frontier.pop() {
            if x == b {
                return true;
            }
            for y in self.neighbors(x) {
                if seen.insert(y) {
                    frontier.push(y);
                }
            }
        }
        false
    }
}
