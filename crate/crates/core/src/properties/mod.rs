//! Trace-level security checks: reachability, correspondence, secrecy and
//! key agreement.
//!
//! These are necessary conditions evaluated over one simulated run, not
//! symbolic proofs.

mod event;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use event::{ProtocolEvent, ProtocolEventKind, Role};

use crate::netsim::EventTrace;
use crate::Scenario;

use ProtocolEventKind as K;

/// True iff `Reachable(role)` occurs.
pub fn check_reachability(trace: &EventTrace, role: Role) -> bool {
    trace.protocol_events().iter().any(|e| e.kind == K::Reachable(role))
}

/// Every `commit` event must be preceded by a `running` event with the same
/// value and node. With `injective`, distinct commits need distinct
/// running events.
pub fn check_correspondence(
    trace: &EventTrace,
    commit: ProtocolEventKind,
    running: ProtocolEventKind,
    injective: bool,
) -> bool {
    let events = trace.protocol_events();
    let commits: Vec<usize> = (0..events.len()).filter(|&i| events[i].kind == commit).collect();
    let candidates: Vec<Vec<usize>> = commits
        .iter()
        .map(|&c| {
            (0..c)
                .filter(|&r| {
                    events[r].kind == running && events[r].value == events[c].value && events[r].node == events[c].node
                })
                .collect()
        })
        .collect();
    if !injective {
        return candidates.iter().all(|c| !c.is_empty());
    }
    max_matching(&candidates) == commits.len()
}

/// Kuhn's augmenting-path bipartite matching. `adj[i]` lists the right-hand
/// vertices left vertex `i` may take.
fn max_matching(adj: &[Vec<usize>]) -> usize {
    fn augment(i: usize, adj: &[Vec<usize>], owner: &mut BTreeMap<usize, usize>, visited: &mut Vec<usize>) -> bool {
        for &r in &adj[i] {
            if visited.contains(&r) {
                continue;
            }
            visited.push(r);
            let free = match owner.get(&r) {
                None => true,
                Some(&other) => augment(other, adj, owner, visited),
            };
            if free {
                owner.insert(r, i);
                return true;
            }
        }
        false
    }
    let mut owner = BTreeMap::new();
    (0..adj.len()).filter(|&i| augment(i, adj, &mut owner, &mut Vec::new())).count()
}

/// True iff `secret` is not in the adversary's final knowledge closure.
pub fn check_secrecy(trace: &EventTrace, secret: &[u8]) -> bool {
    !trace.attacker_knowledge().contains(secret)
}

/// Source, destination and MME commits all occur and carry one key.
/// Without infrastructure there is no MME and only the two endpoints count.
pub fn check_key_agreement(trace: &EventTrace) -> bool {
    let events = trace.protocol_events();
    let mut required = vec![K::SourceCommit, K::DestinationCommit];
    if trace.scenario().is_none_or(Scenario::has_infrastructure) {
        required.push(K::MmeCommit);
    }
    let mut values = Vec::new();
    for kind in required {
        let mut found = events.iter().filter(|e| e.kind == kind).map(|e| e.value).peekable();
        if found.peek().is_none() {
            return false;
        }
        values.extend(found);
    }
    values.windows(2).all(|w| w[0] == w[1])
}

/// Roles whose reachability is checked in `scenario`.
pub fn present_roles(scenario: Scenario) -> Vec<Role> {
    let mut roles = vec![Role::Source, Role::Destination];
    if scenario.is_relayed() {
        roles.push(Role::Relay);
    }
    if scenario.has_infrastructure() {
        roles.push(Role::Mme);
    }
    roles
}

/// `(commit, running)` pairs checked in `scenario`.
pub fn correspondence_pairs(scenario: Scenario) -> Vec<(ProtocolEventKind, ProtocolEventKind)> {
    let mut pairs = vec![
        (K::DestinationCommit, K::SourceRunning),
        (K::SourceCommit, K::DestinationRunning),
        (K::AcceptsServerDestination, K::DestinationRunning),
        (K::TermDestination, K::SourceRunning),
    ];
    if scenario.has_infrastructure() {
        pairs.extend([
            (K::SourceCommit, K::MmeRunning),
            (K::MmeCommit, K::SourceRunning),
            (K::DestinationCommit, K::MmeRunning),
        ]);
    }
    if scenario.is_relayed() {
        pairs.push((K::AcceptsServerClient, K::ClientRunning));
    }
    pairs
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: String,
    pub scenario: Scenario,
    pub holds: bool,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CHECK {} {} {}", self.name, self.scenario, self.holds)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error("trace has no scenario line")]
    MissingScenario,
    #[error("trace has no secret line")]
    MissingSecret,
}

/// Every check that applies to the trace's scenario.
pub fn run_all_checks(trace: &EventTrace) -> Result<Vec<CheckResult>, PropertyError> {
    let scenario = trace.scenario().ok_or(PropertyError::MissingScenario)?;
    let secret = trace.secret().ok_or(PropertyError::MissingSecret)?;
    let mut out = Vec::new();
    let mut push = |name: String, holds: bool| out.push(CheckResult { name, scenario, holds });
    for role in present_roles(scenario) {
        push(format!("reachability.{role}"), check_reachability(trace, role));
    }
    for (commit, running) in correspondence_pairs(scenario) {
        push(format!("correspondence.{commit}=>{running}"), check_correspondence(trace, commit, running, false));
        push(format!("injective.{commit}=>{running}"), check_correspondence(trace, commit, running, true));
    }
    push("secrecy.m".into(), check_secrecy(trace, &secret));
    if scenario.has_infrastructure() {
        push("key_agreement".into(), check_key_agreement(trace));
    }
    Ok(out)
}

/// Fixed-width table of results, one row per check.
pub fn summary_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<width$}  {:<8}  result\n", "check", "scenario");
    for r in results {
        s.push_str(&format!("{:<width$}  {:<8}  {}\n", r.name, r.scenario.name(), r.holds));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::SimEventKind;
    use crate::NodeId;

    fn trace(events: &[(ProtocolEventKind, Option<u8>, u8)]) -> EventTrace {
        let mut t = EventTrace::new();
        t.push(0, SimEventKind::Scenario, None, "RD2D");
        for (i, &(kind, node, v)) in events.iter().enumerate() {
            t.push(i as u64, SimEventKind::Protocol(kind), node.map(NodeId), [v; 32]);
        }
        t
    }

    #[test]
    fn empty_trace() {
        let t = EventTrace::new();
        assert!(!check_reachability(&t, Role::Source));
        assert!(check_correspondence(&t, K::SourceCommit, K::MmeRunning, true));
        assert!(check_secrecy(&t, &[1; 32]));
        assert!(!check_key_agreement(&t));
    }

    #[test]
    fn correspondence_needs_earlier_matching_value() {
        let ok = trace(&[(K::MmeRunning, None, 1), (K::SourceCommit, None, 1)]);
        assert!(check_correspondence(&ok, K::SourceCommit, K::MmeRunning, false));
        let late = trace(&[(K::SourceCommit, None, 1), (K::MmeRunning, None, 1)]);
        assert!(!check_correspondence(&late, K::SourceCommit, K::MmeRunning, false));
        let other = trace(&[(K::MmeRunning, None, 2), (K::SourceCommit, None, 1)]);
        assert!(!check_correspondence(&other, K::SourceCommit, K::MmeRunning, false));
    }

    #[test]
    fn injective_needs_one_running_per_commit() {
        let t = trace(&[(K::SourceRunning, None, 1), (K::DestinationCommit, None, 1), (K::DestinationCommit, None, 1)]);
        assert!(check_correspondence(&t, K::DestinationCommit, K::SourceRunning, false));
        assert!(!check_correspondence(&t, K::DestinationCommit, K::SourceRunning, true));
        let two = trace(&[
            (K::SourceRunning, None, 1),
            (K::DestinationCommit, None, 1),
            (K::SourceRunning, None, 1),
            (K::DestinationCommit, None, 1),
        ]);
        assert!(check_correspondence(&two, K::DestinationCommit, K::SourceRunning, true));
    }

    #[test]
    fn matching_reassigns_when_greedy_choice_blocks() {
        // left 0 may use {0, 1}, left 1 only {0}
        assert_eq!(max_matching(&[vec![0, 1], vec![0]]), 2);
        assert_eq!(max_matching(&[vec![0], vec![0]]), 1);
    }

    #[test]
    fn relay_events_match_on_node() {
        let t = trace(&[(K::ClientRunning, Some(2), 5), (K::AcceptsServerClient, Some(3), 5)]);
        assert!(!check_correspondence(&t, K::AcceptsServerClient, K::ClientRunning, false));
        let t = trace(&[(K::ClientRunning, Some(2), 5), (K::AcceptsServerClient, Some(2), 5)]);
        assert!(check_correspondence(&t, K::AcceptsServerClient, K::ClientRunning, true));
    }

    #[test]
    fn key_agreement_requires_one_value() {
        let same = trace(&[(K::MmeCommit, None, 4), (K::DestinationCommit, None, 4), (K::SourceCommit, None, 4)]);
        assert!(check_key_agreement(&same));
        let split = trace(&[(K::MmeCommit, None, 4), (K::DestinationCommit, None, 5), (K::SourceCommit, None, 4)]);
        assert!(!check_key_agreement(&split));
        let missing = trace(&[(K::DestinationCommit, None, 4), (K::SourceCommit, None, 4)]);
        assert!(!check_key_agreement(&missing));
    }

    #[test]
    fn check_line_format() {
        let r = CheckResult { name: "secrecy.m".into(), scenario: Scenario::Dd2dw, holds: true };
        assert_eq!(r.to_string(), "CHECK secrecy.m DD2DW true");
    }
}
