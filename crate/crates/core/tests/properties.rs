use d2d::netsim::{self, AdvAction, EventTrace, Hook, PacketMatch, ScenarioConfig, SlotSpec};
use d2d::properties::{
    check_correspondence, check_key_agreement, check_reachability, check_secrecy, run_all_checks,
    ProtocolEventKind as K, Role,
};
use d2d::Scenario;

fn sizes(s: Scenario) -> Vec<usize> {
    if s.is_relayed() {
        vec![3, 5, 10]
    } else {
        vec![2]
    }
}

#[test]
fn honest_traces_pass_every_check() {
    for s in Scenario::ALL {
        for n in sizes(s) {
            let r = netsim::run(&ScenarioConfig::honest(s, n, 21)).unwrap();
            for c in run_all_checks(&r.trace).unwrap() {
                assert!(c.holds, "{c} at n={n}");
            }
        }
    }
}

#[test]
fn checks_survive_the_text_log() {
    let r = netsim::run(&ScenarioConfig::honest(Scenario::Rd2d, 5, 4)).unwrap();
    let parsed = EventTrace::parse(&r.trace.to_log()).unwrap();
    assert_eq!(run_all_checks(&parsed).unwrap(), run_all_checks(&r.trace).unwrap());
}

#[test]
fn relays_authenticated_one_way_and_never_commit() {
    let r = netsim::run(&ScenarioConfig::honest(Scenario::Rd2d, 5, 8)).unwrap();
    let events = r.trace.protocol_events();
    let accepts: Vec<_> = events.iter().filter(|e| e.kind == K::AcceptsServerClient).collect();
    assert_eq!(accepts.len(), 3);
    assert!(check_correspondence(&r.trace, K::AcceptsServerClient, K::ClientRunning, true));
    let commits_by_relays = events
        .iter()
        .filter(|e| e.node.is_some() && matches!(e.kind, K::SourceCommit | K::DestinationCommit | K::MmeCommit));
    assert_eq!(commits_by_relays.count(), 0);
    assert!(check_key_agreement(&r.trace));
}

#[test]
fn dropping_everything_makes_destination_unreachable() {
    let cfg = ScenarioConfig::honest(Scenario::Rd2d, 4, 1)
        .with_action(SlotSpec::Every, AdvAction::Drop(PacketMatch { kind: None, from: None }));
    let r = netsim::run(&cfg).unwrap();
    assert!(!check_reachability(&r.trace, Role::Destination));
    assert!(!check_reachability(&r.trace, Role::Source));
    assert!(check_reachability(&r.trace, Role::Mme));
}

#[test]
fn disabled_replay_protection_breaks_injectivity() {
    for s in [Scenario::Dd2d, Scenario::Dd2dw] {
        let honest = netsim::run(&ScenarioConfig::honest(s, 2, 3)).unwrap();
        let slot = honest.transmissions[0].slot + 1;
        let cfg = ScenarioConfig::honest(s, 2, 3)
            .with_hook(Hook::DisableReplayProtection)
            .with_action(SlotSpec::At(slot), AdvAction::Replay(0));
        let r = netsim::run(&cfg).unwrap();
        assert!(check_correspondence(&r.trace, K::DestinationCommit, K::SourceRunning, false), "{s}");
        assert!(!check_correspondence(&r.trace, K::DestinationCommit, K::SourceRunning, true), "{s}");
        // with protection on, the same replay changes nothing
        let guarded = ScenarioConfig::honest(s, 2, 3).with_action(SlotSpec::At(slot), AdvAction::Replay(0));
        let r = netsim::run(&guarded).unwrap();
        assert!(check_correspondence(&r.trace, K::DestinationCommit, K::SourceRunning, true), "{s}");
    }
}

#[test]
fn leaked_key_breaks_secrecy() {
    let r = netsim::run(&ScenarioConfig::honest(Scenario::Rd2d, 4, 3).with_hook(Hook::LeakSessionKey)).unwrap();
    assert!(!check_secrecy(&r.trace, &r.message));
}

#[test]
fn secret_never_sent_stays_secret() {
    let r = netsim::run(&ScenarioConfig::honest(Scenario::Dd2d, 2, 3).with_hook(Hook::LeakSessionKey)).unwrap();
    assert!(check_secrecy(&r.trace, &[0xee; 32]));
}

#[test]
fn distinct_mme_keys_break_key_agreement() {
    for (s, n) in [(Scenario::Dd2d, 2), (Scenario::Rd2d, 4)] {
        let r = netsim::run(&ScenarioConfig::honest(s, n, 3).with_hook(Hook::MmeDistinctKeys)).unwrap();
        assert!(!check_key_agreement(&r.trace), "{s}");
    }
}
