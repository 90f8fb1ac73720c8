//! Scenario configuration and adversary scripts.
//!
//! Text format, one `key = value` per line, `#` starts a comment:
//!
//! ```text
//! scenario = RD2D
//! n = 5
//! seed = 7
//! T = 32
//! T_prime = 10
//! M = 1
//! B = 2
//! W = 2
//! tesla_L = 36
//! tesla_interval = 1
//! adv: * eavesdrop_all
//! adv: 4 tamper request@2 300
//! adv: hook disable_replay_protection
//! ```
//!
//! Adversary lines are `adv: <slot|*> <action>` or `adv: hook <name>`:
//!
//! * `drop <kind>[@node]` discards matching transmissions sent in the slot.
//! * `tamper <kind>[@node] <bit>` flips bit `bit` (0 = MSB of the first
//!   byte) of matching transmissions.
//! * `replay <index>` retransmits the `index`-th observed transmission to
//!   every node.
//! * `inject <hex>` transmits raw bytes to every node.
//! * `eavesdrop_all` records all radio traffic into attacker knowledge.
//!
//! `<kind>` is `request`, `reply`, `disclosure` or `any`.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::roles::DEFAULT_FRESHNESS_WINDOW;
use crate::wire::{PacketKind, MAX_HOPS};
use crate::{NodeId, Scenario, Slot};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("missing key {0:?}")]
    MissingKey(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SlotSpec {
    At(Slot),
    Every,
}

impl SlotSpec {
    pub fn matches(self, slot: Slot) -> bool {
        match self {
            SlotSpec::At(s) => s == slot,
            SlotSpec::Every => true,
        }
    }
}

/// Selects transmissions by packet kind and sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketMatch {
    pub kind: Option<PacketKind>,
    pub from: Option<NodeId>,
}

impl PacketMatch {
    pub fn matches(&self, kind: Option<PacketKind>, from: NodeId) -> bool {
        self.kind.is_none_or(|k| Some(k) == kind) && self.from.is_none_or(|f| f == from)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdvAction {
    Drop(PacketMatch),
    Tamper(PacketMatch, usize),
    Replay(usize),
    Inject(Vec<u8>),
    EavesdropAll,
}

/// Fault-injection switches used to show the property checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Hook {
    /// Honest nodes accept repeated packet ids.
    DisableReplayProtection,
    /// The adversary learns every session and pre-shared key.
    LeakSessionKey,
    /// The MME gives the destination a key different from the source's.
    MmeDistinctKeys,
    /// Nodes try to release the TESLA key they just used.
    EarlyDisclosure,
}

impl Hook {
    pub const ALL: [Hook; 4] =
        [Hook::DisableReplayProtection, Hook::LeakSessionKey, Hook::MmeDistinctKeys, Hook::EarlyDisclosure];

    pub fn name(self) -> &'static str {
        match self {
            Hook::DisableReplayProtection => "disable_replay_protection",
            Hook::LeakSessionKey => "leak_session_key",
            Hook::MmeDistinctKeys => "mme_distinct_keys",
            Hook::EarlyDisclosure => "early_disclosure",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdversaryScript {
    pub actions: Vec<(SlotSpec, AdvAction)>,
    pub hooks: BTreeSet<Hook>,
}

impl AdversaryScript {
    pub fn eavesdrops(&self) -> bool {
        self.actions.iter().any(|(_, a)| *a == AdvAction::EavesdropAll)
    }

    pub fn has_hook(&self, hook: Hook) -> bool {
        self.hooks.contains(&hook)
    }

    pub fn push(&mut self, slot: SlotSpec, action: AdvAction) -> &mut Self {
        self.actions.push((slot, action));
        self
    }

    /// Last slot named explicitly by an action.
    pub fn last_slot(&self) -> Option<Slot> {
        self.actions
            .iter()
            .filter_map(|(s, _)| match s {
                SlotSpec::At(s) => Some(*s),
                SlotSpec::Every => None,
            })
            .max()
    }

    fn parse_line(&mut self, body: &str) -> Result<(), String> {
        let words: Vec<&str> = body.split_whitespace().collect();
        match words.as_slice() {
            ["hook", name] => {
                let hook = Hook::ALL.into_iter().find(|h| h.name() == *name).ok_or(format!("unknown hook {name:?}"))?;
                self.hooks.insert(hook);
            }
            ["eavesdrop_all"] => {
                self.actions.push((SlotSpec::Every, AdvAction::EavesdropAll));
            }
            [slot, action, args @ ..] => {
                let slot = match *slot {
                    "*" => SlotSpec::Every,
                    s => SlotSpec::At(s.parse().map_err(|_| format!("bad slot {s:?}"))?),
                };
                let action = match (*action, args) {
                    ("drop", [m]) => AdvAction::Drop(parse_match(m)?),
                    ("tamper", [m, bit]) => {
                        AdvAction::Tamper(parse_match(m)?, bit.parse().map_err(|_| format!("bad bit index {bit:?}"))?)
                    }
                    ("replay", [i]) => AdvAction::Replay(i.parse().map_err(|_| format!("bad replay index {i:?}"))?),
                    ("inject", [h]) => AdvAction::Inject(hex::decode(h).map_err(|_| format!("bad hex {h:?}"))?),
                    ("eavesdrop_all", []) => AdvAction::EavesdropAll,
                    _ => return Err(format!("unrecognised action {:?}", words[1..].join(" "))),
                };
                self.actions.push((slot, action));
            }
            _ => return Err("empty adversary line".into()),
        }
        Ok(())
    }
}

fn parse_match(s: &str) -> Result<PacketMatch, String> {
    let (kind, from) = match s.split_once('@') {
        Some((k, n)) => (k, Some(NodeId(n.parse().map_err(|_| format!("bad node {n:?}"))?))),
        None => (s, None),
    };
    let kind = match kind {
        "any" => None,
        "request" => Some(PacketKind::Request),
        "reply" => Some(PacketKind::Reply),
        "disclosure" => Some(PacketKind::Disclosure),
        k => return Err(format!("unknown packet kind {k:?}")),
    };
    Ok(PacketMatch { kind, from })
}

fn fmt_match(m: &PacketMatch) -> String {
    let kind = m.kind.map_or("any", PacketKind::name);
    match m.from {
        Some(n) => format!("{kind}@{n}"),
        None => kind.to_owned(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Source, relays and destination.
    pub n: usize,
    pub seed: u64,
    /// `T`: total slots simulated.
    pub t_total: u64,
    /// `T'`: request slots. Used by the overhead model only.
    pub t_prime: u64,
    /// Requests per slot. Used by the overhead model only.
    pub m: u64,
    /// eNodeB count. Used by the overhead model only.
    pub b: u64,
    pub window: u64,
    pub tesla_l: u64,
    pub tesla_interval: u64,
    pub adversary: AdversaryScript,
}

impl ScenarioConfig {
    /// Passive-eavesdropper configuration with enough slots and chain
    /// length for one session to complete.
    pub fn honest(scenario: Scenario, n: usize, seed: u64) -> Self {
        let t_total = 4 * n as u64 + 12;
        let mut adversary = AdversaryScript::default();
        adversary.push(SlotSpec::Every, AdvAction::EavesdropAll);
        Self {
            scenario,
            n,
            seed,
            t_total,
            t_prime: 1,
            m: 1,
            b: 1,
            window: DEFAULT_FRESHNESS_WINDOW,
            tesla_l: t_total + 4,
            tesla_interval: 1,
            adversary,
        }
    }

    pub fn with_action(mut self, slot: SlotSpec, action: AdvAction) -> Self {
        self.adversary.push(slot, action);
        self
    }

    pub fn with_hook(mut self, hook: Hook) -> Self {
        self.adversary.hooks.insert(hook);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n < 2 {
            return bad(format!("n = {} but at least source and destination are needed", self.n));
        }
        if self.n > MAX_HOPS + 2 {
            return bad(format!("n = {} exceeds the {} hop limit", self.n, MAX_HOPS));
        }
        if self.scenario.is_relayed() && self.n < 3 {
            return bad(format!("{} needs at least one relay (n >= 3)", self.scenario));
        }
        if !self.scenario.is_relayed() && self.n != 2 {
            return bad(format!("{} is direct and needs n = 2", self.scenario));
        }
        if self.t_prime < 1 || self.t_total < self.t_prime {
            return bad(format!("need T >= T' >= 1, got T = {}, T' = {}", self.t_total, self.t_prime));
        }
        if self.m < 1 || self.b < 1 {
            return bad("M and B must be at least 1".into());
        }
        if self.tesla_l < 1 || self.tesla_interval < 1 {
            return bad("tesla_L and tesla_interval must be at least 1".into());
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut scenario = None;
        let mut fields: [Option<u64>; 9] = [None; 9];
        const KEYS: [&str; 9] = ["n", "seed", "T", "T_prime", "M", "B", "W", "tesla_L", "tesla_interval"];
        let mut adversary = AdversaryScript::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |msg: String| ConfigError::Syntax { line: i + 1, msg };
            if let Some(body) = line.strip_prefix("adv:") {
                adversary.parse_line(body).map_err(syntax)?;
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "scenario" {
                scenario = Some(Scenario::from_str(value).map_err(|e| syntax(e.to_string()))?);
                continue;
            }
            let idx = KEYS.iter().position(|k| *k == key).ok_or_else(|| ConfigError::UnknownKey(key.to_owned()))?;
            fields[idx] = Some(value.parse().map_err(|_| syntax(format!("{key} must be a non-negative integer")))?);
        }
        let scenario = scenario.ok_or(ConfigError::MissingKey("scenario"))?;
        let n = fields[0].ok_or(ConfigError::MissingKey("n"))? as usize;
        let seed = fields[1].ok_or(ConfigError::MissingKey("seed"))?;
        let mut cfg = Self::honest(scenario, n, seed);
        cfg.adversary = adversary;
        let targets: [&mut u64; 7] = [
            &mut cfg.t_total,
            &mut cfg.t_prime,
            &mut cfg.m,
            &mut cfg.b,
            &mut cfg.window,
            &mut cfg.tesla_l,
            &mut cfg.tesla_interval,
        ];
        for (slot, value) in targets.into_iter().zip(&fields[2..]) {
            if let Some(v) = value {
                *slot = *v;
            }
        }
        if fields[2].is_some() && fields[7].is_none() {
            cfg.tesla_l = cfg.t_total + 4;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        writeln!(s, "scenario = {}", self.scenario)?;
        writeln!(s, "n = {}", self.n)?;
        writeln!(s, "seed = {}", self.seed)?;
        writeln!(s, "T = {}", self.t_total)?;
        writeln!(s, "T_prime = {}", self.t_prime)?;
        writeln!(s, "M = {}", self.m)?;
        writeln!(s, "B = {}", self.b)?;
        writeln!(s, "W = {}", self.window)?;
        writeln!(s, "tesla_L = {}", self.tesla_l)?;
        writeln!(s, "tesla_interval = {}", self.tesla_interval)?;
        for (slot, action) in &self.adversary.actions {
            let slot = match slot {
                SlotSpec::At(s) => s.to_string(),
                SlotSpec::Every => "*".to_owned(),
            };
            let action = match action {
                AdvAction::Drop(m) => format!("drop {}", fmt_match(m)),
                AdvAction::Tamper(m, bit) => format!("tamper {} {bit}", fmt_match(m)),
                AdvAction::Replay(i) => format!("replay {i}"),
                AdvAction::Inject(b) => format!("inject {}", hex::encode(b)),
                AdvAction::EavesdropAll => "eavesdrop_all".to_owned(),
            };
            writeln!(s, "adv: {slot} {action}")?;
        }
        for hook in &self.adversary.hooks {
            writeln!(s, "adv: hook {}", hook.name())?;
        }
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parse_round_trip() {
        let cfg = ScenarioConfig::honest(Scenario::Rd2d, 5, 9)
            .with_action(
                SlotSpec::At(4),
                AdvAction::Tamper(PacketMatch { kind: Some(PacketKind::Request), from: Some(NodeId(2)) }, 300),
            )
            .with_action(SlotSpec::Every, AdvAction::Drop(PacketMatch { kind: None, from: None }))
            .with_action(SlotSpec::At(6), AdvAction::Replay(0))
            .with_action(SlotSpec::At(7), AdvAction::Inject(vec![0x10, 0xff]))
            .with_hook(Hook::EarlyDisclosure);
        assert_eq!(ScenarioConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = ScenarioConfig::parse("scenario = dd2d\nn = 2\nseed = 1 # comment\n").unwrap();
        assert_eq!(cfg.t_total, 20);
        assert_eq!(cfg.tesla_l, 24);
        assert_eq!(cfg.window, 2);
        assert!(!cfg.adversary.eavesdrops());
        let cfg = ScenarioConfig::parse("scenario = DD2D\nn = 2\nseed = 1\nT = 50\n").unwrap();
        assert_eq!(cfg.tesla_l, 54);
    }

    #[test]
    fn errors() {
        assert_eq!(ScenarioConfig::parse("n = 2\nseed = 1"), Err(ConfigError::MissingKey("scenario")));
        assert_eq!(
            ScenarioConfig::parse("scenario = DD2D\nn = 2\nseed = 1\ncolour = red"),
            Err(ConfigError::UnknownKey("colour".into()))
        );
        assert!(matches!(
            ScenarioConfig::parse("scenario = DD2D\nn = 2\nseed = x"),
            Err(ConfigError::Syntax { line: 3, .. })
        ));
        assert!(matches!(ScenarioConfig::parse("scenario = DD2D\nn = 5\nseed = 1"), Err(ConfigError::Invalid(_))));
        assert!(matches!(ScenarioConfig::parse("scenario = RD2D\nn = 2\nseed = 1"), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            ScenarioConfig::parse("scenario = RD2D\nn = 4\nseed = 1\nT = 3\nT_prime = 5"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ScenarioConfig::parse("scenario = RD2D\nn = 4\nseed = 1\nadv: 3 teleport"),
            Err(ConfigError::Syntax { line: 4, .. })
        ));
        assert!(matches!(
            ScenarioConfig::parse("scenario = RD2D\nn = 4\nseed = 1\nadv: hook nope"),
            Err(ConfigError::Syntax { .. })
        ));
    }

    #[test]
    fn matches() {
        let m = parse_match("reply@3").unwrap();
        assert!(m.matches(Some(PacketKind::Reply), NodeId(3)));
        assert!(!m.matches(Some(PacketKind::Reply), NodeId(2)));
        assert!(!m.matches(Some(PacketKind::Request), NodeId(3)));
        assert!(parse_match("any").unwrap().matches(None, NodeId(1)));
    }
}
