//! Deterministic slotted simulator.
//!
//! Nodes sit on a line `S - R1 - ... - D`. Every radio transmission reaches
//! the sender's neighbours one slot later and may be dropped, altered,
//! replayed or supplemented by the scripted adversary. The cellular channel
//! to the MME also takes one slot and is invisible to the adversary.
//!
//! A run carries one session:
//!
//! 1. with coverage, the source asks the MME for `K` and sends its request
//!    once the key arrives; without coverage it sends at slot 0 using the
//!    pre-shared key;
//! 2. relays extend and rebroadcast the request;
//! 3. the destination fetches `K` from the MME (or waits for the source's
//!    TESLA key), validates, and replies;
//! 4. relays append their TESLA keys to the reply on the way back;
//! 5. the source verifies and accepts.
//!
//! All randomness comes from one ChaCha stream seeded by the config, so a
//! config fully determines the trace.

mod config;
mod knowledge;
mod topology;
mod trace;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub use config::{AdvAction, AdversaryScript, ConfigError, Hook, PacketMatch, ScenarioConfig, SlotSpec};
pub use knowledge::AttackerKnowledge;
pub use topology::{NodeRole, Topology, MME_ID, SOURCE_ID};
pub use trace::{EventTrace, SimEvent, SimEventKind, TraceParseError, TRACE_HEADER};

use crate::crypto::{Crypto, KeyKind, Nonce, Stage, StageCounters, SymKey, BLOCK_LEN};
use crate::properties::ProtocolEvent;
use crate::roles::{
    DestinationOutput, DestinationState, KeyStore, MmeState, RelayState, ReplyOutcome, RoleCtx, RoleError, SourceState,
    TeslaSender,
};
use crate::tesla::{TeslaChain, TeslaCommitment};
use crate::wire::{Packet, PacketKind, WireError};
use crate::{NodeId, Slot};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    ConfigInvalid(#[from] ConfigError),
    #[error("no cellular coverage between {from} and {to}")]
    NoCoverage { from: NodeId, to: NodeId },
}

/// Messages on the secure cellular channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellularMessage {
    KeyRequest { src: NodeId, dst: NodeId },
    KeyForSource(SymKey),
    KeyQuery { dst: NodeId, src: NodeId },
    KeyForDestination { src: NodeId, key: SymKey },
    Denied { about: NodeId, reason: RoleError },
}

impl CellularMessage {
    pub fn label(&self) -> &'static str {
        match self {
            CellularMessage::KeyRequest { .. } => "key_request",
            CellularMessage::KeyForSource(_) => "key_for_source",
            CellularMessage::KeyQuery { .. } => "key_query",
            CellularMessage::KeyForDestination { .. } => "key_for_destination",
            CellularMessage::Denied { .. } => "denied",
        }
    }
}

/// One honest radio transmission, as sent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub slot: Slot,
    pub from: NodeId,
    pub bytes: Vec<u8>,
    pub packet: Packet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Role(RoleError),
    Malformed(WireError),
    /// The MME refused a key request.
    Denied(RoleError),
}

impl RejectReason {
    pub fn label(&self) -> String {
        match self {
            RejectReason::Role(e) => e.label().to_owned(),
            RejectReason::Malformed(_) => "Malformed".to_owned(),
            RejectReason::Denied(e) => format!("Denied:{}", e.label()),
        }
    }

    pub fn role_error(&self) -> Option<&RoleError> {
        match self {
            RejectReason::Role(e) | RejectReason::Denied(e) => Some(e),
            RejectReason::Malformed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub slot: Slot,
    pub node: NodeId,
    pub reason: RejectReason,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub trace: EventTrace,
    pub counters: StageCounters,
    pub source_accepted: bool,
    /// The secret `m`.
    pub message: [u8; BLOCK_LEN],
    /// First plaintext the destination released.
    pub delivered: Option<[u8; BLOCK_LEN]>,
    pub session_key: Option<SymKey>,
    pub rejections: Vec<Rejection>,
    pub transmissions: Vec<Transmission>,
    pub d2d_messages: usize,
    pub cellular_messages: usize,
    pub commitments: Vec<TeslaCommitment>,
}

impl RunResult {
    pub fn rejected_with(&self, pred: impl Fn(&RoleError) -> bool) -> bool {
        self.rejections.iter().any(|r| r.reason.role_error().is_some_and(&pred))
    }

    /// Honest transmissions decoded, in send order.
    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.transmissions.iter().map(|t| &t.packet)
    }
}

#[derive(Debug, Clone)]
enum Delivery {
    Radio { to: NodeId, bytes: Vec<u8> },
    Cellular { to: NodeId, msg: CellularMessage },
}

/// Runs `body` against a role with a fresh context and records the
/// protocol events it emitted.
macro_rules! call_role {
    ($self:ident, $stage:expr, |$ctx:ident| $body:expr) => {{
        let mut events = Vec::new();
        let now = $self.now;
        let out = {
            let mut $ctx = RoleCtx::new(&$self.crypto, now, &mut events);
            let crypto = &$self.crypto;
            crypto.in_stage($stage, || $body)
        };
        $self.record_events(events);
        out
    }};
}

pub struct Simulator {
    config: ScenarioConfig,
    topology: Topology,
    crypto: Crypto,
    rng: ChaCha20Rng,
    now: Slot,
    trace: EventTrace,
    source: SourceState,
    destination: DestinationState,
    relays: BTreeMap<NodeId, RelayState>,
    mme: MmeState,
    queue: BTreeMap<Slot, Vec<Delivery>>,
    observed: Vec<Transmission>,
    knowledge: AttackerKnowledge,
    rejections: Vec<Rejection>,
    message: [u8; BLOCK_LEN],
    forwarded: BTreeSet<(NodeId, NodeId, u16)>,
    commitments: Vec<TeslaCommitment>,
    d2d_messages: usize,
    cellular_messages: usize,
}

impl Simulator {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let scenario = config.scenario;
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let topology = Topology::line(scenario, config.n, config.b);
        let crypto = Crypto::new();
        let message: [u8; BLOCK_LEN] = rng.gen();
        let preshared = SymKey::new(rng.gen(), KeyKind::Preshared);

        let mut chains = BTreeMap::new();
        for id in topology.radio_nodes() {
            let chain = TeslaChain::generate(&crypto, id, rng.gen(), config.tesla_l, config.tesla_interval, 0)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            chains.insert(id, chain);
        }
        let commitments: Vec<TeslaCommitment> = chains.values().map(TeslaChain::commitment).collect();
        let store = KeyStore::new(commitments.iter().copied());
        let dst = topology.destination();
        let sender = |id: NodeId| TeslaSender::new(chains[&id].clone());

        let mut source = SourceState::new(SOURCE_ID, dst, scenario, sender(SOURCE_ID), store.clone(), config.window);
        let mut destination = DestinationState::new(dst, scenario, sender(dst), store, config.window);
        let mut relays: BTreeMap<NodeId, RelayState> = topology
            .with_role(NodeRole::Relay)
            .map(|id| (id, RelayState::new(id, sender(id), config.window)))
            .collect();

        let mut mme = MmeState::new();
        for id in topology.radio_nodes() {
            mme.register(id);
        }
        if topology.connected(SOURCE_ID, dst) {
            mme.set_proximity(SOURCE_ID, dst);
        }

        let hooks = &config.adversary;
        let mut knowledge = AttackerKnowledge::new();
        if !scenario.has_infrastructure() {
            source.install_session_key(preshared);
            destination.install_preshared(SOURCE_ID, preshared);
            if hooks.has_hook(Hook::LeakSessionKey) {
                knowledge.learn(preshared.bytes);
            }
        }
        if hooks.has_hook(Hook::DisableReplayProtection) {
            destination.set_replay_protection(false);
            relays.values_mut().for_each(|r| r.set_replay_protection(false));
        }
        mme.set_distinct_keys(hooks.has_hook(Hook::MmeDistinctKeys));

        let mut trace = EventTrace::new();
        trace.push(0, SimEventKind::Scenario, None, scenario.name());
        trace.push(0, SimEventKind::Secret, None, message);

        Ok(Self {
            config,
            topology,
            crypto,
            rng,
            now: 0,
            trace,
            source,
            destination,
            relays,
            mme,
            queue: BTreeMap::new(),
            observed: Vec::new(),
            knowledge,
            rejections: Vec::new(),
            message,
            forwarded: BTreeSet::new(),
            commitments,
            d2d_messages: 0,
            cellular_messages: 0,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn trace(&self) -> &EventTrace {
        &self.trace
    }

    pub fn run(mut self) -> RunResult {
        for now in 0..=self.config.t_total {
            self.step(now);
        }
        for atom in self.knowledge.closure() {
            self.trace.push(self.now, SimEventKind::AttackerKnowledge, None, atom);
        }
        RunResult {
            source_accepted: self.source.phase() == crate::roles::SourcePhase::Accepted,
            delivered: self.destination.delivered().first().copied(),
            session_key: self.source.session_key(),
            counters: self.crypto.counters(),
            config: self.config,
            trace: self.trace,
            message: self.message,
            rejections: self.rejections,
            transmissions: self.observed,
            d2d_messages: self.d2d_messages,
            cellular_messages: self.cellular_messages,
            commitments: self.commitments,
        }
    }

    /// Advances to `now`: starts the session at slot 0, delivers what is
    /// due, lets the adversary transmit, and releases due TESLA keys.
    pub fn step(&mut self, now: Slot) {
        self.now = now;
        if now == 0 {
            if self.config.scenario.has_infrastructure() {
                let dst = self.topology.destination();
                self.cellular_send(SOURCE_ID, MME_ID, CellularMessage::KeyRequest { src: SOURCE_ID, dst })
                    .expect("infrastructure scenarios are covered");
            } else {
                self.source_send();
            }
        }
        for delivery in self.queue.remove(&now).unwrap_or_default() {
            match delivery {
                Delivery::Radio { to, bytes } => self.on_radio(to, bytes),
                Delivery::Cellular { to, msg } => self.on_cellular(to, msg),
            }
        }
        self.adversary_transmit();
        if !self.config.scenario.has_infrastructure() {
            let mut due = self.source.due_disclosures(now);
            let from_source = due.len();
            due.extend(self.destination.due_disclosures(now));
            let dst = self.topology.destination();
            for (i, d) in due.into_iter().enumerate() {
                let from = if i < from_source { SOURCE_ID } else { dst };
                self.broadcast(from, Packet::KeyDisclosure(d));
            }
        }
    }

    /// Sends `packet` from `from` to its neighbours, subject to the
    /// adversary. Returns the nodes that will receive it.
    pub fn broadcast(&mut self, from: NodeId, packet: Packet) -> Vec<NodeId> {
        let bytes = packet.encode().expect("roles only build encodable packets");
        self.trace.push(self.now, SimEventKind::Send, Some(from), bytes.clone());
        self.d2d_messages += 1;
        if self.config.adversary.eavesdrops() {
            self.knowledge.observe(&packet);
            self.trace.push(self.now, SimEventKind::AttackerKnowledgeUpdate, None, bytes.clone());
        }
        let kind = Some(packet.kind());
        self.observed.push(Transmission { slot: self.now, from, bytes: bytes.clone(), packet });

        let mut delivered = bytes.clone();
        let mut dropped = false;
        for (slot, action) in &self.config.adversary.actions {
            if !slot.matches(self.now) {
                continue;
            }
            match action {
                AdvAction::Drop(m) if m.matches(kind, from) => dropped = true,
                AdvAction::Tamper(m, bit) if m.matches(kind, from) && *bit < delivered.len() * 8 => {
                    delivered[bit / 8] ^= 0x80 >> (bit % 8);
                }
                _ => {}
            }
        }
        if dropped {
            self.trace.push(self.now, SimEventKind::Drop, Some(from), bytes);
            return Vec::new();
        }
        let targets: Vec<NodeId> = self.topology.neighbors(from).collect();
        for &to in &targets {
            self.schedule(Delivery::Radio { to, bytes: delivered.clone() });
        }
        targets
    }

    /// Secure point-to-point delivery to or from the MME.
    pub fn cellular_send(&mut self, from: NodeId, to: NodeId, msg: CellularMessage) -> Result<(), SimError> {
        let covered = |id| self.topology.coverage.contains(&id);
        if !self.config.scenario.has_infrastructure() || !covered(from) || !covered(to) {
            return Err(SimError::NoCoverage { from, to });
        }
        self.trace.push(self.now, SimEventKind::Cellular, Some(from), msg.label());
        self.cellular_messages += 1;
        self.schedule(Delivery::Cellular { to, msg });
        Ok(())
    }

    fn schedule(&mut self, d: Delivery) {
        self.queue.entry(self.now + 1).or_default().push(d);
    }

    fn record_events(&mut self, events: Vec<ProtocolEvent>) {
        for e in events {
            self.trace.push(e.slot, SimEventKind::Protocol(e.kind), e.node, e.value);
        }
    }

    fn note(&mut self, node: NodeId, text: &str) {
        self.trace.push(self.now, SimEventKind::StateTransition, Some(node), text);
    }

    fn reject(&mut self, node: NodeId, reason: RejectReason) {
        let label = reason.label();
        self.note(node, &format!("reject {label}"));
        if matches!(&reason, RejectReason::Role(e) if e.is_integrity_violation()) {
            self.trace.push(self.now, SimEventKind::IntruderAlert, Some(node), label);
        }
        self.rejections.push(Rejection { slot: self.now, node, reason });
    }

    fn adversary_transmit(&mut self) {
        let mut out = Vec::new();
        for (slot, action) in &self.config.adversary.actions {
            if !slot.matches(self.now) {
                continue;
            }
            match action {
                AdvAction::Replay(i) => {
                    if let Some(t) = self.observed.get(*i) {
                        out.push(t.bytes.clone());
                    }
                }
                AdvAction::Inject(bytes) => out.push(bytes.clone()),
                _ => {}
            }
        }
        let nodes: Vec<NodeId> = self.topology.radio_nodes().collect();
        for bytes in out {
            self.trace.push(self.now, SimEventKind::Send, None, bytes.clone());
            for &to in &nodes {
                self.schedule(Delivery::Radio { to, bytes: bytes.clone() });
            }
        }
    }

    fn source_send(&mut self) {
        let nonce = Nonce::new(self.rng.gen_range(0..=Nonce::MAX)).expect("in range");
        let r = call_role!(self, Stage::Exchange, |ctx| self.source.build_request(&mut ctx, &self.message, nonce));
        match r {
            Ok(req) => {
                self.note(SOURCE_ID, "request_sent");
                self.broadcast(SOURCE_ID, Packet::Request(req));
                if self.hook(Hook::EarlyDisclosure) && !self.config.scenario.has_infrastructure() {
                    if let Err(e) = self.source.disclose_current(self.now) {
                        self.reject(SOURCE_ID, RejectReason::Role(e));
                    }
                }
            }
            Err(e) => self.reject(SOURCE_ID, RejectReason::Role(e)),
        }
    }

    fn hook(&self, hook: Hook) -> bool {
        self.config.adversary.has_hook(hook)
    }

    fn on_radio(&mut self, to: NodeId, bytes: Vec<u8>) {
        self.trace.push(self.now, SimEventKind::Deliver, Some(to), bytes.clone());
        let packet = match Packet::decode(&bytes) {
            Ok(p) => p,
            Err(e) => return self.reject(to, RejectReason::Malformed(e)),
        };
        match (self.topology.role(to), packet.kind()) {
            (Some(NodeRole::Source), PacketKind::Reply) => {
                let r = call_role!(self, Stage::Acceptance, |ctx| self.source.on_reply(&mut ctx, &packet));
                self.after_source(r);
            }
            (Some(NodeRole::Source), PacketKind::Disclosure) => {
                let Packet::KeyDisclosure(d) = &packet else { unreachable!() };
                let r = call_role!(self, Stage::Acceptance, |ctx| self.source.on_disclosure(&mut ctx, d));
                self.after_source(r);
            }
            (Some(NodeRole::Relay), PacketKind::Request) => {
                let relay = self.relays.get_mut(&to).expect("relay state exists");
                let r = call_role!(self, Stage::Exchange, |ctx| relay.on_request(&mut ctx, &packet));
                match r {
                    Ok(Some(out)) => {
                        self.broadcast(to, Packet::RelayedRequest(out));
                        if self.hook(Hook::EarlyDisclosure) {
                            let now = self.now;
                            if let Err(e) = self.relays.get_mut(&to).expect("exists").disclose_current(now) {
                                self.reject(to, RejectReason::Role(e));
                            }
                        }
                    }
                    Ok(None) => {}
                    Err(e) => self.reject(to, RejectReason::Role(e)),
                }
            }
            (Some(NodeRole::Relay), PacketKind::Reply) => {
                let relay = self.relays.get_mut(&to).expect("relay state exists");
                let r = call_role!(self, Stage::Exchange, |ctx| relay.on_reply(&mut ctx, &packet));
                match r {
                    Ok(Some(out)) => {
                        self.broadcast(to, Packet::RelayedReply(out));
                    }
                    Ok(None) => {}
                    Err(e) => self.reject(to, RejectReason::Role(e)),
                }
            }
            (Some(NodeRole::Relay), PacketKind::Disclosure) => {
                let Packet::KeyDisclosure(d) = &packet else { unreachable!() };
                if self.forwarded.insert((to, d.owner, d.interval)) {
                    self.broadcast(to, packet);
                }
            }
            (Some(NodeRole::Destination), PacketKind::Request) => {
                let r = call_role!(self, Stage::Exchange, |ctx| self.destination.on_request(&mut ctx, &packet));
                self.after_destination(vec![r]);
            }
            (Some(NodeRole::Destination), PacketKind::Disclosure) => {
                let Packet::KeyDisclosure(d) = &packet else { unreachable!() };
                let r = call_role!(self, Stage::Exchange, |ctx| self.destination.on_disclosure(&mut ctx, d));
                match r {
                    Ok(outs) => self.after_destination(outs),
                    Err(e) => self.reject(to, RejectReason::Role(e)),
                }
            }
            _ => {}
        }
    }

    fn after_source(&mut self, r: Result<ReplyOutcome, RoleError>) {
        match r {
            Ok(ReplyOutcome::Accepted) => self.note(SOURCE_ID, "accept"),
            Ok(ReplyOutcome::AwaitingKey) => self.note(SOURCE_ID, "awaiting_key"),
            Ok(ReplyOutcome::Ignored) => {}
            Err(e) => self.reject(SOURCE_ID, RejectReason::Role(e)),
        }
    }

    fn after_destination(&mut self, outs: Vec<Result<DestinationOutput, RoleError>>) {
        let dst = self.topology.destination();
        for out in outs {
            match out {
                Ok(DestinationOutput::Reply(p)) => {
                    self.note(dst, "replied");
                    self.broadcast(dst, p);
                }
                Ok(DestinationOutput::NeedSessionKey(src)) => {
                    self.note(dst, "key_query");
                    if let Err(e) = self.cellular_send(dst, MME_ID, CellularMessage::KeyQuery { dst, src }) {
                        debug_assert!(false, "destination without coverage asked for a key: {e}");
                    }
                }
                Ok(DestinationOutput::Buffered) => self.note(dst, "buffered"),
                Ok(DestinationOutput::Ignored) => {}
                Err(e) => self.reject(dst, RejectReason::Role(e)),
            }
        }
    }

    fn on_cellular(&mut self, to: NodeId, msg: CellularMessage) {
        match msg {
            CellularMessage::KeyRequest { src, dst } => {
                let fresh: [u8; BLOCK_LEN] = self.rng.gen();
                let r =
                    call_role!(self, Stage::Exchange, |ctx| self.mme.handle_source_request(&mut ctx, src, dst, fresh));
                let reply = match r {
                    Ok(k) => {
                        if self.hook(Hook::LeakSessionKey) {
                            self.knowledge.learn(k.bytes);
                        }
                        CellularMessage::KeyForSource(k)
                    }
                    Err(e) => {
                        self.reject(MME_ID, RejectReason::Role(e.clone()));
                        CellularMessage::Denied { about: dst, reason: e }
                    }
                };
                let _ = self.cellular_send(MME_ID, src, reply);
            }
            CellularMessage::KeyQuery { dst, src } => {
                let fresh: [u8; BLOCK_LEN] = self.rng.gen();
                let r = call_role!(self, Stage::Exchange, |ctx| self
                    .mme
                    .handle_destination_request(&mut ctx, dst, src, fresh));
                let reply = match r {
                    Ok(key) => {
                        if self.hook(Hook::LeakSessionKey) {
                            self.knowledge.learn(key.bytes);
                        }
                        CellularMessage::KeyForDestination { src, key }
                    }
                    Err(e) => {
                        self.reject(MME_ID, RejectReason::Role(e.clone()));
                        CellularMessage::Denied { about: src, reason: e }
                    }
                };
                let _ = self.cellular_send(MME_ID, dst, reply);
            }
            CellularMessage::KeyForSource(k) => {
                self.source.install_session_key(k);
                self.source_send();
            }
            CellularMessage::KeyForDestination { src, key } => {
                let outs = call_role!(self, Stage::Exchange, |ctx| self.destination.on_session_key(&mut ctx, src, key));
                self.after_destination(outs);
            }
            CellularMessage::Denied { about, reason } => {
                self.reject(to, RejectReason::Denied(reason));
                if to == self.topology.destination() {
                    self.destination.on_session_key_denied(about);
                }
            }
        }
    }
}

/// Runs one session end to end.
pub fn run(config: &ScenarioConfig) -> Result<RunResult, SimError> {
    Ok(Simulator::new(config.clone())?.run())
}
