use std::collections::BTreeSet;

use super::{chain_link, check_freshness, KeyStore, RoleCtx, RoleError, TeslaSender};
use crate::crypto::{KeyKind, MacTag, Nonce, SymKey};
use crate::properties::{ProtocolEventKind, Role};
use crate::wire::{relay_mac_input, Hop, KeyDisclosurePacket, Packet, ReplyPacket, RequestPacket};
use crate::{NodeId, Scenario, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourcePhase {
    Idle,
    KeyInstalled,
    AwaitingReply,
    AwaitingDestinationKey,
    Accepted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplyOutcome {
    Accepted,
    /// Reply is authentic so far but the destination's TESLA key has not
    /// been disclosed yet.
    AwaitingKey,
    Ignored,
}

#[derive(Debug, Clone)]
struct SentRequest {
    packet: RequestPacket,
    slot: Slot,
}

#[derive(Debug, Clone)]
struct PendingReply {
    base: ReplyPacket,
    interval: u64,
    relays: Vec<(NodeId, SymKey)>,
}

#[derive(Debug, Clone)]
pub struct SourceState {
    id: NodeId,
    dst: NodeId,
    scenario: Scenario,
    phase: SourcePhase,
    session_key: Option<SymKey>,
    next_pkt_id: u8,
    tesla: TeslaSender,
    keys: KeyStore,
    window: u64,
    sent: Option<SentRequest>,
    pending: Option<PendingReply>,
}

impl SourceState {
    pub fn new(id: NodeId, dst: NodeId, scenario: Scenario, tesla: TeslaSender, keys: KeyStore, window: u64) -> Self {
        Self {
            id,
            dst,
            scenario,
            phase: SourcePhase::Idle,
            session_key: None,
            next_pkt_id: 1,
            tesla,
            keys,
            window,
            sent: None,
            pending: None,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn phase(&self) -> SourcePhase {
        self.phase
    }

    pub fn session_key(&self) -> Option<SymKey> {
        self.session_key
    }

    /// `K` from the MME, or the pre-shared key without coverage.
    pub fn install_session_key(&mut self, key: SymKey) {
        self.session_key = Some(key);
        if self.phase == SourcePhase::Idle {
            self.phase = SourcePhase::KeyInstalled;
        }
    }

    /// Encrypts `message` under `K' = KDF(K, N)` and MACs the request with
    /// `K`, or with the current TESLA key when there is no infrastructure.
    pub fn build_request(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        message: &[u8],
        nonce: Nonce,
    ) -> Result<RequestPacket, RoleError> {
        if self.phase != SourcePhase::KeyInstalled {
            return Err(RoleError::InvalidPhase);
        }
        let k = self.session_key.ok_or(RoleError::NoSessionKey)?;
        let mac_key = if self.scenario.has_infrastructure() { k } else { self.tesla.mac_key(ctx.now)?.1 };
        let derived = ctx.crypto.derive_session_key(&k, nonce);
        let ciphertext = ctx.crypto.encrypt(&derived, message)?;
        let pkt_id = self.next_pkt_id;
        self.next_pkt_id = (self.next_pkt_id + 1) & 0xf;
        let mut packet = RequestPacket {
            src: self.id,
            dst: self.dst,
            nonce,
            pkt_id,
            t: (ctx.now % 16) as u8,
            ciphertext,
            h0: MacTag([0; 32]),
        };
        packet.h0 = ctx.crypto.mac(&mac_key, &packet.mac_input());
        ctx.emit(ProtocolEventKind::SourceRunning, None, k.bytes);
        self.sent = Some(SentRequest { packet: packet.clone(), slot: ctx.now });
        self.phase = SourcePhase::AwaitingReply;
        Ok(packet)
    }

    pub fn on_reply(&mut self, ctx: &mut RoleCtx<'_>, packet: &Packet) -> Result<ReplyOutcome, RoleError> {
        let (base, hops, disclosed): (&ReplyPacket, &[Hop], &[[u8; 32]]) = match packet {
            Packet::Reply(r) => (r, &[], &[]),
            Packet::RelayedReply(r) => (&r.base, &r.hops, &r.disclosed_keys),
            _ => return Ok(ReplyOutcome::Ignored),
        };
        let sent = match (&self.sent, self.phase) {
            (Some(s), SourcePhase::AwaitingReply) => s.clone(),
            (Some(s), _) if base.source == self.id && base.pkt_id == s.packet.pkt_id => {
                return Err(RoleError::ReplayedId { src: base.destination, pkt_id: base.pkt_id });
            }
            _ => return Ok(ReplyOutcome::Ignored),
        };
        if base.source != self.id || base.destination != self.dst || base.pkt_id != sent.packet.pkt_id {
            return Err(RoleError::Misaddressed);
        }
        let reply_slot = check_freshness(base.t, ctx.now, hops.len() as u64 + 1, self.window)?;
        if hops.len() != disclosed.len() || !route_is_simple(hops, self.id, self.dst) {
            return Err(RoleError::BadHashChain);
        }

        let mut relays = Vec::with_capacity(hops.len());
        for (j, hop) in hops.iter().enumerate() {
            let interval = self.keys.interval_at(hop.relay, sent.slot + j as u64 + 1)?;
            let key = SymKey::new(disclosed[hops.len() - 1 - j], KeyKind::Tesla);
            let key = self.keys.accept(ctx.crypto, hop.relay, interval, key)?;
            let h_j = chain_link(ctx.crypto, &sent.packet.h0, &hops[..j], hop.relay);
            let input = relay_mac_input(&sent.packet, &hops[..j], hop.relay, &h_j);
            if !ctx.crypto.verify_mac(&key, &input, &hop.mac) {
                return Err(RoleError::BadRelayMac(j + 1));
            }
            relays.push((hop.relay, key));
        }

        if self.scenario.has_infrastructure() {
            let k = self.session_key.ok_or(RoleError::NoSessionKey)?;
            return self.finish(ctx, base, k, relays);
        }
        let interval = self.keys.interval_at(self.dst, reply_slot)?;
        match self.keys.verified(self.dst, interval) {
            Some(k) => self.finish(ctx, base, k, relays),
            None => {
                self.pending = Some(PendingReply { base: base.clone(), interval, relays });
                self.phase = SourcePhase::AwaitingDestinationKey;
                Ok(ReplyOutcome::AwaitingKey)
            }
        }
    }

    /// Authenticates a broadcast TESLA key and completes a reply that was
    /// waiting for it.
    pub fn on_disclosure(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        packet: &KeyDisclosurePacket,
    ) -> Result<ReplyOutcome, RoleError> {
        if packet.owner == self.id {
            return Ok(ReplyOutcome::Ignored);
        }
        let interval = u64::from(packet.interval);
        self.keys.accept(ctx.crypto, packet.owner, interval, SymKey::new(packet.key, KeyKind::Tesla))?;
        match self.pending.take() {
            Some(p) if p.interval == interval && packet.owner == self.dst => {
                let key = self.keys.verified(self.dst, interval).expect("accepted above");
                self.finish(ctx, &p.base, key, p.relays)
            }
            other => {
                self.pending = other;
                Ok(ReplyOutcome::Ignored)
            }
        }
    }

    fn finish(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        base: &ReplyPacket,
        mac_key: SymKey,
        relays: Vec<(NodeId, SymKey)>,
    ) -> Result<ReplyOutcome, RoleError> {
        if !ctx.crypto.verify_mac(&mac_key, &base.mac_input(), &base.reply_mac) {
            self.pending = None;
            self.phase = SourcePhase::AwaitingReply;
            return Err(RoleError::BadReplyMac);
        }
        let k = self.session_key.ok_or(RoleError::NoSessionKey)?;
        for (relay, key) in relays {
            ctx.emit(ProtocolEventKind::AcceptsServerClient, Some(relay), key.bytes);
        }
        ctx.emit(ProtocolEventKind::AcceptsServerDestination, None, k.bytes);
        ctx.emit(ProtocolEventKind::SourceCommit, None, k.bytes);
        ctx.emit(ProtocolEventKind::Reachable(Role::Source), None, k.bytes);
        self.phase = SourcePhase::Accepted;
        Ok(ReplyOutcome::Accepted)
    }

    /// TESLA keys whose disclosure slot has arrived.
    pub fn due_disclosures(&mut self, now: Slot) -> Vec<KeyDisclosurePacket> {
        self.tesla.due(now)
    }

    /// Test hook: try to release the key of the interval in use at `now`.
    pub fn disclose_current(&mut self, now: Slot) -> Result<SymKey, RoleError> {
        let i = self.tesla.chain().commitment().current_interval(now)?;
        self.tesla.release(i, now)
    }
}

/// No endpoint ids and no repeated relay.
pub(super) fn route_is_simple(hops: &[Hop], src: NodeId, dst: NodeId) -> bool {
    let mut seen = BTreeSet::new();
    hops.iter().all(|h| h.relay != src && h.relay != dst && seen.insert(h.relay))
}
