use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::source::route_is_simple;
use super::{
    chain_link, check_freshness, KeyStore, ReplayCache, RoleCtx, RoleError, TeslaSender, DEFAULT_REPLAY_CAPACITY,
};
use crate::crypto::{KeyKind, MacTag, SymKey, BLOCK_LEN};
use crate::properties::{ProtocolEventKind, Role};
use crate::wire::{relay_mac_input, Hop, KeyDisclosurePacket, Packet, RelayedReplyPacket, ReplyPacket, RequestPacket};
use crate::{NodeId, Scenario, Slot};

pub const DEFAULT_BUFFER_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DestinationPhase {
    Listening,
    /// A request is buffered until the MME supplies `K`.
    AwaitingSessionKey,
    /// A request is decrypted but unverified until the source's TESLA key
    /// is disclosed.
    AwaitingSourceKey,
    Replied,
}

/// What the simulator should do after handing the destination an input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DestinationOutput {
    Reply(Packet),
    /// Ask the MME for the key shared with this source.
    NeedSessionKey(NodeId),
    Buffered,
    Ignored,
}

#[derive(Debug, Clone)]
struct PendingRequest {
    base: RequestPacket,
    hops: Vec<Hop>,
    send_slot: Slot,
    plaintext: Option<[u8; BLOCK_LEN]>,
}

#[derive(Debug, Clone)]
pub struct DestinationState {
    id: NodeId,
    scenario: Scenario,
    phase: DestinationPhase,
    seen: ReplayCache,
    window: u64,
    buffer: VecDeque<PendingRequest>,
    capacity: usize,
    session_keys: BTreeMap<NodeId, SymKey>,
    requested: BTreeSet<NodeId>,
    running: BTreeSet<[u8; BLOCK_LEN]>,
    tesla: TeslaSender,
    keys: KeyStore,
    delivered: Vec<[u8; BLOCK_LEN]>,
}

impl DestinationState {
    pub fn new(id: NodeId, scenario: Scenario, tesla: TeslaSender, keys: KeyStore, window: u64) -> Self {
        Self {
            id,
            scenario,
            phase: DestinationPhase::Listening,
            seen: ReplayCache::new(DEFAULT_REPLAY_CAPACITY),
            window,
            buffer: VecDeque::new(),
            capacity: DEFAULT_BUFFER_CAPACITY,
            session_keys: BTreeMap::new(),
            requested: BTreeSet::new(),
            running: BTreeSet::new(),
            tesla,
            keys,
            delivered: Vec::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn phase(&self) -> DestinationPhase {
        self.phase
    }

    pub fn set_replay_protection(&mut self, on: bool) {
        self.seen.set_enabled(on);
    }

    /// Pre-shared key for a source, used when there is no coverage.
    pub fn install_preshared(&mut self, src: NodeId, key: SymKey) {
        self.session_keys.insert(src, key);
    }

    /// Plaintexts of every accepted request, padded to one block.
    pub fn delivered(&self) -> &[[u8; BLOCK_LEN]] {
        &self.delivered
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn on_request(&mut self, ctx: &mut RoleCtx<'_>, packet: &Packet) -> Result<DestinationOutput, RoleError> {
        let (base, hops): (&RequestPacket, &[Hop]) = match packet {
            Packet::Request(r) => (r, &[]),
            Packet::RelayedRequest(r) => (&r.base, &r.hops),
            _ => return Ok(DestinationOutput::Ignored),
        };
        if base.src == self.id {
            return Err(RoleError::SpoofedSource);
        }
        if base.dst != self.id {
            return Err(RoleError::Misaddressed);
        }
        self.seen.check_and_insert(base.src, base.pkt_id)?;
        let send_slot = check_freshness(base.t, ctx.now, hops.len() as u64 + 1, self.window)?;
        if !route_is_simple(hops, base.src, base.dst) {
            return Err(RoleError::BadHashChain);
        }
        let mut pending = PendingRequest { base: base.clone(), hops: hops.to_vec(), send_slot, plaintext: None };

        if self.scenario.has_infrastructure() {
            return match self.session_keys.get(&base.src).copied() {
                Some(k) => self.validate(ctx, pending, k),
                None => {
                    self.push(pending);
                    self.phase = DestinationPhase::AwaitingSessionKey;
                    if self.requested.insert(base.src) {
                        Ok(DestinationOutput::NeedSessionKey(base.src))
                    } else {
                        Ok(DestinationOutput::Buffered)
                    }
                }
            };
        }

        // No infrastructure: decrypt now, release only once h0 verifies.
        let k = *self.session_keys.get(&base.src).ok_or(RoleError::UnknownPeer(base.src))?;
        self.note_running(ctx, &k);
        let derived = ctx.crypto.derive_session_key(&k, base.nonce);
        pending.plaintext = Some(ctx.crypto.decrypt(&derived, &base.ciphertext)?);
        let interval = self.keys.interval_at(base.src, send_slot)?;
        match self.keys.verified(base.src, interval) {
            Some(_) => self.validate(ctx, pending, k),
            None => {
                self.push(pending);
                self.phase = DestinationPhase::AwaitingSourceKey;
                Ok(DestinationOutput::Buffered)
            }
        }
    }

    /// `K` delivered by the MME. Validates every request buffered for `src`.
    pub fn on_session_key(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        src: NodeId,
        key: SymKey,
    ) -> Vec<Result<DestinationOutput, RoleError>> {
        self.session_keys.insert(src, key);
        self.requested.remove(&src);
        drain(&mut self.buffer, |p| p.base.src == src).into_iter().map(|p| self.validate(ctx, p, key)).collect()
    }

    /// The MME refused to supply a key: drop what was waiting for it.
    pub fn on_session_key_denied(&mut self, src: NodeId) -> usize {
        self.requested.remove(&src);
        drain(&mut self.buffer, |p| p.base.src == src).len()
    }

    /// Authenticates a broadcast TESLA key and validates buffered requests
    /// that were waiting for it.
    pub fn on_disclosure(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        packet: &KeyDisclosurePacket,
    ) -> Result<Vec<Result<DestinationOutput, RoleError>>, RoleError> {
        if packet.owner == self.id {
            return Ok(Vec::new());
        }
        let interval = u64::from(packet.interval);
        self.keys.accept(ctx.crypto, packet.owner, interval, SymKey::new(packet.key, KeyKind::Tesla))?;
        let keys = &self.keys;
        let ready = drain(&mut self.buffer, |p| {
            p.base.src == packet.owner && keys.interval_at(p.base.src, p.send_slot).ok() == Some(interval)
        });
        Ok(ready
            .into_iter()
            .map(|p| {
                let k = *self.session_keys.get(&p.base.src).ok_or(RoleError::UnknownPeer(p.base.src))?;
                self.validate(ctx, p, k)
            })
            .collect())
    }

    pub fn due_disclosures(&mut self, now: Slot) -> Vec<KeyDisclosurePacket> {
        self.tesla.due(now)
    }

    pub fn disclose_current(&mut self, now: Slot) -> Result<SymKey, RoleError> {
        let i = self.tesla.chain().commitment().current_interval(now)?;
        self.tesla.release(i, now)
    }

    fn push(&mut self, p: PendingRequest) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(p);
    }

    fn note_running(&mut self, ctx: &mut RoleCtx<'_>, k: &SymKey) {
        if self.running.insert(k.bytes) {
            ctx.emit(ProtocolEventKind::DestinationRunning, None, k.bytes);
        }
    }

    /// Verifies h0, walks the hash chain, checks any relay MACs whose keys
    /// are known, then decrypts and replies.
    fn validate(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        p: PendingRequest,
        k: SymKey,
    ) -> Result<DestinationOutput, RoleError> {
        self.note_running(ctx, &k);
        let h0_key = if self.scenario.has_infrastructure() {
            k
        } else {
            let i = self.keys.interval_at(p.base.src, p.send_slot)?;
            self.keys.verified(p.base.src, i).ok_or(RoleError::BadDisclosedKey(p.base.src))?
        };
        if !ctx.crypto.verify_mac(&h0_key, &p.base.mac_input(), &p.base.h0) {
            return Err(RoleError::BadSourceMac);
        }
        for (j, hop) in p.hops.iter().enumerate() {
            let h_j = chain_link(ctx.crypto, &p.base.h0, &p.hops[..j], hop.relay);
            let interval = self.keys.interval_at(hop.relay, p.send_slot + j as u64 + 1).ok();
            if let Some(key) = interval.and_then(|i| self.keys.verified(hop.relay, i)) {
                let input = relay_mac_input(&p.base, &p.hops[..j], hop.relay, &h_j);
                if !ctx.crypto.verify_mac(&key, &input, &hop.mac) {
                    return Err(RoleError::BadRelayMac(j + 1));
                }
            }
        }
        let plaintext = match p.plaintext {
            Some(m) => m,
            None => ctx.crypto.decrypt(&ctx.crypto.derive_session_key(&k, p.base.nonce), &p.base.ciphertext)?,
        };
        self.delivered.push(plaintext);
        ctx.emit(ProtocolEventKind::DestinationCommit, None, k.bytes);
        ctx.emit(ProtocolEventKind::Reachable(Role::Destination), None, k.bytes);

        let reply_key = if self.scenario.has_infrastructure() { k } else { self.tesla.mac_key(ctx.now)?.1 };
        let mut base = ReplyPacket {
            destination: self.id,
            source: p.base.src,
            t: (ctx.now % 16) as u8,
            pkt_id: p.base.pkt_id,
            reply_mac: MacTag([0; BLOCK_LEN]),
        };
        base.reply_mac = ctx.crypto.mac(&reply_key, &base.mac_input());
        ctx.emit(ProtocolEventKind::TermDestination, None, k.bytes);
        self.phase = DestinationPhase::Replied;
        let reply = if p.hops.is_empty() {
            Packet::Reply(base)
        } else {
            Packet::RelayedReply(RelayedReplyPacket { base, hops: p.hops, disclosed_keys: Vec::new() })
        };
        Ok(DestinationOutput::Reply(reply))
    }
}

fn drain(buffer: &mut VecDeque<PendingRequest>, mut pick: impl FnMut(&PendingRequest) -> bool) -> Vec<PendingRequest> {
    let (ready, keep): (Vec<_>, Vec<_>) = buffer.drain(..).partition(|p| pick(p));
    *buffer = keep.into();
    ready
}
