use std::collections::BTreeMap;

use super::{chain_link, check_freshness, ReplayCache, RoleCtx, RoleError, TeslaSender, DEFAULT_REPLAY_CAPACITY};
use crate::crypto::SymKey;
use crate::properties::{ProtocolEventKind, Role};
use crate::wire::{relay_mac_input, Hop, Packet, RelayedReplyPacket, RelayedRequestPacket, RequestPacket};
use crate::{NodeId, Slot};

/// Intermediate node. MACs requests with its current TESLA key and, on the
/// way back, appends that key to the reply once it may be disclosed.
#[derive(Debug, Clone)]
pub struct RelayState {
    id: NodeId,
    tesla: TeslaSender,
    seen: ReplayCache,
    replies: ReplayCache,
    window: u64,
    /// Interval used for each forwarded `(src, pkt_id)`.
    used: BTreeMap<(NodeId, u8), u64>,
}

impl RelayState {
    pub fn new(id: NodeId, tesla: TeslaSender, window: u64) -> Self {
        Self {
            id,
            tesla,
            seen: ReplayCache::new(DEFAULT_REPLAY_CAPACITY),
            replies: ReplayCache::new(DEFAULT_REPLAY_CAPACITY),
            window,
            used: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn set_replay_protection(&mut self, on: bool) {
        self.seen.set_enabled(on);
        self.replies.set_enabled(on);
    }

    /// Returns the request to rebroadcast, or `None` when the packet is not
    /// this relay's business (its own echo, or traffic it originates or
    /// terminates).
    pub fn on_request(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        packet: &Packet,
    ) -> Result<Option<RelayedRequestPacket>, RoleError> {
        let (base, hops): (&RequestPacket, &[Hop]) = match packet {
            Packet::Request(r) => (r, &[]),
            Packet::RelayedRequest(r) => (&r.base, &r.hops),
            _ => return Ok(None),
        };
        if base.src == self.id {
            return Err(RoleError::SpoofedSource);
        }
        if base.dst == self.id {
            return Err(RoleError::Misaddressed);
        }
        if hops.iter().any(|h| h.relay == self.id) {
            return if self.seen.contains(base.src, base.pkt_id) { Ok(None) } else { Err(RoleError::BadHashChain) };
        }
        self.seen.check_and_insert(base.src, base.pkt_id)?;
        check_freshness(base.t, ctx.now, hops.len() as u64 + 1, self.window)?;

        let (interval, key) = self.tesla.mac_key(ctx.now)?;
        let h_i = chain_link(ctx.crypto, &base.h0, hops, self.id);
        let mac = ctx.crypto.mac(&key, &relay_mac_input(base, hops, self.id, &h_i));
        self.used.insert((base.src, base.pkt_id), interval);
        ctx.emit(ProtocolEventKind::ClientRunning, Some(self.id), key.bytes);
        ctx.emit(ProtocolEventKind::Reachable(Role::Relay), Some(self.id), key.bytes);

        let mut out_hops = hops.to_vec();
        out_hops.push(Hop { relay: self.id, mac });
        Ok(Some(RelayedRequestPacket { base: base.clone(), hops: out_hops }))
    }

    /// Appends this relay's key to a reply travelling back along the route.
    ///
    /// The turn is read off the key count. A relay that forwarded the
    /// session but finds its own entry altered still appends its key, so
    /// the source's retroactive check exposes the alteration instead of the
    /// reply stalling silently.
    pub fn on_reply(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        packet: &Packet,
    ) -> Result<Option<RelayedReplyPacket>, RoleError> {
        let Packet::RelayedReply(reply) = packet else {
            return Ok(None);
        };
        let session = (reply.base.source, reply.base.pkt_id);
        let Some(&interval) = self.used.get(&session) else {
            return Ok(None);
        };
        let Some(turn) = reply.hops.len().checked_sub(reply.disclosed_keys.len() + 1) else {
            return Ok(None);
        };
        let mine = reply.hops[turn].relay == self.id;
        let listed = reply.hops.iter().any(|h| h.relay == self.id);
        // the second test catches our own broadcast heard back
        if (!mine && listed) || self.replies.contains(session.0, session.1) {
            return Ok(None);
        }
        self.replies.check_and_insert(session.0, session.1)?;
        let key = self.tesla.release(interval, ctx.now)?;
        let mut out = reply.clone();
        out.disclosed_keys.push(key.bytes);
        Ok(Some(out))
    }

    /// Test hook: release the key for the interval in use right now.
    pub fn disclose_current(&mut self, now: Slot) -> Result<SymKey, RoleError> {
        let i = self.tesla.chain().commitment().current_interval(now)?;
        self.tesla.release(i, now)
    }
}
