//! Protocol state machines.
//!
//! Each role is a plain struct driven by the simulator: it is handed one
//! packet (or cellular message) at a time together with a [`RoleCtx`], and
//! answers with the packet to transmit next or a [`RoleError`] explaining why
//! the input was withdrawn.
//!
//! Hash chain: `h_1 = H(h0 || id_1)` and `h_i = H(M_{i-1} || id_i)` for later
//! hops, where `M_{i-1}` is the previous relay's MAC. `M_{i-1}` is itself
//! computed over `h_{i-1}`, so every link still depends on the whole prefix
//! of the route, and a relay needs only the last entry of the route record to
//! extend it.

mod destination;
mod mme;
mod relay;
mod source;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use thiserror::Error;

pub use destination::{DestinationOutput, DestinationPhase, DestinationState, DEFAULT_BUFFER_CAPACITY};
pub use mme::MmeState;
pub use relay::RelayState;
pub use source::{ReplyOutcome, SourcePhase, SourceState};

use crate::crypto::{Crypto, CryptoError, MacTag, SymKey, BLOCK_LEN};
use crate::properties::{ProtocolEvent, ProtocolEventKind};
use crate::tesla::{TeslaChain, TeslaCommitment, TeslaError};
use crate::wire::{Hop, KeyDisclosurePacket};
use crate::{NodeId, Slot};

/// Freshness window in slots.
pub const DEFAULT_FRESHNESS_WINDOW: u64 = 2;
pub const DEFAULT_REPLAY_CAPACITY: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoleError {
    #[error("no session key installed")]
    NoSessionKey,
    #[error("packet id {pkt_id} from {src} already seen")]
    ReplayedId { src: NodeId, pkt_id: u8 },
    #[error("time tag {t} is {slack} slots older than its hop count allows")]
    StaleTimestamp { t: u8, slack: u64 },
    #[error("source MAC h0 does not verify")]
    BadSourceMac,
    #[error("relay MAC at hop {0} does not verify")]
    BadRelayMac(usize),
    #[error("route record is inconsistent")]
    BadHashChain,
    #[error("reply MAC does not verify")]
    BadReplyMac,
    #[error("disclosed key of node {0} does not match its commitment")]
    BadDisclosedKey(NodeId),
    #[error("key for interval {interval} requested at slot {now}, not disclosable before {allowed}")]
    DisclosureTooEarly { interval: u64, now: Slot, allowed: Slot },
    #[error("node {0} is not a registered subscriber")]
    UnknownSubscriber(NodeId),
    #[error("source and destination are not in proximity")]
    NotInProximity,
    #[error("no pending D2D request for this pair")]
    NoPendingRequest,
    #[error("packet is not addressed to this node")]
    Misaddressed,
    #[error("request claims to originate from this node")]
    SpoofedSource,
    #[error("no key shared with node {0}")]
    UnknownPeer(NodeId),
    #[error("request already outstanding or session finished")]
    InvalidPhase,
    #[error(transparent)]
    Tesla(#[from] TeslaError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

impl RoleError {
    /// Errors that mean someone altered or forged protocol data. The
    /// detecting node raises an intruder alert for these.
    pub fn is_integrity_violation(&self) -> bool {
        matches!(
            self,
            RoleError::BadSourceMac
                | RoleError::BadRelayMac(_)
                | RoleError::BadHashChain
                | RoleError::BadReplyMac
                | RoleError::BadDisclosedKey(_)
                | RoleError::SpoofedSource
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            RoleError::NoSessionKey => "NoSessionKey",
            RoleError::ReplayedId { .. } => "ReplayedId",
            RoleError::StaleTimestamp { .. } => "StaleTimestamp",
            RoleError::BadSourceMac => "BadSourceMac",
            RoleError::BadRelayMac(_) => "BadRelayMac",
            RoleError::BadHashChain => "BadHashChain",
            RoleError::BadReplyMac => "BadReplyMac",
            RoleError::BadDisclosedKey(_) => "BadDisclosedKey",
            RoleError::DisclosureTooEarly { .. } => "DisclosureTooEarly",
            RoleError::UnknownSubscriber(_) => "UnknownSubscriber",
            RoleError::NotInProximity => "NotInProximity",
            RoleError::NoPendingRequest => "NoPendingRequest",
            RoleError::Misaddressed => "Misaddressed",
            RoleError::SpoofedSource => "SpoofedSource",
            RoleError::UnknownPeer(_) => "UnknownPeer",
            RoleError::InvalidPhase => "InvalidPhase",
            RoleError::Tesla(_) => "Tesla",
            RoleError::Crypto(_) => "Crypto",
        }
    }
}

/// Per-call context: crypto facade, current slot, and the sink for
/// protocol events.
pub struct RoleCtx<'a> {
    pub crypto: &'a Crypto,
    pub now: Slot,
    pub events: &'a mut Vec<ProtocolEvent>,
}

impl<'a> RoleCtx<'a> {
    pub fn new(crypto: &'a Crypto, now: Slot, events: &'a mut Vec<ProtocolEvent>) -> Self {
        Self { crypto, now, events }
    }

    pub(crate) fn emit(&mut self, kind: ProtocolEventKind, node: Option<NodeId>, value: [u8; BLOCK_LEN]) {
        self.events.push(ProtocolEvent { kind, node, value, slot: self.now });
    }
}

/// Bounded set of `(src, pkt_id)` pairs with FIFO eviction.
#[derive(Debug, Clone)]
pub struct ReplayCache {
    seen: HashSet<(NodeId, u8)>,
    order: VecDeque<(NodeId, u8)>,
    capacity: usize,
    enabled: bool,
}

impl ReplayCache {
    pub fn new(capacity: usize) -> Self {
        Self { seen: HashSet::new(), order: VecDeque::new(), capacity: capacity.max(1), enabled: true }
    }

    /// Test hook: accept every id.
    pub fn set_enabled(&mut self, enabled: bool) {
        self.enabled = enabled;
    }

    pub fn contains(&self, src: NodeId, pkt_id: u8) -> bool {
        self.seen.contains(&(src, pkt_id))
    }

    /// Records the pair, failing if it was already present.
    pub fn check_and_insert(&mut self, src: NodeId, pkt_id: u8) -> Result<(), RoleError> {
        if !self.enabled {
            return Ok(());
        }
        if !self.seen.insert((src, pkt_id)) {
            return Err(RoleError::ReplayedId { src, pkt_id });
        }
        self.order.push_back((src, pkt_id));
        if self.order.len() > self.capacity {
            let old = self.order.pop_front().expect("non-empty");
            self.seen.remove(&old);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Checks a 4-bit time tag against the local clock and returns the
/// reconstructed send slot.
///
/// A packet that has crossed `hop_distance` links under unit propagation
/// delay is expected to be exactly that many slots old. Anything beyond that
/// expectation plus `window` is stale. Ages are compared modulo 16, so a
/// replay held back a multiple of 16 slots is left to the replay cache.
pub fn check_freshness(t: u8, now: Slot, hop_distance: u64, window: u64) -> Result<Slot, RoleError> {
    let slack = (now.wrapping_sub(hop_distance).wrapping_sub(u64::from(t))) % 16;
    if slack > window {
        return Err(RoleError::StaleTimestamp { t, slack });
    }
    Ok(now.saturating_sub(hop_distance + slack))
}

/// Hash-chain link for the relay at zero-based position `index`.
pub fn chain_link(crypto: &Crypto, h0: &MacTag, prior: &[Hop], relay: NodeId) -> [u8; BLOCK_LEN] {
    let prev = prior.last().map_or(h0.0, |h| h.mac.0);
    let mut input = prev.to_vec();
    input.push(relay.0);
    crypto.hash(&input).0
}

/// A node's own TESLA chain plus bookkeeping of which interval keys have
/// been used and released.
#[derive(Debug, Clone)]
pub struct TeslaSender {
    chain: TeslaChain,
    used: BTreeSet<u64>,
    released: BTreeSet<u64>,
}

impl TeslaSender {
    pub fn new(chain: TeslaChain) -> Self {
        Self { chain, used: BTreeSet::new(), released: BTreeSet::new() }
    }

    pub fn chain(&self) -> &TeslaChain {
        &self.chain
    }

    /// Key for MACing at `now`. Marks the interval as used.
    pub fn mac_key(&mut self, now: Slot) -> Result<(u64, SymKey), RoleError> {
        let i = self.chain.commitment().current_interval(now)?;
        self.used.insert(i);
        Ok((i, self.chain.key_for_interval(i)?))
    }

    /// Releases the key for interval `i`, refusing before its disclosure slot.
    pub fn release(&mut self, i: u64, now: Slot) -> Result<SymKey, RoleError> {
        let allowed = self.chain.commitment().disclosure_slot(i);
        if now < allowed {
            return Err(RoleError::DisclosureTooEarly { interval: i, now, allowed });
        }
        let key = self.chain.key_for_interval(i)?;
        self.released.insert(i);
        Ok(key)
    }

    /// Disclosure packets for every used interval whose slot has come.
    pub fn due(&mut self, now: Slot) -> Vec<KeyDisclosurePacket> {
        let due: Vec<u64> = self
            .used
            .difference(&self.released)
            .copied()
            .filter(|&i| self.chain.commitment().disclosure_slot(i) <= now)
            .collect();
        due.into_iter()
            .filter_map(|i| {
                let key = self.release(i, now).ok()?;
                Some(KeyDisclosurePacket { owner: self.chain.owner(), interval: i as u16, key: key.bytes })
            })
            .collect()
    }
}

/// Commitments of every node plus the disclosed keys verified so far.
#[derive(Debug, Clone, Default)]
pub struct KeyStore {
    commitments: BTreeMap<NodeId, TeslaCommitment>,
    verified: BTreeMap<(NodeId, u64), SymKey>,
}

impl KeyStore {
    pub fn new(commitments: impl IntoIterator<Item = TeslaCommitment>) -> Self {
        Self { commitments: commitments.into_iter().map(|c| (c.owner, c)).collect(), verified: BTreeMap::new() }
    }

    pub fn commitment(&self, owner: NodeId) -> Option<&TeslaCommitment> {
        self.commitments.get(&owner)
    }

    /// Interval `owner` was in when it sent at `slot`.
    pub fn interval_at(&self, owner: NodeId, slot: Slot) -> Result<u64, RoleError> {
        let c = self.commitment(owner).ok_or(RoleError::BadDisclosedKey(owner))?;
        Ok(c.current_interval(slot)?)
    }

    pub fn verified(&self, owner: NodeId, interval: u64) -> Option<SymKey> {
        self.verified.get(&(owner, interval)).copied()
    }

    /// Authenticates `key` as `owner`'s interval key and remembers it.
    pub fn accept(&mut self, crypto: &Crypto, owner: NodeId, interval: u64, key: SymKey) -> Result<SymKey, RoleError> {
        if let Some(k) = self.verified(owner, interval) {
            return if k.bytes == key.bytes { Ok(k) } else { Err(RoleError::BadDisclosedKey(owner)) };
        }
        let c = self.commitment(owner).ok_or(RoleError::BadDisclosedKey(owner))?;
        if !c.verify_disclosed_key(crypto, &key, interval) {
            return Err(RoleError::BadDisclosedKey(owner));
        }
        self.verified.insert((owner, interval), key);
        Ok(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::raw;

    #[test]
    fn replay_cache_rejects_second_delivery() {
        let mut c = ReplayCache::new(4);
        assert!(c.check_and_insert(NodeId(1), 3).is_ok());
        assert_eq!(c.check_and_insert(NodeId(1), 3), Err(RoleError::ReplayedId { src: NodeId(1), pkt_id: 3 }));
        assert!(c.check_and_insert(NodeId(2), 3).is_ok());
    }

    #[test]
    fn replay_cache_evicts_oldest() {
        let mut c = ReplayCache::new(2);
        for id in 0..3 {
            c.check_and_insert(NodeId(1), id).unwrap();
        }
        assert_eq!(c.len(), 2);
        assert!(!c.contains(NodeId(1), 0));
        assert!(c.check_and_insert(NodeId(1), 0).is_ok());
    }

    #[test]
    fn disabled_cache_accepts_duplicates() {
        let mut c = ReplayCache::new(2);
        c.set_enabled(false);
        assert!(c.check_and_insert(NodeId(1), 1).is_ok());
        assert!(c.check_and_insert(NodeId(1), 1).is_ok());
    }

    #[test]
    fn freshness_rules() {
        // sent at slot 2, one hop, arrives at 3
        assert_eq!(check_freshness(2, 3, 1, 2), Ok(2));
        // held back two extra slots: still inside W = 2
        assert_eq!(check_freshness(2, 5, 1, 2), Ok(2));
        assert_eq!(check_freshness(2, 6, 1, 2), Err(RoleError::StaleTimestamp { t: 2, slack: 3 }));
        // tag wraps: sent at 30 (tag 14), 3 hops, arrives at 33
        assert_eq!(check_freshness(14, 33, 3, 2), Ok(30));
        // 19 hops at n = 20
        assert_eq!(check_freshness((40 % 16) as u8, 59, 19, 2), Ok(40));
    }

    #[test]
    fn chain_link_uses_previous_mac() {
        let crypto = Crypto::new();
        let h0 = MacTag([1; 32]);
        let first = chain_link(&crypto, &h0, &[], NodeId(7));
        assert_eq!(first, raw::sha256(&[&[1; 32], &[7]]));
        let hop = Hop { relay: NodeId(7), mac: MacTag([9; 32]) };
        assert_eq!(chain_link(&crypto, &h0, &[hop], NodeId(8)), raw::sha256(&[&[9; 32], &[8]]));
    }

    #[test]
    fn tesla_sender_refuses_early_release() {
        let crypto = Crypto::new();
        let chain = TeslaChain::generate(&crypto, NodeId(3), [4; 32], 10, 1, 0).unwrap();
        let mut s = TeslaSender::new(chain);
        let (i, _) = s.mac_key(3).unwrap();
        assert_eq!(i, 3);
        assert_eq!(s.release(3, 3), Err(RoleError::DisclosureTooEarly { interval: 3, now: 3, allowed: 4 }));
        assert!(s.due(3).is_empty());
        let out = s.due(4);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].interval, 3);
        assert!(s.due(5).is_empty());
    }

    #[test]
    fn key_store_verifies_against_commitment() {
        let crypto = Crypto::new();
        let chain = TeslaChain::generate(&crypto, NodeId(3), [4; 32], 10, 1, 0).unwrap();
        let mut store = KeyStore::new([chain.commitment()]);
        let k5 = chain.key_for_interval(5).unwrap();
        assert!(store.accept(&crypto, NodeId(3), 4, k5).is_err());
        assert!(store.accept(&crypto, NodeId(3), 5, k5).is_ok());
        assert_eq!(store.verified(NodeId(3), 5), Some(k5));
        assert_eq!(store.accept(&crypto, NodeId(9), 5, k5), Err(RoleError::BadDisclosedKey(NodeId(9))));
    }
}
