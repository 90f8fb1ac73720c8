use std::collections::{BTreeMap, BTreeSet};

use super::{RoleCtx, RoleError};
use crate::crypto::{KeyKind, SymKey, BLOCK_LEN};
use crate::properties::{ProtocolEventKind, Role};
use crate::NodeId;

/// Network-side key server. Issues `K` to the source and hands the same key
/// to the destination once it asks for it.
#[derive(Debug, Clone, Default)]
pub struct MmeState {
    subscribers: BTreeSet<NodeId>,
    proximity: BTreeSet<(NodeId, NodeId)>,
    pending: BTreeMap<(NodeId, NodeId), SymKey>,
    distinct_keys: bool,
}

impl MmeState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: NodeId) {
        self.subscribers.insert(id);
    }

    pub fn set_proximity(&mut self, a: NodeId, b: NodeId) {
        self.proximity.insert((a.min(b), a.max(b)));
    }

    /// Test hook: answer the destination with a key different from the one
    /// given to the source.
    pub fn set_distinct_keys(&mut self, on: bool) {
        self.distinct_keys = on;
    }

    fn check_pair(&self, a: NodeId, b: NodeId) -> Result<(), RoleError> {
        for id in [a, b] {
            if !self.subscribers.contains(&id) {
                return Err(RoleError::UnknownSubscriber(id));
            }
        }
        if !self.proximity.contains(&(a.min(b), a.max(b))) {
            return Err(RoleError::NotInProximity);
        }
        Ok(())
    }

    /// Source asks to talk to `dst`. `fresh` is the new key material.
    pub fn handle_source_request(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        src: NodeId,
        dst: NodeId,
        fresh: [u8; BLOCK_LEN],
    ) -> Result<SymKey, RoleError> {
        self.check_pair(src, dst)?;
        let key = SymKey::new(fresh, KeyKind::Session);
        self.pending.insert((src, dst), key);
        ctx.emit(ProtocolEventKind::MmeRunning, None, key.bytes);
        ctx.emit(ProtocolEventKind::Reachable(Role::Mme), None, key.bytes);
        Ok(key)
    }

    /// Destination asks for the key protecting a request from `src`.
    /// `fresh` is only consumed by the distinct-keys hook.
    pub fn handle_destination_request(
        &mut self,
        ctx: &mut RoleCtx<'_>,
        dst: NodeId,
        src: NodeId,
        fresh: [u8; BLOCK_LEN],
    ) -> Result<SymKey, RoleError> {
        self.check_pair(src, dst)?;
        let issued = *self.pending.get(&(src, dst)).ok_or(RoleError::NoPendingRequest)?;
        let key = if self.distinct_keys { SymKey::new(fresh, KeyKind::Session) } else { issued };
        ctx.emit(ProtocolEventKind::MmeCommit, None, key.bytes);
        Ok(key)
    }
}
