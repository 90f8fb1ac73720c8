//! TESLA one-way key chains.
//!
//! A chain of length `L` holds `L + 1` keys. The last key is the random seed
//! and each earlier key is the hash of its successor, so `keys[0]` is a
//! commitment to the whole chain. Key `i` authenticates traffic sent during
//! interval `i` and is released `disclosure_delay` intervals later; anyone
//! holding the commitment can check a released key by hashing it `i` times.

use thiserror::Error;

use crate::crypto::{Crypto, KeyKind, Stage, SymKey, BLOCK_LEN};
use crate::{NodeId, Slot};

pub const DEFAULT_DISCLOSURE_DELAY: u64 = 1;
pub const DEFAULT_INTERVAL_LEN: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TeslaError {
    #[error("a key chain needs at least one key after the commitment")]
    InvalidLength,
    #[error("interval length must be at least one slot")]
    InvalidIntervalLen,
    #[error("interval {index} is outside 1..={len}")]
    IntervalOutOfRange { index: u64, len: u64 },
    #[error("key chain exhausted: interval {index} exceeds chain length {len}")]
    ChainExhausted { index: u64, len: u64 },
    #[error("slot {now} precedes the chain start slot {start}")]
    BeforeStart { now: Slot, start: Slot },
}

/// Public data every node holds about another node's chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TeslaCommitment {
    pub owner: NodeId,
    pub key0: SymKey,
    pub start_slot: Slot,
    pub interval_len: u64,
    pub length: u64,
    pub disclosure_delay: u64,
}

impl TeslaCommitment {
    /// Slot at which the key for interval `i` may be released.
    pub fn disclosure_slot(&self, i: u64) -> Slot {
        self.start_slot + (i + self.disclosure_delay) * self.interval_len
    }

    /// Interval whose key MACs traffic sent at `now`. Interval 0 is folded
    /// into interval 1 because `keys[0]` is the commitment.
    pub fn current_interval(&self, now: Slot) -> Result<u64, TeslaError> {
        if now < self.start_slot {
            return Err(TeslaError::BeforeStart { now, start: self.start_slot });
        }
        let index = ((now - self.start_slot) / self.interval_len).max(1);
        if index > self.length {
            return Err(TeslaError::ChainExhausted { index, len: self.length });
        }
        Ok(index)
    }

    /// True iff hashing `disclosed` `i` times yields the commitment.
    pub fn verify_disclosed_key(&self, crypto: &Crypto, disclosed: &SymKey, i: u64) -> bool {
        if i == 0 || i > self.length {
            return false;
        }
        crypto.in_stage(Stage::TeslaAuth, || {
            let mut cur = disclosed.bytes;
            for _ in 0..i {
                cur = crypto.hash(&cur).0;
            }
            cur == self.key0.bytes
        })
    }
}

/// A node's full key chain. Immutable once generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeslaChain {
    commitment: TeslaCommitment,
    keys: Vec<SymKey>,
}

impl TeslaChain {
    /// Builds the chain downward from `seed`. Hashes are attributed to
    /// [`Stage::TeslaSetup`].
    pub fn generate(
        crypto: &Crypto,
        owner: NodeId,
        seed: [u8; BLOCK_LEN],
        length: u64,
        interval_len: u64,
        start_slot: Slot,
    ) -> Result<Self, TeslaError> {
        if length == 0 {
            return Err(TeslaError::InvalidLength);
        }
        if interval_len == 0 {
            return Err(TeslaError::InvalidIntervalLen);
        }
        let mut keys = vec![SymKey::new(seed, KeyKind::Tesla)];
        crypto.in_stage(Stage::TeslaSetup, || {
            for _ in 0..length {
                let next = crypto.hash(&keys.last().expect("non-empty").bytes);
                keys.push(SymKey::new(next.0, KeyKind::Tesla));
            }
        });
        keys.reverse();
        let commitment = TeslaCommitment {
            owner,
            key0: keys[0],
            start_slot,
            interval_len,
            length,
            disclosure_delay: DEFAULT_DISCLOSURE_DELAY,
        };
        Ok(Self { commitment, keys })
    }

    pub fn with_disclosure_delay(mut self, delay: u64) -> Self {
        self.commitment.disclosure_delay = delay;
        self
    }

    pub fn commitment(&self) -> TeslaCommitment {
        self.commitment
    }

    pub fn owner(&self) -> NodeId {
        self.commitment.owner
    }

    pub fn length(&self) -> u64 {
        self.commitment.length
    }

    /// All keys, commitment first.
    pub fn keys(&self) -> &[SymKey] {
        &self.keys
    }

    pub fn key_for_interval(&self, i: u64) -> Result<SymKey, TeslaError> {
        if i == 0 || i > self.length() {
            return Err(TeslaError::IntervalOutOfRange { index: i, len: self.length() });
        }
        Ok(self.keys[i as usize])
    }
}
