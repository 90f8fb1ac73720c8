//! Symmetric primitives used by every protocol role.
//!
//! All primitives are built on SHA-256:
//!
//! - `hash(x)      = SHA-256(x)`
//! - `mac(k, x)    = SHA-256(k || x)` (prefix-key construction)
//! - `kdf(k, n)    = SHA-256(k || n)` with the 4-bit nonce encoded as one byte
//! - `encrypt(k,p) = SHA-256(k || "d2d/enc") XOR pad32(p)`
//!
//! The encryption is a deterministic single-block construction with a
//! 256-bit output. It exists so that packet sizes and operation counts line up
//! with the protocol's accounting; it is not a secure cipher.
//!
//! Protocol code goes through [`Crypto`], which tallies every call into the
//! `enc`, `dec` and `hash` categories, split by the [`Stage`] that was active
//! when the call was made. The [`raw`] functions compute the same values
//! without touching any counter; the attacker-knowledge closure and test
//! oracles use those.

use std::cell::Cell;
use std::fmt;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Width of every digest, tag, key and ciphertext block, in bytes.
pub const BLOCK_LEN: usize = 32;

const ENC_TAG: &[u8] = b"d2d/enc";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("plaintext of {0} bytes exceeds the 32-byte block")]
    OversizedPlaintext(usize),
    #[error("ciphertext must be exactly 32 bytes, got {0}")]
    MalformedCiphertext(usize),
    #[error("nonce value {0} does not fit in 4 bits")]
    NonceOutOfRange(u8),
}

macro_rules! block_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; BLOCK_LEN]);

        impl $name {
            pub const fn from_bytes(bytes: [u8; BLOCK_LEN]) -> Self {
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; BLOCK_LEN] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({}..)", stringify!($name), hex::encode(&self.0[..4]))
            }
        }
    };
}

block_newtype!(
    /// 256-bit hash output.
    Digest
);
block_newtype!(
    /// 256-bit message authentication code.
    MacTag
);

/// What a [`SymKey`] is used for. Carried for bookkeeping only; it never
/// influences the primitive outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyKind {
    /// `K`, issued by the MME.
    Session,
    /// `K'`, derived from `K` and the request nonce.
    Derived,
    /// A key from a TESLA one-way chain.
    Tesla,
    /// Out-of-band key shared by source and destination when there is no
    /// cellular coverage.
    Preshared,
}

/// 256-bit symmetric key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymKey {
    pub bytes: [u8; BLOCK_LEN],
    pub kind: KeyKind,
}

impl SymKey {
    pub const fn new(bytes: [u8; BLOCK_LEN], kind: KeyKind) -> Self {
        Self { bytes, kind }
    }
}

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymKey({:?}, {}..)", self.kind, hex::encode(&self.bytes[..4]))
    }
}

/// Request nonce `N`. Four bits on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Nonce(u8);

impl Nonce {
    pub const MAX: u8 = 0x0f;

    pub fn new(value: u8) -> Result<Self, CryptoError> {
        if value > Self::MAX {
            return Err(CryptoError::NonceOutOfRange(value));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

/// Primitive computations with no instrumentation.
pub mod raw {
    use super::*;

    pub fn sha256(parts: &[&[u8]]) -> [u8; BLOCK_LEN] {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        h.finalize().into()
    }

    pub fn hash(data: &[u8]) -> Digest {
        Digest(sha256(&[data]))
    }

    pub fn mac(key: &[u8; BLOCK_LEN], data: &[u8]) -> MacTag {
        MacTag(sha256(&[key, data]))
    }

    pub fn kdf(key: &[u8; BLOCK_LEN], nonce: Nonce) -> SymKey {
        SymKey::new(sha256(&[key, &[nonce.value()]]), KeyKind::Derived)
    }

    fn keystream(key: &[u8; BLOCK_LEN]) -> [u8; BLOCK_LEN] {
        sha256(&[key, ENC_TAG])
    }

    pub fn encrypt(key: &[u8; BLOCK_LEN], plaintext: &[u8]) -> Result<[u8; BLOCK_LEN], CryptoError> {
        if plaintext.len() > BLOCK_LEN {
            return Err(CryptoError::OversizedPlaintext(plaintext.len()));
        }
        let mut out = keystream(key);
        for (o, p) in out.iter_mut().zip(plaintext) {
            *o ^= p;
        }
        Ok(out)
    }

    pub fn decrypt(key: &[u8; BLOCK_LEN], ciphertext: &[u8]) -> Result<[u8; BLOCK_LEN], CryptoError> {
        let block: [u8; BLOCK_LEN] =
            ciphertext.try_into().map_err(|_| CryptoError::MalformedCiphertext(ciphertext.len()))?;
        let mut out = keystream(key);
        for (o, c) in out.iter_mut().zip(block) {
            *o ^= c;
        }
        Ok(out)
    }
}

/// Protocol phase an operation is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    /// Offline TESLA chain generation.
    TeslaSetup,
    /// Authenticating a disclosed TESLA key against its commitment.
    TeslaAuth,
    /// Request construction, relay processing, destination validation and
    /// reply construction.
    Exchange,
    /// The source's processing of the returned reply.
    Acceptance,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::TeslaSetup, Stage::TeslaAuth, Stage::Exchange, Stage::Acceptance];

    fn index(self) -> usize {
        self as usize
    }
}

/// Operation tallies by category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounters {
    pub enc: u64,
    pub dec: u64,
    /// Hash and MAC evaluations.
    pub hash: u64,
}

impl std::ops::AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.enc += rhs.enc;
        self.dec += rhs.dec;
        self.hash += rhs.hash;
    }
}

/// Per-stage counters for one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageCounters([OpCounters; 4]);

impl StageCounters {
    pub fn stage(&self, stage: Stage) -> OpCounters {
        self.0[stage.index()]
    }

    pub fn total(&self) -> OpCounters {
        self.sum(&Stage::ALL)
    }

    pub fn sum(&self, stages: &[Stage]) -> OpCounters {
        let mut acc = OpCounters::default();
        for s in stages {
            acc += self.0[s.index()];
        }
        acc
    }
}

#[derive(Clone, Copy)]
enum Category {
    Enc,
    Dec,
    Hash,
}

/// Instrumented facade over [`raw`]. One instance per simulation run.
#[derive(Debug, Default)]
pub struct Crypto {
    counters: Cell<StageCounters>,
    stage: Cell<Option<Stage>>,
}

impl Crypto {
    pub fn new() -> Self {
        Self::default()
    }

    fn bump(&self, cat: Category) {
        let stage = self.stage.get().unwrap_or(Stage::Exchange);
        let mut all = self.counters.get();
        let c = &mut all.0[stage.index()];
        match cat {
            Category::Enc => c.enc += 1,
            Category::Dec => c.dec += 1,
            Category::Hash => c.hash += 1,
        }
        self.counters.set(all);
    }

    /// Runs `f` with every operation attributed to `stage`. Nested calls
    /// restore the outer stage on return.
    pub fn in_stage<R>(&self, stage: Stage, f: impl FnOnce() -> R) -> R {
        let prev = self.stage.replace(Some(stage));
        let out = f();
        self.stage.set(prev);
        out
    }

    pub fn counters(&self) -> StageCounters {
        self.counters.get()
    }

    pub fn reset(&self) {
        self.counters.set(StageCounters::default());
    }

    pub fn hash(&self, data: &[u8]) -> Digest {
        self.bump(Category::Hash);
        raw::hash(data)
    }

    pub fn mac(&self, key: &SymKey, data: &[u8]) -> MacTag {
        self.bump(Category::Hash);
        raw::mac(&key.bytes, data)
    }

    /// Checks a tag by recomputing it. Counts as one MAC evaluation.
    pub fn verify_mac(&self, key: &SymKey, data: &[u8], tag: &MacTag) -> bool {
        self.mac(key, data) == *tag
    }

    pub fn encrypt(&self, key: &SymKey, plaintext: &[u8]) -> Result<[u8; BLOCK_LEN], CryptoError> {
        let out = raw::encrypt(&key.bytes, plaintext)?;
        self.bump(Category::Enc);
        Ok(out)
    }

    pub fn decrypt(&self, key: &SymKey, ciphertext: &[u8]) -> Result<[u8; BLOCK_LEN], CryptoError> {
        let out = raw::decrypt(&key.bytes, ciphertext)?;
        self.bump(Category::Dec);
        Ok(out)
    }

    /// `K' = H(K || N)`. Tallied as an encryption: the key derivation is one
    /// of the symmetric operations in the cost accounting.
    pub fn derive_session_key(&self, key: &SymKey, nonce: Nonce) -> SymKey {
        debug_assert!(matches!(key.kind, KeyKind::Session | KeyKind::Preshared));
        self.bump(Category::Enc);
        raw::kdf(&key.bytes, nonce)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn key(rng: &mut ChaCha8Rng) -> SymKey {
        SymKey::new(rng.gen(), KeyKind::Session)
    }

    #[test]
    fn hash_is_deterministic_and_32_bytes() {
        let c = Crypto::new();
        assert_eq!(c.hash(b"abc"), c.hash(b"abc"));
        assert_eq!(c.hash(b"").0.len(), 32);
        assert_eq!(c.counters().total().hash, 3);
    }

    #[test]
    fn appended_byte_changes_hash() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = BTreeSet::new();
        for _ in 0..1000 {
            let len = rng.gen_range(16..64);
            let x: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let mut y = x.clone();
            y.push(0x01);
            let (hx, hy) = (raw::hash(&x), raw::hash(&y));
            assert_ne!(hx, hy);
            seen.insert(hy);
        }
        assert_eq!(seen.len(), 1000);
    }

    #[test]
    fn mac_depends_on_key() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let msg = b"request fields";
        for _ in 0..1000 {
            let (k1, k2) = (key(&mut rng), key(&mut rng));
            assert_ne!(raw::mac(&k1.bytes, msg), raw::mac(&k2.bytes, msg));
        }
    }

    #[test]
    fn wrong_key_never_verifies() {
        let c = Crypto::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rejected = 0;
        for _ in 0..10_000 {
            let (k, wrong) = (key(&mut rng), key(&mut rng));
            let m: [u8; 24] = rng.gen();
            let tag = raw::mac(&k.bytes, &m);
            if !c.verify_mac(&wrong, &m, &tag) {
                rejected += 1;
            }
        }
        assert_eq!(rejected, 10_000);
    }

    #[test]
    fn encryption_round_trip_and_size() {
        let c = Crypto::new();
        let k = SymKey::new([7; 32], KeyKind::Derived);
        let m = *b"thirty-two bytes of application!";
        let ct = c.encrypt(&k, &m).unwrap();
        assert_eq!(ct.len(), 32);
        assert_eq!(c.encrypt(&k, &m).unwrap(), ct);
        assert_eq!(c.decrypt(&k, &ct).unwrap(), m);

        let short = b"hi";
        let pt = c.decrypt(&k, &c.encrypt(&k, short).unwrap()).unwrap();
        assert_eq!(&pt[..2], short);
        assert!(pt[2..].iter().all(|&b| b == 0));

        let counts = c.counters().total();
        assert_eq!((counts.enc, counts.dec, counts.hash), (3, 2, 0));
    }

    #[test]
    fn decrypt_with_other_key_garbles() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let (k, other) = (key(&mut rng), key(&mut rng));
            let m: [u8; 32] = rng.gen();
            let ct = raw::encrypt(&k.bytes, &m).unwrap();
            assert_ne!(raw::decrypt(&other.bytes, &ct).unwrap(), m);
        }
    }

    #[test]
    fn size_errors() {
        let c = Crypto::new();
        let k = SymKey::new([1; 32], KeyKind::Derived);
        assert_eq!(c.encrypt(&k, &[0; 33]), Err(CryptoError::OversizedPlaintext(33)));
        assert_eq!(c.decrypt(&k, &[0; 31]), Err(CryptoError::MalformedCiphertext(31)));
        assert_eq!(c.counters(), StageCounters::default());
    }

    #[test]
    fn kdf_separates_all_nonces() {
        let c = Crypto::new();
        let k = SymKey::new([9; 32], KeyKind::Session);
        let derived: BTreeSet<[u8; 32]> =
            (0..16).map(|n| c.derive_session_key(&k, Nonce::new(n).unwrap()).bytes).collect();
        assert_eq!(derived.len(), 16);
        let n3 = Nonce::new(3).unwrap();
        assert_eq!(c.derive_session_key(&k, n3), c.derive_session_key(&k, n3));
        assert_eq!(c.derive_session_key(&k, n3).kind, KeyKind::Derived);
        assert_eq!(c.counters().total().enc, 19);
        assert!(Nonce::new(16).is_err());
    }

    #[test]
    fn stages_partition_counts() {
        let c = Crypto::new();
        let k = SymKey::new([0; 32], KeyKind::Tesla);
        c.hash(b"x");
        c.in_stage(Stage::TeslaSetup, || {
            c.hash(b"y");
            c.in_stage(Stage::Acceptance, || c.mac(&k, b"z"));
            c.hash(b"w");
        });
        let counts = c.counters();
        assert_eq!(counts.stage(Stage::Exchange).hash, 1);
        assert_eq!(counts.stage(Stage::TeslaSetup).hash, 2);
        assert_eq!(counts.stage(Stage::Acceptance).hash, 1);
        assert_eq!(counts.total().hash, 4);
        c.reset();
        assert_eq!(c.counters().total(), OpCounters::default());
    }
}
