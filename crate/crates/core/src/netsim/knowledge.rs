//! What a radio eavesdropper can derive.
//!
//! Atoms are 32-byte values seen in packets or handed over by a test hook.
//! The closure adds `KDF(a, N)` for every atom and observed nonce, the
//! decryption of every observed ciphertext under every candidate key, and
//! one level of hashing. Uses the uncounted primitives so observing traffic
//! does not disturb the operation counts.

use std::collections::BTreeSet;

use crate::crypto::{raw, Nonce, BLOCK_LEN};
use crate::wire::Packet;

type Block = [u8; BLOCK_LEN];

/// Fixpoint rounds; two already reach everything the primitives allow.
const MAX_ROUNDS: usize = 4;

#[derive(Debug, Clone, Default)]
pub struct AttackerKnowledge {
    atoms: BTreeSet<Block>,
    ciphertexts: BTreeSet<Block>,
    nonces: BTreeSet<Nonce>,
}

impl AttackerKnowledge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn learn(&mut self, atom: Block) {
        self.atoms.insert(atom);
    }

    pub fn observe(&mut self, packet: &Packet) {
        match packet {
            Packet::Request(r) => {
                self.ciphertexts.insert(r.ciphertext);
                self.nonces.insert(r.nonce);
                self.atoms.insert(r.h0.0);
            }
            Packet::RelayedRequest(r) => {
                self.observe(&Packet::Request(r.base.clone()));
                self.atoms.extend(r.hops.iter().map(|h| h.mac.0));
            }
            Packet::Reply(r) => {
                self.atoms.insert(r.reply_mac.0);
            }
            Packet::RelayedReply(r) => {
                self.atoms.insert(r.base.reply_mac.0);
                self.atoms.extend(r.hops.iter().map(|h| h.mac.0));
                self.atoms.extend(r.disclosed_keys.iter().copied());
            }
            Packet::KeyDisclosure(d) => {
                self.atoms.insert(d.key);
            }
        }
    }

    pub fn closure(&self) -> BTreeSet<Block> {
        let mut known = self.atoms.clone();
        known.extend(self.atoms.iter().map(|a| raw::hash(a).0));
        for _ in 0..MAX_ROUNDS {
            let mut next = known.clone();
            let mut keys: Vec<Block> = known.iter().copied().collect();
            for a in &known {
                keys.extend(self.nonces.iter().map(|&n| raw::kdf(a, n).bytes));
            }
            for k in &keys {
                next.insert(*k);
                for c in &self.ciphertexts {
                    next.insert(raw::decrypt(k, c).expect("ciphertexts are one block"));
                }
            }
            if next.len() == known.len() {
                break;
            }
            known = next;
        }
        known
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::MacTag;
    use crate::wire::RequestPacket;
    use crate::NodeId;

    fn request(key: &Block, m: &Block, n: Nonce) -> RequestPacket {
        let derived = raw::kdf(key, n);
        RequestPacket {
            src: NodeId(1),
            dst: NodeId(2),
            nonce: n,
            pkt_id: 1,
            t: 0,
            ciphertext: raw::encrypt(&derived.bytes, m).unwrap(),
            h0: MacTag([3; 32]),
        }
    }

    #[test]
    fn eavesdropping_alone_does_not_reveal_message() {
        let (k, m) = ([1u8; 32], [2u8; 32]);
        let mut kn = AttackerKnowledge::new();
        kn.observe(&Packet::Request(request(&k, &m, Nonce::new(4).unwrap())));
        let c = kn.closure();
        assert!(!c.contains(&m));
        assert!(!c.contains(&k));
        assert!(c.contains(&[3; 32]));
    }

    #[test]
    fn leaked_session_key_reveals_message() {
        let (k, m) = ([1u8; 32], [2u8; 32]);
        let mut kn = AttackerKnowledge::new();
        kn.observe(&Packet::Request(request(&k, &m, Nonce::new(4).unwrap())));
        kn.learn(k);
        assert!(kn.closure().contains(&m));
    }
}
