//! Packet layouts.
//!
//! Every packet starts with a 4-bit message type. Fields are packed
//! big-endian with no alignment and the final byte is zero-padded.
//!
//! | packet            | layout (bits)                                                   |
//! |-------------------|-----------------------------------------------------------------|
//! | request           | type 4, S 8, D 8, N 4, id 4, t 4, c 256, h0 256 = 544            |
//! | relayed request   | request, then per hop: relay 8, M_i 256                          |
//! | reply             | type 4, D 8, S 8, t 4, id 4, reply MAC 256 = 284                 |
//! | relayed reply     | reply, per hop: relay 8, M_i 256, then per disclosed key: 256    |
//! | key disclosure    | type 4, owner 8, interval 16, key 256 = 284                      |
//!
//! Hop and key counts are not carried explicitly. A relayed request is
//! `68 + 33h` bytes. A relayed reply is `36 + 33h + 32k` bytes, which is
//! unambiguous because `33 ≡ 1 (mod 32)` and `h` is capped at [`MAX_HOPS`].

mod bits;
pub mod size;

use thiserror::Error;

use crate::crypto::{MacTag, Nonce, BLOCK_LEN};
use crate::NodeId;
use bits::{BitReader, BitWriter};

pub const MSG_REQUEST: u8 = 0x1;
pub const MSG_REPLY: u8 = 0x2;
pub const MSG_KEY_DISCLOSURE: u8 = 0x3;

/// Largest hop list a packet may carry.
pub const MAX_HOPS: usize = 31;

pub const REQUEST_BITS: usize = 544;
pub const REPLY_BITS: usize = 284;
pub const HOP_BITS: usize = 8 + 256;
pub const KEY_BITS: usize = 256;
pub const KEY_DISCLOSURE_BITS: usize = 284;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("field {field} value {value} does not fit in {width} bits")]
    FieldOverflow { field: &'static str, value: u64, width: u32 },
    #[error("packet truncated: {0} bytes")]
    TruncatedPacket(usize),
    #[error("length {len} is not a valid size for message type {msg_type:#x}")]
    BadLength { msg_type: u8, len: usize },
    #[error("unknown message type {0:#x}")]
    UnknownMessageType(u8),
    #[error("relayed packets need at least one hop")]
    EmptyRoute,
    #[error("hop list of {0} exceeds the maximum of {MAX_HOPS}")]
    TooManyHops(usize),
    #[error("non-zero padding bits")]
    NonZeroPadding,
}

fn check_width(field: &'static str, value: u64, width: u32) -> Result<(), WireError> {
    if value >> width != 0 {
        return Err(WireError::FieldOverflow { field, value, width });
    }
    Ok(())
}

/// Request from source to destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestPacket {
    pub src: NodeId,
    pub dst: NodeId,
    pub nonce: Nonce,
    /// 4-bit packet id.
    pub pkt_id: u8,
    /// 4-bit time tag (send slot mod 16).
    pub t: u8,
    pub ciphertext: [u8; BLOCK_LEN],
    pub h0: MacTag,
}

impl RequestPacket {
    /// Bytes covered by `h0`: every header field and the ciphertext.
    pub fn mac_input(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(6 + BLOCK_LEN);
        v.extend_from_slice(&[MSG_REQUEST, self.src.0, self.dst.0, self.nonce.value(), self.pkt_id, self.t]);
        v.extend_from_slice(&self.ciphertext);
        v
    }

    fn validate(&self) -> Result<(), WireError> {
        check_width("pkt_id", self.pkt_id.into(), 4)?;
        check_width("t", self.t.into(), 4)
    }

    fn write(&self, w: &mut BitWriter) {
        w.put(MSG_REQUEST.into(), 4);
        w.put(self.src.0.into(), 8);
        w.put(self.dst.0.into(), 8);
        w.put(self.nonce.value().into(), 4);
        w.put(self.pkt_id.into(), 4);
        w.put(self.t.into(), 4);
        w.put_bytes(&self.ciphertext);
        w.put_bytes(&self.h0.0);
    }

    fn read(r: &mut BitReader<'_>) -> Option<Self> {
        let _ty = r.take(4)?;
        Some(Self {
            src: NodeId(r.take(8)? as u8),
            dst: NodeId(r.take(8)? as u8),
            nonce: Nonce::new(r.take(4)? as u8).ok()?,
            pkt_id: r.take(4)? as u8,
            t: r.take(4)? as u8,
            ciphertext: r.take_block()?,
            h0: MacTag(r.take_block()?),
        })
    }
}

/// One relay's contribution to the route record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub relay: NodeId,
    pub mac: MacTag,
}

impl Hop {
    fn write(&self, w: &mut BitWriter) {
        w.put(self.relay.0.into(), 8);
        w.put_bytes(&self.mac.0);
    }

    fn read(r: &mut BitReader<'_>) -> Option<Self> {
        Some(Self { relay: NodeId(r.take(8)? as u8), mac: MacTag(r.take_block()?) })
    }
}

/// Request after one or more relays appended `(id, M_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayedRequestPacket {
    pub base: RequestPacket,
    /// In traversal order.
    pub hops: Vec<Hop>,
}

/// Bytes covered by the MAC of the relay at position `prior.len()`:
/// every field of the packet it received, its own id and its hash-chain
/// value `h_i`.
pub fn relay_mac_input(base: &RequestPacket, prior: &[Hop], relay: NodeId, h_i: &[u8; BLOCK_LEN]) -> Vec<u8> {
    let mut v = base.mac_input();
    v.extend_from_slice(&base.h0.0);
    for hop in prior {
        v.push(hop.relay.0);
        v.extend_from_slice(&hop.mac.0);
    }
    v.push(relay.0);
    v.extend_from_slice(h_i);
    v
}

/// Destination's reply. `destination` and `source` name the protocol roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplyPacket {
    pub destination: NodeId,
    pub source: NodeId,
    pub t: u8,
    pub pkt_id: u8,
    pub reply_mac: MacTag,
}

impl ReplyPacket {
    pub fn mac_input(&self) -> Vec<u8> {
        vec![MSG_REPLY, self.destination.0, self.source.0, self.t, self.pkt_id]
    }

    fn validate(&self) -> Result<(), WireError> {
        check_width("pkt_id", self.pkt_id.into(), 4)?;
        check_width("t", self.t.into(), 4)
    }

    fn write(&self, w: &mut BitWriter) {
        w.put(MSG_REPLY.into(), 4);
        w.put(self.destination.0.into(), 8);
        w.put(self.source.0.into(), 8);
        w.put(self.t.into(), 4);
        w.put(self.pkt_id.into(), 4);
        w.put_bytes(&self.reply_mac.0);
    }

    fn read(r: &mut BitReader<'_>) -> Option<Self> {
        let _ty = r.take(4)?;
        Some(Self {
            destination: NodeId(r.take(8)? as u8),
            source: NodeId(r.take(8)? as u8),
            t: r.take(4)? as u8,
            pkt_id: r.take(4)? as u8,
            reply_mac: MacTag(r.take_block()?),
        })
    }
}

/// Reply on the relayed path: carries the route record back to the source
/// and collects each relay's TESLA key, last relay first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayedReplyPacket {
    pub base: ReplyPacket,
    pub hops: Vec<Hop>,
    pub disclosed_keys: Vec<[u8; BLOCK_LEN]>,
}

/// A TESLA key released by its owner after the disclosure delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyDisclosurePacket {
    pub owner: NodeId,
    pub interval: u16,
    pub key: [u8; BLOCK_LEN],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Request(RequestPacket),
    RelayedRequest(RelayedRequestPacket),
    Reply(ReplyPacket),
    RelayedReply(RelayedReplyPacket),
    KeyDisclosure(KeyDisclosurePacket),
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Request(_) | Packet::RelayedRequest(_) => PacketKind::Request,
            Packet::Reply(_) | Packet::RelayedReply(_) => PacketKind::Reply,
            Packet::KeyDisclosure(_) => PacketKind::Disclosure,
        }
    }

    /// Exact size in bits before byte padding.
    pub fn bit_len(&self) -> usize {
        match self {
            Packet::Request(_) => REQUEST_BITS,
            Packet::RelayedRequest(p) => REQUEST_BITS + HOP_BITS * p.hops.len(),
            Packet::Reply(_) => REPLY_BITS,
            Packet::RelayedReply(p) => REPLY_BITS + HOP_BITS * p.hops.len() + KEY_BITS * p.disclosed_keys.len(),
            Packet::KeyDisclosure(_) => KEY_DISCLOSURE_BITS,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut w = BitWriter::with_capacity(self.bit_len());
        match self {
            Packet::Request(p) => {
                p.validate()?;
                p.write(&mut w);
            }
            Packet::RelayedRequest(p) => {
                p.base.validate()?;
                check_hops(p.hops.len())?;
                p.base.write(&mut w);
                p.hops.iter().for_each(|h| h.write(&mut w));
            }
            Packet::Reply(p) => {
                p.validate()?;
                p.write(&mut w);
            }
            Packet::RelayedReply(p) => {
                p.base.validate()?;
                check_hops(p.hops.len())?;
                p.base.write(&mut w);
                p.hops.iter().for_each(|h| h.write(&mut w));
                p.disclosed_keys.iter().for_each(|k| w.put_bytes(k));
            }
            Packet::KeyDisclosure(p) => {
                w.put(MSG_KEY_DISCLOSURE.into(), 4);
                w.put(p.owner.0.into(), 8);
                w.put(p.interval.into(), 16);
                w.put_bytes(&p.key);
            }
        }
        debug_assert_eq!(w.bit_len(), self.bit_len());
        Ok(w.finish())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let Some(&first) = bytes.first() else {
            return Err(WireError::TruncatedPacket(0));
        };
        let msg_type = first >> 4;
        let len = bytes.len();
        let bad_len = || WireError::BadLength { msg_type, len };
        let mut r = BitReader::new(bytes);
        let packet = match msg_type {
            MSG_REQUEST => {
                if len < REQUEST_BITS / 8 {
                    return Err(WireError::TruncatedPacket(len));
                }
                let extra = len - REQUEST_BITS / 8;
                if !extra.is_multiple_of(HOP_BITS / 8) {
                    return Err(bad_len());
                }
                let hop_count = extra / (HOP_BITS / 8);
                if hop_count > 0 {
                    check_hops(hop_count).map_err(|_| bad_len())?;
                }
                let base = RequestPacket::read(&mut r).ok_or(WireError::TruncatedPacket(len))?;
                if hop_count == 0 {
                    Packet::Request(base)
                } else {
                    let hops = (0..hop_count).map(|_| Hop::read(&mut r)).collect::<Option<Vec<_>>>().ok_or(bad_len())?;
                    Packet::RelayedRequest(RelayedRequestPacket { base, hops })
                }
            }
            MSG_REPLY => {
                let base_len = REPLY_BITS.div_ceil(8);
                if len < base_len {
                    return Err(WireError::TruncatedPacket(len));
                }
                let extra = len - base_len;
                let hop_count = extra % 32;
                let rest = extra.checked_sub(33 * hop_count).ok_or(bad_len())?;
                let key_count = rest / 32;
                let base = ReplyPacket::read(&mut r).ok_or(WireError::TruncatedPacket(len))?;
                if hop_count == 0 && key_count == 0 {
                    Packet::Reply(base)
                } else {
                    if hop_count == 0 {
                        return Err(bad_len());
                    }
                    let hops = (0..hop_count).map(|_| Hop::read(&mut r)).collect::<Option<Vec<_>>>().ok_or(bad_len())?;
                    let disclosed_keys =
                        (0..key_count).map(|_| r.take_block()).collect::<Option<Vec<_>>>().ok_or(bad_len())?;
                    Packet::RelayedReply(RelayedReplyPacket { base, hops, disclosed_keys })
                }
            }
            MSG_KEY_DISCLOSURE => {
                if len != KEY_DISCLOSURE_BITS.div_ceil(8) {
                    return Err(if len < 36 { WireError::TruncatedPacket(len) } else { bad_len() });
                }
                let _ty = r.take(4);
                Packet::KeyDisclosure(KeyDisclosurePacket {
                    owner: NodeId(r.take(8).ok_or(bad_len())? as u8),
                    interval: r.take(16).ok_or(bad_len())? as u16,
                    key: r.take_block().ok_or(bad_len())?,
                })
            }
            other => return Err(WireError::UnknownMessageType(other)),
        };
        if r.remaining() >= 8 {
            return Err(bad_len());
        }
        let pad = r.remaining() as u32;
        if r.take(pad) != Some(0) {
            return Err(WireError::NonZeroPadding);
        }
        Ok(packet)
    }
}

fn check_hops(count: usize) -> Result<(), WireError> {
    match count {
        0 => Err(WireError::EmptyRoute),
        c if c > MAX_HOPS => Err(WireError::TooManyHops(c)),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PacketKind {
    Request,
    Reply,
    Disclosure,
}

impl PacketKind {
    pub fn name(self) -> &'static str {
        match self {
            PacketKind::Request => "request",
            PacketKind::Reply => "reply",
            PacketKind::Disclosure => "disclosure",
        }
    }
}

/// One packet per line, lowercase hex, no separators.
pub fn hex_dump<'a>(packets: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut out = String::new();
    for p in packets {
        out.push_str(&hex::encode(p));
        out.push('\n');
    }
    out
}
