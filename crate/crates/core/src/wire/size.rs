//! Analytical packet sizes per device role, and a comparison of those
//! figures against packets the simulator actually emitted.
//!
//! The model formulas are kept exactly as published even where they disagree
//! with the concrete layout. The direct reply is listed at 286 bits while its
//! fields add up to 284, and the relayed request formula is 4 bits above the
//! concrete relayed request. [`concrete_size_check`] reports those gaps.

use std::fmt;

use thiserror::Error;

use super::Packet;
use crate::Scenario;

pub const DEFAULT_KEY_SIZE_BITS: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SizeRole {
    SourceDirect,
    SourceRelaying,
    DestinationDirect,
    DestinationRelaying,
    IntermediateRequest,
    IntermediateReply,
}

impl SizeRole {
    pub const ALL: [SizeRole; 6] = [
        SizeRole::SourceDirect,
        SizeRole::SourceRelaying,
        SizeRole::DestinationDirect,
        SizeRole::DestinationRelaying,
        SizeRole::IntermediateRequest,
        SizeRole::IntermediateReply,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SizeRole::SourceDirect => "source_direct",
            SizeRole::SourceRelaying => "source_relaying",
            SizeRole::DestinationDirect => "destination_direct",
            SizeRole::DestinationRelaying => "destination_relaying",
            SizeRole::IntermediateRequest => "intermediate_request",
            SizeRole::IntermediateReply => "intermediate_reply",
        }
    }
}

impl fmt::Display for SizeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("size model needs n >= 2, got {0}")]
pub struct SizeError(pub u64);

/// Packet size in bits for `role` on an `n`-node path, `ks` being the TESLA
/// key size in bits.
pub fn model_size(role: SizeRole, n: u64, ks: u64) -> Result<u64, SizeError> {
    if n < 2 {
        return Err(SizeError(n));
    }
    Ok(match role {
        SizeRole::SourceDirect | SizeRole::SourceRelaying => 544,
        SizeRole::DestinationDirect => 286,
        SizeRole::DestinationRelaying => 28 + (n - 2) * 8 + (n - 1) * 256,
        SizeRole::IntermediateRequest => 28 + (n - 1) * 8 + n * 256,
        SizeRole::IntermediateReply => 12 + 8 * n + (n - 1) * 256 + (n - 2) * ks,
    })
}

/// Whole bytes, rounding down the way the published maxima do.
pub fn floor_bytes(bits: u64) -> u64 {
    bits / 8
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeDelta {
    pub role: SizeRole,
    /// Path length the packet corresponds to (`hops + 2`).
    pub n: u64,
    pub measured_bits: u64,
    pub model_bits: u64,
}

impl SizeDelta {
    /// `measured - model`.
    pub fn delta(&self) -> i64 {
        self.measured_bits as i64 - self.model_bits as i64
    }
}

/// Classifies each emitted packet by the role that produced it and compares
/// its exact bit length with [`model_size`]. Intermediate replies are only
/// compared once every relay key has been appended, which is the size the
/// model describes. Key disclosures have no model row and are skipped.
pub fn concrete_size_check<'a>(scenario: Scenario, packets: impl IntoIterator<Item = &'a Packet>) -> Vec<SizeDelta> {
    let mut out = Vec::new();
    for p in packets {
        let (role, n) = match p {
            Packet::Request(_) if scenario.is_relayed() => (SizeRole::SourceRelaying, 2),
            Packet::Request(_) => (SizeRole::SourceDirect, 2),
            Packet::RelayedRequest(r) => (SizeRole::IntermediateRequest, r.hops.len() as u64 + 2),
            Packet::Reply(_) => (SizeRole::DestinationDirect, 2),
            Packet::RelayedReply(r) if r.disclosed_keys.is_empty() => {
                (SizeRole::DestinationRelaying, r.hops.len() as u64 + 2)
            }
            Packet::RelayedReply(r) if r.disclosed_keys.len() == r.hops.len() => {
                (SizeRole::IntermediateReply, r.hops.len() as u64 + 2)
            }
            Packet::RelayedReply(_) | Packet::KeyDisclosure(_) => continue,
        };
        let model_bits = model_size(role, n, DEFAULT_KEY_SIZE_BITS).expect("n >= 2");
        out.push(SizeDelta { role, n, measured_bits: p.bit_len() as u64, model_bits });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const KS: u64 = DEFAULT_KEY_SIZE_BITS;

    #[test]
    fn published_maxima_at_twenty_nodes() {
        let req = model_size(SizeRole::IntermediateRequest, 20, KS).unwrap();
        assert_eq!(req, 5300);
        assert_eq!(floor_bytes(req), 662);
        let dst = model_size(SizeRole::DestinationRelaying, 20, KS).unwrap();
        assert_eq!(dst, 5036);
        assert_eq!(floor_bytes(dst), 629);
    }

    #[test]
    fn constant_rows() {
        for n in 2..30 {
            assert_eq!(model_size(SizeRole::SourceDirect, n, KS), Ok(544));
            assert_eq!(model_size(SizeRole::SourceRelaying, n, KS), Ok(544));
            assert_eq!(model_size(SizeRole::DestinationDirect, n, KS), Ok(286));
        }
    }

    #[test]
    fn relaying_destination_at_two_nodes_is_284() {
        assert_eq!(model_size(SizeRole::DestinationRelaying, 2, KS), Ok(284));
    }

    #[test]
    fn request_grows_264_per_node() {
        for n in 2..40 {
            let a = model_size(SizeRole::IntermediateRequest, n, KS).unwrap();
            let b = model_size(SizeRole::IntermediateRequest, n + 1, KS).unwrap();
            assert_eq!(b - a, 264);
        }
    }

    #[test]
    fn key_size_only_moves_intermediate_reply() {
        assert_eq!(
            model_size(SizeRole::IntermediateReply, 5, 128).unwrap() + 3 * 128,
            model_size(SizeRole::IntermediateReply, 5, 256).unwrap()
        );
    }

    #[test]
    fn n_below_two_rejected() {
        assert_eq!(model_size(SizeRole::SourceDirect, 1, KS), Err(SizeError(1)));
    }
}
