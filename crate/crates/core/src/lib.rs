//! Secure device-to-device (D2D) communication for the four D2D scenarios:
//! direct and relayed, each with and without cellular infrastructure.
//!
//! Source and destination agree on a session key through the MME (or use a
//! pre-shared key out of coverage), relays authenticate their contribution
//! with per-hop MACs keyed from TESLA one-way chains, and an ARIADNE-style hash
//! chain binds the ordered relay list to the source's MAC.
//!
//! The crate is split into:
//!
//! - [`crypto`]: instrumented SHA-256 based primitives
//! - [`tesla`]: one-way key chains and the disclosure schedule
//! - [`wire`]: bit-exact packet layouts and the analytical size model
//! - [`roles`]: source, destination, relay and MME state machines
//! - [`netsim`]: deterministic slotted simulator with a Dolev-Yao adversary
//! - [`properties`]: reachability, correspondence, secrecy and key-agreement
//!   checks over simulator traces
//! - [`analysis`]: computation cost formulas and communication overhead model

use std::fmt;
use std::str::FromStr;

pub mod analysis;
pub mod crypto;
pub mod netsim;
pub mod properties;
pub mod roles;
pub mod tesla;
pub mod wire;

/// Simulator time, in slots.
pub type Slot = u64;

/// 8-bit device identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u8);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The four D2D protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// Direct, with cellular infrastructure.
    Dd2d,
    /// Relayed, with cellular infrastructure.
    Rd2d,
    /// Direct, without cellular infrastructure.
    Dd2dw,
    /// Relayed, without cellular infrastructure.
    Rd2dw,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Dd2d, Scenario::Rd2d, Scenario::Dd2dw, Scenario::Rd2dw];

    pub fn has_infrastructure(self) -> bool {
        matches!(self, Scenario::Dd2d | Scenario::Rd2d)
    }

    pub fn is_relayed(self) -> bool {
        matches!(self, Scenario::Rd2d | Scenario::Rd2dw)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Dd2d => "DD2D",
            Scenario::Rd2d => "RD2D",
            Scenario::Dd2dw => "DD2DW",
            Scenario::Rd2dw => "RD2DW",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scenario {0:?}")]
pub struct UnknownScenario(pub String);

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownScenario(s.to_owned()))
    }
}
