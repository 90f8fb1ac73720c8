use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::Scenario;

/// Operation categories in the computation cost table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Enc,
    Dec,
    H,
    Mul,
    EO,
    PA,
    Div,
    PO,
}

impl Term {
    pub const ALL: [Term; 8] = [Term::Enc, Term::Dec, Term::H, Term::Mul, Term::EO, Term::PA, Term::Div, Term::PO];

    pub fn name(self) -> &'static str {
        match self {
            Term::Enc => "Enc",
            Term::Dec => "Dec",
            Term::H => "H",
            Term::Mul => "Mul",
            Term::EO => "EO",
            Term::PA => "PA",
            Term::Div => "Div",
            Term::PO => "PO",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rows of the cost table: the four proposed protocols and the competitors
/// they are compared against. Competitors are evaluated for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CostProtocol {
    Sdga,
    Ppaka,
    Graad,
    LRsa,
    Seds,
    Dd2d,
    Rd2d,
    Dd2dw,
    Rd2dw,
}

impl CostProtocol {
    pub const ALL: [CostProtocol; 9] = [
        CostProtocol::Sdga,
        CostProtocol::Ppaka,
        CostProtocol::Graad,
        CostProtocol::LRsa,
        CostProtocol::Seds,
        CostProtocol::Dd2d,
        CostProtocol::Rd2d,
        CostProtocol::Dd2dw,
        CostProtocol::Rd2dw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostProtocol::Sdga => "SDGA",
            CostProtocol::Ppaka => "PPAKA",
            CostProtocol::Graad => "GRAAD",
            CostProtocol::LRsa => "L_RSA",
            CostProtocol::Seds => "SeDS",
            CostProtocol::Dd2d => "DD2D",
            CostProtocol::Rd2d => "RD2D",
            CostProtocol::Dd2dw => "DD2DW",
            CostProtocol::Rd2dw => "RD2DW",
        }
    }

    pub fn is_proposed(self) -> bool {
        self.scenario().is_some()
    }

    pub fn scenario(self) -> Option<Scenario> {
        match self {
            CostProtocol::Dd2d => Some(Scenario::Dd2d),
            CostProtocol::Rd2d => Some(Scenario::Rd2d),
            CostProtocol::Dd2dw => Some(Scenario::Dd2dw),
            CostProtocol::Rd2dw => Some(Scenario::Rd2dw),
            _ => None,
        }
    }

    /// The symbolic row, with `n` as the device count.
    pub fn symbolic(self) -> &'static str {
        match self {
            CostProtocol::Sdga => "3(2n-1)PA+5nEO+(4n-1)H+2(2n-1)Mul",
            CostProtocol::Ppaka => "2(2n-1)EO+(n^2+3n-4)H+(2n^2-3n+1)Mul",
            CostProtocol::Graad => "2nPA+7(3n-2)H+nEnc+nDec+3(n-1)PO+8(n-1)EO+2(n-1)Mul",
            CostProtocol::LRsa => "6nPO+(13n-7)H+(3n-1)Mul+2Div",
            CostProtocol::Seds => "2PA+(5n-2)EO+Dec+(2n+1)H+4(n-1)PO+2(n-1)Enc",
            CostProtocol::Dd2d => "3Enc+3H+Dec",
            CostProtocol::Rd2d => "3Enc+(2n+1)H+Dec",
            CostProtocol::Dd2dw => "Enc+3H+Dec",
            CostProtocol::Rd2dw => "Enc+(2n-1)H+Dec",
        }
    }
}

impl From<Scenario> for CostProtocol {
    fn from(s: Scenario) -> Self {
        match s {
            Scenario::Dd2d => CostProtocol::Dd2d,
            Scenario::Rd2d => CostProtocol::Rd2d,
            Scenario::Dd2dw => CostProtocol::Dd2dw,
            Scenario::Rd2dw => CostProtocol::Rd2dw,
        }
    }
}

impl fmt::Display for CostProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("cost formulas need n >= 2, got {0}")]
    TooFewNodes(u64),
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
}

impl FromStr for CostProtocol {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace([' ', '-'], "_");
        CostProtocol::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(&norm) || p.name().replace('_', "").eq_ignore_ascii_case(&norm))
            .ok_or_else(|| CostError::UnknownProtocol(s.to_owned()))
    }
}

/// A cost row evaluated at a concrete `n`. Terms keep the table's order for
/// display; zero coefficients are dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostFormula {
    pub protocol: CostProtocol,
    pub n: u64,
    terms: Vec<(Term, u64)>,
}

impl CostFormula {
    pub fn coeff(&self, term: Term) -> u64 {
        self.terms.iter().find(|(t, _)| *t == term).map_or(0, |(_, c)| *c)
    }

    pub fn terms(&self) -> &[(Term, u64)] {
        &self.terms
    }

    pub fn to_map(&self) -> BTreeMap<Term, u64> {
        self.terms.iter().copied().collect()
    }
}

impl fmt::Display for CostFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (t, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{c}{t}")?;
        }
        Ok(())
    }
}

/// Evaluates the cost row of `protocol` at `n` devices.
pub fn eval_cost(protocol: CostProtocol, n: u64) -> Result<CostFormula, CostError> {
    use Term::*;
    if n < 2 {
        return Err(CostError::TooFewNodes(n));
    }
    let terms = match protocol {
        CostProtocol::Sdga => vec![(PA, 3 * (2 * n - 1)), (EO, 5 * n), (H, 4 * n - 1), (Mul, 2 * (2 * n - 1))],
        CostProtocol::Ppaka => vec![(EO, 2 * (2 * n - 1)), (H, n * n + 3 * n - 4), (Mul, 2 * n * n - 3 * n + 1)],
        CostProtocol::Graad => vec![
            (PA, 2 * n),
            (H, 7 * (3 * n - 2)),
            (Enc, n),
            (Dec, n),
            (PO, 3 * (n - 1)),
            (EO, 8 * (n - 1)),
            (Mul, 2 * (n - 1)),
        ],
        CostProtocol::LRsa => vec![(PO, 6 * n), (H, 13 * n - 7), (Mul, 3 * n - 1), (Div, 2)],
        CostProtocol::Seds => {
            vec![(PA, 2), (EO, 5 * n - 2), (Dec, 1), (H, 2 * n + 1), (PO, 4 * (n - 1)), (Enc, 2 * (n - 1))]
        }
        CostProtocol::Dd2d => vec![(Enc, 3), (H, 3), (Dec, 1)],
        CostProtocol::Rd2d => vec![(Enc, 3), (H, 2 * n + 1), (Dec, 1)],
        CostProtocol::Dd2dw => vec![(Enc, 1), (H, 3), (Dec, 1)],
        CostProtocol::Rd2dw => vec![(Enc, 1), (H, 2 * n - 1), (Dec, 1)],
    };
    Ok(CostFormula { protocol, n, terms: terms.into_iter().filter(|(_, c)| *c > 0).collect() })
}

/// One line per protocol: name, symbolic row and its value at `n`.
pub fn cost_table(n: u64) -> Result<String, CostError> {
    let mut s = format!("{:<6}  {:<52}  n={n}\n", "proto", "formula");
    for p in CostProtocol::ALL {
        s.push_str(&format!("{:<6}  {:<52}  {}\n", p.name(), p.symbolic(), eval_cost(p, n)?));
    }
    Ok(s)
}
