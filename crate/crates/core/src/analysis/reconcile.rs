use std::fmt;

use super::cost::{eval_cost, CostError, CostProtocol, Term};
use crate::crypto::{OpCounters, Stage, StageCounters};
use crate::Scenario;

/// Which instrumented stages are compared against the cost formulas.
///
/// KDF always counts as Enc and every MAC as H; those mappings live in the
/// counters themselves. The frozen convention compares the exchange stage
/// alone: chain setup is offline precomputation, and TESLA key
/// authentication and the source's reply check are outside the table's
/// accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountingConvention {
    pub include_tesla_setup: bool,
    pub include_tesla_auth: bool,
    pub include_acceptance: bool,
}

impl CountingConvention {
    pub const FROZEN: CountingConvention =
        CountingConvention { include_tesla_setup: false, include_tesla_auth: false, include_acceptance: false };

    pub fn stages(&self) -> Vec<Stage> {
        let mut s = vec![Stage::Exchange];
        if self.include_tesla_setup {
            s.push(Stage::TeslaSetup);
        }
        if self.include_tesla_auth {
            s.push(Stage::TeslaAuth);
        }
        if self.include_acceptance {
            s.push(Stage::Acceptance);
        }
        s
    }

    pub fn measure(&self, counters: &StageCounters) -> OpCounters {
        counters.sum(&self.stages())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconcileRow {
    pub category: Term,
    pub formula: u64,
    pub measured: u64,
    /// `measured - formula`.
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconcileReport {
    pub protocol: Scenario,
    pub n: u64,
    pub convention: CountingConvention,
    pub rows: Vec<ReconcileRow>,
}

impl ReconcileReport {
    pub fn matches(&self) -> bool {
        self.rows.iter().all(|r| r.delta == 0)
    }

    pub fn row(&self, category: Term) -> Option<&ReconcileRow> {
        self.rows.iter().find(|r| r.category == category)
    }
}

impl fmt::Display for ReconcileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {} n={}", self.protocol, self.n)?;
        writeln!(f, "{:<8}  {:>7}  {:>8}  {:>5}", "category", "formula", "measured", "delta")?;
        for r in &self.rows {
            writeln!(f, "{:<8}  {:>7}  {:>8}  {:>+5}", r.category.name(), r.formula, r.measured, r.delta)?;
        }
        Ok(())
    }
}

/// Compares instrumented operation counts of one run with the cost formula
/// of `protocol` at `n` devices.
pub fn reconcile_counts(
    counters: &StageCounters,
    protocol: Scenario,
    n: u64,
    convention: CountingConvention,
) -> Result<ReconcileReport, CostError> {
    let formula = eval_cost(CostProtocol::from(protocol), n)?;
    let measured = convention.measure(counters);
    let rows = [(Term::Enc, measured.enc), (Term::Dec, measured.dec), (Term::H, measured.hash)]
        .into_iter()
        .map(|(category, m)| {
            let expected = formula.coeff(category);
            ReconcileRow { category, formula: expected, measured: m, delta: m as i64 - expected as i64 }
        })
        .collect();
    Ok(ReconcileReport { protocol, n, convention, rows })
}
