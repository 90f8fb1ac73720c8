//! Computation cost formulas, the communication overhead model and
//! reconciliation of instrumented operation counts against the formulas.

mod cost;
mod overhead;
mod reconcile;

pub use cost::{cost_table, eval_cost, CostError, CostFormula, CostProtocol, Term};
pub use overhead::{
    emit_curves, eval_overhead_rd2d, eval_overhead_sode, write_curves_csv, CurveRow, OverheadError, OverheadParams,
    SodeOverhead, SodeTopology, SweepAxis, SweepSpec, CURVE_HEADER,
};
pub use reconcile::{reconcile_counts, CountingConvention, ReconcileReport, ReconcileRow};
