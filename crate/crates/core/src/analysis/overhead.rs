use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_rational::Ratio;

/// Parameters of the communication overhead model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverheadParams {
    /// Total slots.
    pub t_total: u64,
    /// Slots in which requests occur.
    pub t_prime: u64,
    /// Requests per slot.
    pub m: u64,
    /// Devices on the route, endpoints included.
    pub n: u64,
    /// eNodeB count.
    pub b: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OverheadError {
    #[error("need T >= T' >= 1, got T={t_total}, T'={t_prime}")]
    Slots { t_total: u64, t_prime: u64 },
    #[error("need M >= 1")]
    NoRequests,
    #[error("need n >= 2, got {0}")]
    TooFewNodes(u64),
    #[error("need B >= 1")]
    NoEnodeb,
    #[error("neighbour degrees given for {given} eNodeBs, expected {expected}")]
    DegreeCount { given: usize, expected: u64 },
    #[error("eNodeB {index} has degree {degree} but only {others} others exist")]
    DegreeTooLarge { index: usize, degree: u64, others: u64 },
    #[error("empty sweep range")]
    EmptySweep,
}

impl OverheadParams {
    /// Default evaluation point: n=10, T=20, T'=10, M=1, B=2.
    pub const DEFAULT: OverheadParams = OverheadParams { t_total: 20, t_prime: 10, m: 1, n: 10, b: 2 };

    pub fn validate(&self) -> Result<(), OverheadError> {
        if self.t_prime < 1 || self.t_prime > self.t_total {
            return Err(OverheadError::Slots { t_total: self.t_total, t_prime: self.t_prime });
        }
        if self.m < 1 {
            return Err(OverheadError::NoRequests);
        }
        if self.n < 2 {
            return Err(OverheadError::TooFewNodes(self.n));
        }
        if self.b < 1 {
            return Err(OverheadError::NoEnodeb);
        }
        Ok(())
    }
}

/// Messages per slot for relayed sessions: `T'·M·(2n+2)/T`.
pub fn eval_overhead_rd2d(p: &OverheadParams) -> Result<Ratio<u64>, OverheadError> {
    p.validate()?;
    Ok(Ratio::new(p.t_prime * p.m * (2 * p.n + 2), p.t_total))
}

/// eNodeB neighbourhood assumed by the SODE model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SodeTopology {
    /// Neighbour count of each eNodeB.
    pub neighbor_degree: Vec<u64>,
    pub devices_per_enodeb: u64,
}

impl SodeTopology {
    /// Every eNodeB neighbours every other one.
    pub fn full_mesh(b: u64, devices_per_enodeb: u64) -> Self {
        Self { neighbor_degree: vec![b.saturating_sub(1); b as usize], devices_per_enodeb }
    }
}

/// A SODE evaluation together with the assumptions it rests on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SodeOverhead {
    pub value: Ratio<u64>,
    pub topology: SodeTopology,
}

impl SodeOverhead {
    pub fn assumptions(&self) -> String {
        format!(
            "SODE model: per slot [sum_e 2*dev*deg(e) + sum_e 2*deg(e)*dev + 2*T'*M] / T; dev={} per eNodeB; deg={:?}",
            self.topology.devices_per_enodeb, self.topology.neighbor_degree
        )
    }
}

/// SODE comparison model. Each eNodeB sends two fields per device to each
/// neighbour eNodeB, and two fields per neighbour to each of its devices;
/// request and reply add two messages per session.
pub fn eval_overhead_sode(p: &OverheadParams, topology: &SodeTopology) -> Result<SodeOverhead, OverheadError> {
    p.validate()?;
    if topology.neighbor_degree.len() as u64 != p.b {
        return Err(OverheadError::DegreeCount { given: topology.neighbor_degree.len(), expected: p.b });
    }
    if let Some((index, &degree)) = topology.neighbor_degree.iter().enumerate().find(|(_, &d)| d >= p.b) {
        return Err(OverheadError::DegreeTooLarge { index, degree, others: p.b - 1 });
    }
    let dev = topology.devices_per_enodeb;
    let to_neighbours: u64 = topology.neighbor_degree.iter().map(|d| 2 * dev * d).sum();
    let to_devices: u64 = topology.neighbor_degree.iter().map(|d| 2 * d * dev).sum();
    let sessions = 2 * p.t_prime * p.m;
    Ok(SodeOverhead { value: Ratio::new(to_neighbours + to_devices + sessions, p.t_total), topology: topology.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Vary `n`.
    Nodes,
    /// Vary `T'`.
    Timeslots,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Nodes => "n",
            SweepAxis::Timeslots => "T_prime",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nodes" | "n" => Ok(SweepAxis::Nodes),
            "timeslots" | "T_prime" => Ok(SweepAxis::Timeslots),
            other => Err(format!("unknown sweep axis {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub from: u64,
    pub to: u64,
    /// Fixed values of everything not swept.
    pub base: OverheadParams,
    pub devices_per_enodeb: u64,
}

impl SweepSpec {
    /// Device count per eNodeB used when none is given.
    pub const DEFAULT_DEVICES_PER_ENODEB: u64 = 10;

    /// `n = 2..=20` or `T' = 1..=20` around the default point.
    pub fn default_for(axis: SweepAxis, m: u64, b: u64) -> Self {
        let (from, to) = match axis {
            SweepAxis::Nodes => (2, 20),
            SweepAxis::Timeslots => (1, 20),
        };
        Self {
            axis,
            from,
            to,
            base: OverheadParams { m, b, ..OverheadParams::DEFAULT },
            devices_per_enodeb: Self::DEFAULT_DEVICES_PER_ENODEB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveRow {
    pub axis: SweepAxis,
    pub x: u64,
    pub params: OverheadParams,
    pub devices_per_enodeb: u64,
    pub rd2d: Ratio<u64>,
    pub sode: Ratio<u64>,
}

/// Evaluates both models at every sweep point, in increasing `x`.
pub fn emit_curves(spec: &SweepSpec) -> Result<Vec<CurveRow>, OverheadError> {
    if spec.from > spec.to {
        return Err(OverheadError::EmptySweep);
    }
    (spec.from..=spec.to)
        .map(|x| {
            let mut params = spec.base;
            match spec.axis {
                SweepAxis::Nodes => params.n = x,
                SweepAxis::Timeslots => params.t_prime = x,
            }
            let topology = SodeTopology::full_mesh(params.b, spec.devices_per_enodeb);
            Ok(CurveRow {
                axis: spec.axis,
                x,
                params,
                devices_per_enodeb: spec.devices_per_enodeb,
                rd2d: eval_overhead_rd2d(&params)?,
                sode: eval_overhead_sode(&params, &topology)?.value,
            })
        })
        .collect()
}

pub const CURVE_HEADER: [&str; 10] =
    ["x_name", "x", "rd2d_overhead", "sode_overhead", "n", "T", "T_prime", "M", "B", "devices_per_enodeb"];

struct Exact(Ratio<u64>);

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Denominators divide T, so a short decimal is usually exact; fall
        // back to the fraction when it is not.
        let (num, den) = (*self.0.numer(), *self.0.denom());
        let mut d = den;
        while d % 2 == 0 {
            d /= 2;
        }
        while d % 5 == 0 {
            d /= 5;
        }
        if d == 1 {
            write!(f, "{}", num as f64 / den as f64)
        } else {
            write!(f, "{num}/{den}")
        }
    }
}

/// Writes rows as CSV with [`CURVE_HEADER`].
pub fn write_curves_csv<W: Write>(rows: &[CurveRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for r in rows {
        let p = &r.params;
        w.write_record([
            r.axis.name().to_owned(),
            r.x.to_string(),
            Exact(r.rd2d).to_string(),
            Exact(r.sode).to_string(),
            p.n.to_string(),
            p.t_total.to_string(),
            p.t_prime.to_string(),
            p.m.to_string(),
            p.b.to_string(),
            r.devices_per_enodeb.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(t_prime: u64, m: u64, n: u64, t_total: u64) -> OverheadParams {
        OverheadParams { t_total, t_prime, m, n, b: 1 }
    }

    #[test]
    fn rd2d_reference_points() {
        assert_eq!(eval_overhead_rd2d(&p(10, 1, 10, 20)).unwrap(), Ratio::from_integer(11));
        assert_eq!(eval_overhead_rd2d(&p(10, 5, 10, 20)).unwrap(), Ratio::from_integer(55));
        assert_eq!(eval_overhead_rd2d(&p(7, 1, 2, 7)).unwrap(), Ratio::from_integer(6));
        assert_eq!(eval_overhead_rd2d(&p(1, 1, 2, 4)).unwrap(), Ratio::new(3, 2));
    }

    #[test]
    fn invalid_params() {
        assert_eq!(eval_overhead_rd2d(&p(10, 0, 10, 20)), Err(OverheadError::NoRequests));
        assert!(matches!(eval_overhead_rd2d(&p(21, 1, 10, 20)), Err(OverheadError::Slots { .. })));
        assert!(matches!(eval_overhead_rd2d(&p(0, 1, 10, 20)), Err(OverheadError::Slots { .. })));
        assert_eq!(eval_overhead_rd2d(&p(1, 1, 1, 20)), Err(OverheadError::TooFewNodes(1)));
        let mut q = OverheadParams::DEFAULT;
        q.b = 0;
        assert_eq!(eval_overhead_rd2d(&q), Err(OverheadError::NoEnodeb));
    }

    #[test]
    fn sode_single_enodeb_is_sessions_only() {
        let q = p(10, 3, 10, 20);
        let s = eval_overhead_sode(&q, &SodeTopology::full_mesh(1, 50)).unwrap();
        assert_eq!(s.value, Ratio::new(2 * 10 * 3, 20));
        assert!(s.assumptions().contains("dev=50"));
    }

    #[test]
    fn sode_hand_evaluation() {
        // B=2, 10 devices each: 2 * (2*10*1 + 2*1*10) + 2*10*1 = 100, over 20
        let q = OverheadParams { b: 2, ..OverheadParams::DEFAULT };
        let s = eval_overhead_sode(&q, &SodeTopology::full_mesh(2, 10)).unwrap();
        assert_eq!(s.value, Ratio::from_integer(5));
    }

    #[test]
    fn sode_rejects_inconsistent_topology() {
        let q = OverheadParams { b: 3, ..OverheadParams::DEFAULT };
        assert!(matches!(
            eval_overhead_sode(&q, &SodeTopology::full_mesh(2, 1)),
            Err(OverheadError::DegreeCount { .. })
        ));
        let bad = SodeTopology { neighbor_degree: vec![1, 3, 1], devices_per_enodeb: 1 };
        assert!(matches!(eval_overhead_sode(&q, &bad), Err(OverheadError::DegreeTooLarge { index: 1, .. })));
    }

    #[test]
    fn timeslot_sweep_has_twenty_rows() {
        let rows = emit_curves(&SweepSpec::default_for(SweepAxis::Timeslots, 1, 2)).unwrap();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows[9].rd2d, Ratio::from_integer(11));
    }

    #[test]
    fn csv_layout() {
        let rows = emit_curves(&SweepSpec::default_for(SweepAxis::Nodes, 1, 2)).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CURVE_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "n,2,3,5,2,20,10,1,2,10");
        assert_eq!(text.lines().count(), 20);
    }

    #[test]
    fn non_terminating_ratio_prints_as_fraction() {
        assert_eq!(Exact(Ratio::new(1, 3)).to_string(), "1/3");
        assert_eq!(Exact(Ratio::new(11, 4)).to_string(), "2.75");
    }

    fn params() -> impl Strategy<Value = OverheadParams> {
        (1u64..200, 1u64..50, 2u64..100, 1u64..20).prop_flat_map(|(t_total, m, n, b)| {
            (1..=t_total).prop_map(move |t_prime| OverheadParams { t_total, t_prime, m, n, b })
        })
    }

    proptest! {
        #[test]
        fn rd2d_linear_in_m_and_t_prime(q in params(), k in 1u64..10) {
            let base = eval_overhead_rd2d(&q).unwrap();
            let scaled_m = eval_overhead_rd2d(&OverheadParams { m: q.m * k, ..q }).unwrap();
            prop_assert_eq!(scaled_m, base * k);
            let wide = OverheadParams { t_total: q.t_total * k, ..q };
            let scaled_t = eval_overhead_rd2d(&OverheadParams { t_prime: q.t_prime * k, ..wide }).unwrap();
            prop_assert_eq!(scaled_t, eval_overhead_rd2d(&wide).unwrap() * k);
        }

        #[test]
        fn rd2d_affine_in_n(q in params()) {
            let next = eval_overhead_rd2d(&OverheadParams { n: q.n + 1, ..q }).unwrap();
            let slope = Ratio::new(2 * q.t_prime * q.m, q.t_total);
            prop_assert_eq!(next - eval_overhead_rd2d(&q).unwrap(), slope);
        }

        #[test]
        fn rd2d_ignores_b_and_sode_grows_with_it(q in params(), dev in 1u64..100) {
            let more = OverheadParams { b: q.b + 1, ..q };
            prop_assert_eq!(eval_overhead_rd2d(&q).unwrap(), eval_overhead_rd2d(&more).unwrap());
            let a = eval_overhead_sode(&q, &SodeTopology::full_mesh(q.b, dev)).unwrap().value;
            let b = eval_overhead_sode(&more, &SodeTopology::full_mesh(more.b, dev)).unwrap().value;
            prop_assert!(b > a);
        }
    }
}
