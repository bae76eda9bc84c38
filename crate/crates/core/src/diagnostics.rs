//! Per-step and per-run measurements: range violations, extrema, mass,
//! total variation and ensemble aggregation.

use std::fmt::Write as _;
use std::io;

use crate::error::{Error, Result};
use crate::fv2d::{Grid2D, Stencil};
use crate::parallel::pairwise_sum;

/// Absolute threshold below which a violation counts as machine precision.
pub const VIOLATION_TOL: f64 = 1e-12;

/// CSV header of a [`RunRecord`].
pub const CSV_HEADER: &str = "step,time,min,max,mass,overshoot,undershoot,cfl";

/// `(max(0, max q − hi), max(0, lo − min q))`.
pub fn range_violation(q: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let (mn, mx) = extrema(q);
    ((mx - hi).max(0.0), (lo - mn).max(0.0))
}

fn extrema(q: &[f64]) -> (f64, f64) {
    q.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

/// Periodic total-variation seminorm over all faces.
pub fn tv_seminorm(g: &Grid2D, q: &[f64]) -> f64 {
    let mut jumps = Vec::with_capacity(2 * q.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = q[g.idx(i, j)];
            jumps.push((q[g.idx(g.ip(i), j)] - c).abs());
            jumps.push((q[g.idx(i, g.jp(j))] - c).abs());
        }
    }
    pairwise_sum(&jumps)
}

/// Worst amount by which `q_new` leaves the stencil range of `q_old`;
/// zero when the local maximum principle holds.
pub fn lmp_check(g: &Grid2D, q_old: &[f64], q_new: &[f64], stencil: Stencil) -> f64 {
    let (lo, hi) = stencil.bounds(g, q_old);
    q_new
        .iter()
        .zip(lo.iter().zip(&hi))
        .map(|(&v, (&m, &mx))| (v - mx).max(m - v).max(0.0))
        .fold(0.0, f64::max)
}

/// Bounds and weights a [`RunRecord`] measures against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecordSpec {
    pub lo: f64,
    pub hi: f64,
    /// Mass is `mass_weight · Σ q`, e.g. the cell area.
    pub mass_weight: f64,
    /// Courant numbers above this are recorded as warnings.
    pub cfl_limit: f64,
}

impl Default for RecordSpec {
    fn default() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            mass_weight: 1.0,
            cfl_limit: 1.0,
        }
    }
}

impl RecordSpec {
    pub fn bounded(lo: f64, hi: f64, mass_weight: f64) -> Self {
        Self {
            lo,
            hi,
            mass_weight,
            ..Self::default()
        }
    }
}

/// Per-step series of one run, initial state included.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub spec: RecordSpec,
    pub time: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mass: Vec<f64>,
    pub overshoot: Vec<f64>,
    pub undershoot: Vec<f64>,
    pub cfl: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn new(spec: RecordSpec) -> Self {
        Self {
            spec,
            time: Vec::new(),
            min: Vec::new(),
            max: Vec::new(),
            mass: Vec::new(),
            overshoot: Vec::new(),
            undershoot: Vec::new(),
            cfl: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn push(&mut self, time: f64, q: &[f64], cfl: Option<f64>) {
        let (mn, mx) = extrema(q);
        let (over, under) = range_violation(q, self.spec.lo, self.spec.hi);
        if let Some(c) = cfl {
            if c > self.spec.cfl_limit {
                self.warnings.push(format!(
                    "step {}: CFL {c:.4} exceeds {}",
                    self.time.len(),
                    self.spec.cfl_limit
                ));
            }
        }
        self.time.push(time);
        self.min.push(mn);
        self.max.push(mx);
        self.mass.push(self.spec.mass_weight * pairwise_sum(q));
        self.overshoot.push(over);
        self.undershoot.push(under);
        self.cfl.push(cfl);
    }

    /// Number of recorded states (steps + 1).
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn worst_overshoot(&self) -> f64 {
        self.overshoot.iter().copied().fold(0.0, f64::max)
    }

    pub fn worst_undershoot(&self) -> f64 {
        self.undershoot.iter().copied().fold(0.0, f64::max)
    }

    /// Whether every step stayed in bounds to [`VIOLATION_TOL`].
    pub fn in_bounds(&self) -> bool {
        self.worst_overshoot() <= VIOLATION_TOL && self.worst_undershoot() <= VIOLATION_TOL
    }

    /// Largest `|mass_k − mass_0|`.
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
    }

    pub fn max_cfl(&self) -> Option<f64> {
        self.cfl.iter().flatten().copied().reduce(f64::max)
    }

    /// CSV text, one row per recorded state. Floats use Rust's shortest
    /// round-trip formatting so output is byte-stable.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for k in 0..self.len() {
            let cfl = self.cfl[k].map(|c| format!("{c:e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{k},{:e},{:e},{:e},{:e},{:e},{:e},{cfl}",
                self.time[k],
                self.min[k],
                self.max[k],
                self.mass[k],
                self.overshoot[k],
                self.undershoot[k]
            );
        }
        s
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Elementwise extrema over ensemble members.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleExtrema {
    pub time: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub overshoot: Vec<f64>,
    pub undershoot: Vec<f64>,
}

impl EnsembleExtrema {
    pub fn worst_overshoot(&self) -> f64 {
        self.overshoot.iter().copied().fold(0.0, f64::max)
    }

    pub fn worst_undershoot(&self) -> f64 {
        self.undershoot.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-step minimum of member minima and maximum of member maxima.
pub fn ensemble_reduce(records: &[RunRecord]) -> Result<EnsembleExtrema> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let n = first.len();
    if let Some(r) = records.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: r.len(),
        });
    }
    let fold = |pick: fn(&RunRecord) -> &Vec<f64>, f: fn(f64, f64) -> f64| -> Vec<f64> {
        (0..n)
            .map(|k| records.iter().map(|r| pick(r)[k]).reduce(f).unwrap_or(f64::NAN))
            .collect()
    };
    Ok(EnsembleExtrema {
        time: first.time.clone(),
        min: fold(|r| &r.min, f64::min),
        max: fold(|r| &r.max, f64::max),
        overshoot: fold(|r| &r.overshoot, f64::max),
        undershoot: fold(|r| &r.undershoot, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn range_violation_examples() {
        assert_eq!(range_violation(&[0.0, 0.5, 1.0], 0.0, 1.0), (0.0, 0.0));
        let (o, u) = range_violation(&[0.2, 1.3, 0.4], 0.0, 1.0);
        assert!((o - 0.3).abs() < 1e-15 && u == 0.0);
        assert_eq!(range_violation(&[-0.25; 4], 0.0, 1.0), (0.0, 0.25));
    }

    #[test]
    fn tv_examples() {
        let g = Grid2D::new(8, 5).unwrap();
        assert_eq!(tv_seminorm(&g, &vec![0.7; 40]), 0.0);

        let step: Vec<f64> = (0..40).map(|k| if k % 8 >= 3 { 1.0 } else { 0.0 }).collect();
        assert_eq!(tv_seminorm(&g, &step), 2.0 * 5.0);

        let mut ramp = vec![0.0; 40];
        for i in 0..8 {
            ramp[g.idx(i, 2)] = i as f64 * 0.5;
        }
        let range = 3.5;
        // Row 2 varies: the ramp and its wrap jump give 2·range; the two
        // neighbouring rows see |ramp| across their shared faces.
        let row_faces: f64 = (0..8).map(|i| 2.0 * ramp[g.idx(i, 2)]).sum();
        assert!((tv_seminorm(&g, &ramp) - (2.0 * range + row_faces)).abs() < 1e-12);

        let one_row = Grid2D::new(8, 1).unwrap();
        let r: Vec<f64> = (0..8).map(|i| i as f64 * 0.5).collect();
        assert!((tv_seminorm(&one_row, &r) - 2.0 * range).abs() < 1e-12);
    }

    #[test]
    fn lmp_examples() {
        let g = Grid2D::new(6, 6).unwrap();
        let q: Vec<f64> = (0..36).map(|k| ((k * 7) % 11) as f64 / 10.0).collect();
        for s in [Stencil::FivePoint, Stencil::ThirteenPoint] {
            assert_eq!(lmp_check(&g, &q, &q, s), 0.0);
            let avg: Vec<f64> = (0..36)
                .map(|k| {
                    let (i, j) = (k % 6, k / 6);
                    let nb = [q[g.idx(g.ip(i), j)], q[g.idx(g.im(i), j)], q[g.idx(i, g.jp(j))], q[g.idx(i, g.jm(j))]];
                    0.5 * q[k] + 0.125 * nb.iter().sum::<f64>()
                })
                .collect();
            assert_eq!(lmp_check(&g, &q, &avg, s), 0.0);
        }
        let (_, hi) = Stencil::FivePoint.bounds(&g, &q);
        let mut bumped = q.clone();
        bumped[14] = hi[14] + 0.01;
        assert!((lmp_check(&g, &q, &bumped, Stencil::FivePoint) - 0.01).abs() < 1e-14);
    }

    fn record(values: &[&[f64]]) -> RunRecord {
        let mut r = RunRecord::new(RecordSpec::bounded(0.0, 1.0, 1.0));
        for (k, q) in values.iter().enumerate() {
            r.push(k as f64, q, None);
        }
        r
    }

    #[test]
    fn record_and_csv() {
        let r = record(&[&[0.0, 1.0], &[0.5, 1.2], &[-0.1, 0.3]]);
        assert_eq!(r.len(), 3);
        assert!((r.worst_overshoot() - 0.2).abs() < 1e-15);
        assert!((r.worst_undershoot() - 0.1).abs() < 1e-15);
        assert!(!r.in_bounds());
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 3);

        let mut w = RunRecord::new(RecordSpec::default());
        w.push(0.0, &[1.0], Some(0.5));
        w.push(0.1, &[1.0], Some(1.5));
        assert_eq!(w.warnings.len(), 1);
        assert_eq!(w.max_cfl(), Some(1.5));
    }

    #[test]
    fn ensemble_examples() {
        let a = record(&[&[0.1, 0.9], &[0.0, 0.9]]);
        let b = record(&[&[0.2, 1.1], &[0.3, 0.4]]);
        let one = ensemble_reduce(std::slice::from_ref(&a)).unwrap();
        assert_eq!(one.max, a.max);
        assert_eq!(one.min, a.min);
        assert_eq!(ensemble_reduce(&[a.clone(), a.clone()]).unwrap(), one);
        let ab = ensemble_reduce(&[a.clone(), b]).unwrap();
        assert_eq!(ab.max[0], 1.1);
        assert_eq!(ab.min[1], 0.0);
        let short = record(&[&[0.1]]);
        assert!(ensemble_reduce(&[a, short]).is_err());
        assert!(ensemble_reduce(&[]).is_err());
    }

    proptest! {
        #[test]
        fn tv_nonnegative_zero_iff_constant(q in proptest::collection::vec(-2.0f64..2.0, 20)) {
            let g = Grid2D::new(5, 4).unwrap();
            let tv = tv_seminorm(&g, &q);
            prop_assert!(tv >= 0.0);
            let constant = q.iter().all(|&v| v == q[0]);
            prop_assert_eq!(tv == 0.0, constant);
        }

        #[test]
        fn range_violation_translation(q in proptest::collection::vec(-2.0f64..2.0, 1..30), c in -5.0f64..5.0) {
            let (o1, u1) = range_violation(&q, 0.0, 1.0);
            let shifted: Vec<f64> = q.iter().map(|v| v + c).collect();
            let (o2, u2) = range_violation(&shifted, c, 1.0 + c);
            prop_assert!((o1 - o2).abs() < 1e-12 && (u1 - u2).abs() < 1e-12);
        }

        #[test]
        fn lmp_self_is_zero(q in proptest::collection::vec(-2.0f64..2.0, 36)) {
            let g = Grid2D::new(6, 6).unwrap();
            prop_assert_eq!(lmp_check(&g, &q, &q, Stencil::ThirteenPoint), 0.0);
        }
    }
}
