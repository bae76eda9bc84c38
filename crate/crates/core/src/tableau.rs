//! Runge–Kutta coefficient sets and their monotonicity analysis.
//!
//! An explicit tableau `(A, b)` with `s` stages is analysed through its
//! compact `(s+1)×(s+1)` form
//!
//! ```text
//!     𝔸 = [ A   0 ]
//!         [ bᵀ  0 ]
//! ```
//!
//! A tableau is absolutely monotonic at `r ≥ 0` when `I + r𝔸` is invertible
//! and both `(I + r𝔸)⁻¹ r𝔸` and `(I + r𝔸)⁻¹ e` are entrywise nonnegative
//! (`e` the all-ones vector). The radius of monotonicity is the largest `r`
//! such that this holds on all of `[0, r]`; an SSP method built on a
//! monotone Euler–Maruyama map stays monotone for `Δt ≤ r·τ₀`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance used for entrywise nonnegativity tests.
pub const DEFAULT_EPS: f64 = 1e-12;
/// Bisection tolerance for [`radius_of_monotonicity`].
pub const DEFAULT_RADIUS_TOL: f64 = 1e-8;
/// Upper limit of the radius search.
pub const RADIUS_CAP: f64 = 1e6;
/// Interior points checked on every candidate interval of the radius search.
const INTERIOR_GRID: usize = 16;

/// An explicit Butcher tableau.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    s: usize,
    /// Row-major `s×s`.
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ButcherTableau {
    /// Builds a tableau from its rows, rejecting implicit or non-finite input.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if s == 0 {
            return Err(Error::InvalidTableau("no stages".into()));
        }
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::InvalidTableau(format!(
                "`a` must be {s}×{s} to match `b`"
            )));
        }
        let flat: Vec<f64> = a.into_iter().flatten().collect();
        if flat.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTableau("non-finite coefficient".into()));
        }
        for i in 0..s {
            for j in i..s {
                if flat[i * s + j] != 0.0 {
                    return Err(Error::InvalidTableau(format!(
                        "a[{i}][{j}] = {} makes the method implicit",
                        flat[i * s + j]
                    )));
                }
            }
        }
        Ok(Self { s, a: flat, b })
    }

    pub fn forward_euler() -> Self {
        Self::new(vec![vec![0.0]], vec![1.0]).expect("valid")
    }

    pub fn stages(&self) -> usize {
        self.s
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.s + j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Reads the plain-text tableau format: first line `s`, then `s` rows
    /// of `a`, then one row of `b`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let s: usize = lines
            .next()
            .ok_or_else(|| Error::InvalidTableau("empty tableau file".into()))?
            .parse()
            .map_err(|_| Error::InvalidTableau("first line must be the stage count".into()))?;
        let mut row = |what: &str| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidTableau(format!("missing {what}")))?;
            let vals = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(parse_number)
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != s {
                return Err(Error::InvalidTableau(format!(
                    "{what} has {} entries, expected {s}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let a = (0..s)
            .map(|i| row(&format!("row {} of a", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        let b = row("b")?;
        Self::new(a, b)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Parses a real number, also accepting `p/q` fractions.
pub fn parse_number(tok: &str) -> Result<f64> {
    let tok = tok.trim().replace('−', "-");
    let bad = || Error::InvalidArgument(format!("cannot parse number `{tok}`"));
    match tok.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            Ok(n / d)
        }
        None => tok.parse().map_err(|_| bad()),
    }
}

/// The compact `(s+1)×(s+1)` matrix `[[A, 0], [bᵀ, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedTableau {
    n: usize,
    m: Vec<f64>,
}

impl ExtendedTableau {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.m)
    }

    /// Recovers the source tableau.
    pub fn strip(&self) -> Result<ButcherTableau> {
        let s = self.n - 1;
        let a = (0..s)
            .map(|i| (0..s).map(|j| self.get(i, j)).collect())
            .collect();
        let b = (0..s).map(|j| self.get(s, j)).collect();
        ButcherTableau::new(a, b)
    }
}

pub fn extend(t: &ButcherTableau) -> ExtendedTableau {
    let s = t.s;
    let n = s + 1;
    let mut m = vec![0.0; n * n];
    for i in 0..s {
        for j in 0..s {
            m[i * n + j] = t.a(i, j);
        }
    }
    m[s * n..s * n + s].copy_from_slice(&t.b);
    ExtendedTableau { n, m }
}

/// Solves `M X = rhs` column by column; `None` if `M` is numerically singular.
fn solve(m: DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
    let lu = m.lu();
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].abs() <= 1e-14 * scale) {
        return None;
    }
    lu.solve(rhs)
}

fn all_nonneg(m: &DMatrix<f64>, eps: f64) -> bool {
    m.iter().all(|&v| v >= -eps)
}

/// Kraaijevanger conditions at a single `r`: `I + r𝔸` invertible,
/// `(I + r𝔸)⁻¹r𝔸 ≥ 0` and `(I + r𝔸)⁻¹e ≥ 0`, entrywise to `−eps`.
///
/// The first condition is tested on `(I + r𝔸)⁻¹𝔸`, which has the same
/// sign pattern for `r > 0` and keeps `eps` from admitting radii of order
/// `√eps` for methods whose true radius is 0.
pub fn is_absolutely_monotonic(m: &ExtendedTableau, r: f64, eps: f64) -> bool {
    assert!(r >= 0.0 && eps >= 0.0, "r and eps must be nonnegative");
    let n = m.n;
    let ra = m.matrix() * r;
    let lhs = DMatrix::identity(n, n) + &ra;
    let mut rhs = DMatrix::zeros(n, n + 1);
    rhs.view_mut((0, 0), (n, n)).copy_from(&m.matrix());
    rhs.column_mut(n).fill(1.0);
    match solve(lhs, &rhs) {
        Some(x) => all_nonneg(&x, eps),
        None => false,
    }
}

/// Result of the radius search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radius {
    pub value: f64,
    /// The search hit [`RADIUS_CAP`] without finding a violation.
    pub capped: bool,
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.capped {
            write!(f, ">= {} (search cap)", self.value)
        } else {
            write!(f, "{}", self.value)
        }
    }
}

/// Largest `r` (to within `tol`) such that the tableau is absolutely
/// monotonic on all of `[0, r]`.
///
/// The search doubles from `r = 1`, then bisects. Each candidate interval
/// `[lo, r]` is accepted only if `r` and 16 interior points all satisfy the
/// conditions, since the admissible set is not known to be an interval.
pub fn radius_of_monotonicity(m: &ExtendedTableau, tol: f64) -> Radius {
    assert!(tol > 0.0, "tol must be positive");
    let ok = |r: f64| is_absolutely_monotonic(m, r, DEFAULT_EPS);
    let interval_ok = |lo: f64, hi: f64| {
        ok(hi)
            && (1..=INTERIOR_GRID)
                .map(|k| lo + (hi - lo) * k as f64 / (INTERIOR_GRID + 1) as f64)
                .all(ok)
    };

    let (mut lo, mut hi) = if interval_ok(0.0, 1.0) {
        let mut lo: f64 = 1.0;
        loop {
            let next = (2.0 * lo).min(RADIUS_CAP);
            if !interval_ok(lo, next) {
                break (lo, next);
            }
            if next >= RADIUS_CAP {
                return Radius {
                    value: RADIUS_CAP,
                    capped: true,
                };
            }
            lo = next;
        }
    } else {
        (0.0, 1.0)
    };

    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if interval_ok(lo, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Radius {
        value: lo,
        capped: false,
    }
}

/// Drift and diffusion tableaus of a stochastic additive RK method.
#[derive(Clone, Debug, PartialEq)]
pub struct ArkPair {
    pub drift: ButcherTableau,
    pub diffusion: ButcherTableau,
}

impl ArkPair {
    pub fn new(drift: ButcherTableau, diffusion: ButcherTableau) -> Result<Self> {
        if drift.stages() != diffusion.stages() {
            return Err(Error::InvalidTableau(format!(
                "drift has {} stages, diffusion has {}",
                drift.stages(),
                diffusion.stages()
            )));
        }
        Ok(Self { drift, diffusion })
    }

    /// Both operators advanced with the same tableau.
    pub fn symmetric(t: ButcherTableau) -> Self {
        Self {
            drift: t.clone(),
            diffusion: t,
        }
    }
}

/// Whether `(r, r̃)` lies in the monotonicity region of an additive pair:
/// `M = I + r𝔸 + r̃Ã` invertible with `M⁻¹𝔸`, `M⁻¹Ã` and `M⁻¹e` nonnegative.
pub fn ark_point_in_region(p: &ArkPair, r: f64, r_tilde: f64, eps: f64) -> bool {
    assert!(r >= 0.0 && r_tilde >= 0.0, "r and r_tilde must be nonnegative");
    let a = extend(&p.drift).matrix();
    let at = extend(&p.diffusion).matrix();
    let n = a.nrows();
    let lhs = DMatrix::identity(n, n) + &a * r + &at * r_tilde;
    let mut rhs = DMatrix::zeros(n, 2 * n + 1);
    rhs.view_mut((0, 0), (n, n)).copy_from(&a);
    rhs.view_mut((0, n), (n, n)).copy_from(&at);
    rhs.column_mut(2 * n).fill(1.0);
    match solve(lhs, &rhs) {
        Some(x) => all_nonneg(&x, eps),
        None => false,
    }
}

/// Which limiting equation a tableau pair is consistent with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Consistency {
    Stratonovich,
    Ito,
    Other,
}

/// Coefficients of the limiting SDE
/// `dq = (λ0 f + λ1 DG·G) dt + λ2 G dW` of an additive pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RumelinCoefficients {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl RumelinCoefficients {
    pub fn classify(&self) -> Consistency {
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12;
        if !(close(self.lambda0, 1.0) && close(self.lambda2, 1.0)) {
            Consistency::Other
        } else if close(self.lambda1, 0.5) {
            Consistency::Stratonovich
        } else if close(self.lambda1, 0.0) {
            Consistency::Ito
        } else {
            Consistency::Other
        }
    }
}

pub fn rumelin_coefficients(p: &ArkPair) -> RumelinCoefficients {
    let s = p.drift.stages();
    let lambda0 = p.drift.b().iter().sum();
    let lambda2 = p.diffusion.b().iter().sum();
    let lambda1 = (0..s)
        .map(|j| p.diffusion.b()[j] * (0..s).map(|k| p.diffusion.a(j, k)).sum::<f64>())
        .sum();
    RumelinCoefficients {
        lambda0,
        lambda1,
        lambda2,
    }
}

/// The named methods shipped with the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Builtin {
    ForwardEuler,
    Ssp22,
    Ssp33,
    Ssp104,
    Midpoint,
    /// Two-stage second-order family with `a21 = 1/(2γ)`, `b = (1−γ, γ)`.
    Gamma(f64),
}

impl Builtin {
    pub fn tableau(&self) -> Result<ButcherTableau> {
        match *self {
            Builtin::ForwardEuler => Ok(ButcherTableau::forward_euler()),
            Builtin::Ssp22 => ButcherTableau::new(
                vec![vec![0.0, 0.0], vec![1.0, 0.0]],
                vec![0.5, 0.5],
            ),
            Builtin::Ssp33 => ButcherTableau::new(
                vec![
                    vec![0.0, 0.0, 0.0],
                    vec![1.0, 0.0, 0.0],
                    vec![0.25, 0.25, 0.0],
                ],
                vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            ),
            Builtin::Ssp104 => {
                // Ten stages: 1/6 within each five-stage block, 1/15 from the
                // second block back into the first, uniform weights 1/10.
                let a = (0..10)
                    .map(|i| {
                        (0..10)
                            .map(|j| match (i, j) {
                                (i, j) if j >= i => 0.0,
                                (i, j) if i < 5 || j >= 5 => 1.0 / 6.0,
                                _ => 1.0 / 15.0,
                            })
                            .collect()
                    })
                    .collect();
                ButcherTableau::new(a, vec![0.1; 10])
            }
            Builtin::Midpoint => ButcherTableau::new(
                vec![vec![0.0, 0.0], vec![0.5, 0.0]],
                vec![0.0, 1.0],
            ),
            Builtin::Gamma(g) => {
                if g == 0.0 {
                    return Err(Error::InvalidArgument(
                        "gamma family is undefined at γ = 0".into(),
                    ));
                }
                ButcherTableau::new(
                    vec![vec![0.0, 0.0], vec![1.0 / (2.0 * g), 0.0]],
                    vec![1.0 - g, g],
                )
            }
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    /// Accepts `fe`, `ssp22`, `ssp33`, `ssp104`, `midpoint`, and
    /// `gamma(<v>)` / `gamma:<v>` / `gamma=<v>` where `<v>` may be a fraction.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "fe" | "euler" | "em" | "forward_euler" => Builtin::ForwardEuler,
            "ssp22" | "heun" => Builtin::Ssp22,
            "ssp33" => Builtin::Ssp33,
            "ssp104" => Builtin::Ssp104,
            "midpoint" | "rk2" => Builtin::Midpoint,
            other => {
                let arg = other
                    .strip_prefix("gamma")
                    .map(|rest| rest.trim_start_matches([':', '=', '(']).trim_end_matches(')'))
                    .ok_or_else(|| Error::UnknownMethod(s.to_string()))?;
                Builtin::Gamma(parse_number(arg)?)
            }
        })
    }
}

pub fn builtin(name: &str) -> Result<ButcherTableau> {
    name.parse::<Builtin>()?.tableau()
}

/// Coefficients of a stochastic generalised additive RK method, with a
/// precomputed explicit evaluation order of all `s_f + s_g` stages.
#[derive(Clone, Debug)]
pub struct GarkTableaus {
    pub a_ff: Vec<Vec<f64>>,
    pub a_fg: Vec<Vec<f64>>,
    pub a_gf: Vec<Vec<f64>>,
    pub a_gg: Vec<Vec<f64>>,
    pub b_f: Vec<f64>,
    pub b_g: Vec<f64>,
    order: Vec<StageRef>,
}

/// A stage of a [`GarkTableaus`] in evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageRef {
    F(usize),
    G(usize),
}

impl GarkTableaus {
    pub fn new(
        a_ff: Vec<Vec<f64>>,
        a_fg: Vec<Vec<f64>>,
        a_gf: Vec<Vec<f64>>,
        a_gg: Vec<Vec<f64>>,
        b_f: Vec<f64>,
        b_g: Vec<f64>,
    ) -> Result<Self> {
        let (sf, sg) = (b_f.len(), b_g.len());
        let shape_ok = |m: &Vec<Vec<f64>>, rows: usize, cols: usize| {
            m.len() == rows && m.iter().all(|r| r.len() == cols)
        };
        if !(shape_ok(&a_ff, sf, sf)
            && shape_ok(&a_fg, sf, sg)
            && shape_ok(&a_gf, sg, sf)
            && shape_ok(&a_gg, sg, sg))
        {
            return Err(Error::InvalidTableau("GARK block shapes do not match b_f/b_g".into()));
        }
        let finite = [&a_ff, &a_fg, &a_gf, &a_gg]
            .iter()
            .flat_map(|m| m.iter().flatten())
            .chain(b_f.iter())
            .chain(b_g.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidTableau("non-finite coefficient".into()));
        }

        // Kahn's algorithm over the stage dependency graph; index f-stages
        // first, then g-stages.
        let n = sf + sg;
        let idx = |s: StageRef| match s {
            StageRef::F(i) => i,
            StageRef::G(i) => sf + i,
        };
        let node = |k: usize| if k < sf { StageRef::F(k) } else { StageRef::G(k - sf) };
        let deps = |k: usize| -> Vec<usize> {
            let (row_f, row_g) = match node(k) {
                StageRef::F(i) => (&a_ff[i], &a_fg[i]),
                StageRef::G(i) => (&a_gf[i], &a_gg[i]),
            };
            let f = row_f
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, _)| idx(StageRef::F(j)));
            let g = row_g
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, _)| idx(StageRef::G(j)));
            f.chain(g).collect()
        };
        let dep_lists: Vec<Vec<usize>> = (0..n).map(deps).collect();
        let mut remaining: Vec<usize> = dep_lists.iter().map(Vec::len).collect();
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n).find(|&k| !done[k] && remaining[k] == 0).ok_or_else(|| {
                Error::InvalidTableau("GARK stage coupling has no explicit ordering".into())
            })?;
            done[next] = true;
            order.push(node(next));
            for (k, d) in dep_lists.iter().enumerate() {
                remaining[k] -= d.iter().filter(|&&j| j == next).count();
            }
        }
        Ok(Self {
            a_ff,
            a_fg,
            a_gf,
            a_gg,
            b_f,
            b_g,
            order,
        })
    }

    /// GARK form of an additive pair: shared stages, no cross coupling
    /// beyond what the pair itself implies.
    pub fn from_ark(p: &ArkPair) -> Self {
        let s = p.drift.stages();
        let rows = |t: &ButcherTableau| -> Vec<Vec<f64>> {
            (0..s).map(|i| (0..s).map(|j| t.a(i, j)).collect()).collect()
        };
        let ad = rows(&p.drift);
        let ag = rows(&p.diffusion);
        Self::new(
            ad.clone(),
            ag.clone(),
            ad,
            ag,
            p.drift.b().to_vec(),
            p.diffusion.b().to_vec(),
        )
        .expect("explicit pair yields explicit GARK")
    }

    pub fn order(&self) -> &[StageRef] {
        &self.order
    }

    pub fn stages(&self) -> (usize, usize) {
        (self.b_f.len(), self.b_g.len())
    }
}

/// `(I + r𝔸)⁻¹ e`, the stage weights of the initial value at radius `r`.
pub fn apply_inverse_to_ones(m: &ExtendedTableau, r: f64) -> Option<Vec<f64>> {
    let n = m.n;
    let lhs = DMatrix::identity(n, n) + m.matrix() * r;
    let rhs = DMatrix::from_column_slice(n, 1, &vec![1.0; n]);
    solve(lhs, &rhs).map(|x| x.as_slice().to_vec())
}
