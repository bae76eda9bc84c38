//! Driving increments `ΔS` and reproducible random streams.
//!
//! Every sampler returns increments already scaled by `√Δt`. The bounded
//! families (two-point, three-point, truncated Gaussian) come with an
//! almost-sure bound from [`IncrementSampler::max_increment_bound`], which is
//! what pathwise strong stability needs.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A replayable random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose output is a pure function of key, stream and
/// word position, so the same pair yields the same draws on every platform
/// and independently of which thread consumes it.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u32) -> u32 {
        self.rng.random_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Gaussian,
    TwoPoint,
    ThreePoint,
    TruncatedGaussian,
}

/// Distribution of the per-step increments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncrementSampler {
    kind: SamplerKind,
    /// Truncation exponent, only used by the truncated Gaussian.
    k: f64,
}

/// One equally likely family of outcomes `sign·√(c·Δt)` with probability `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub sign: i8,
    pub c: Ratio<i64>,
    pub p: Ratio<i64>,
}

impl IncrementSampler {
    pub fn gaussian() -> Self {
        Self {
            kind: SamplerKind::Gaussian,
            k: 1.0,
        }
    }

    pub fn two_point() -> Self {
        Self {
            kind: SamplerKind::TwoPoint,
            k: 1.0,
        }
    }

    pub fn three_point() -> Self {
        Self {
            kind: SamplerKind::ThreePoint,
            k: 1.0,
        }
    }

    /// Milstein–Tretyakov truncation at `A = √(2k|ln Δt|)`, `k ≥ 1`.
    pub fn truncated(k: f64) -> Result<Self> {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::InvalidSampler(format!(
                "truncation exponent k must be finite and >= 1, got {k}"
            )));
        }
        Ok(Self {
            kind: SamplerKind::TruncatedGaussian,
            k,
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn is_bounded(&self) -> bool {
        self.kind != SamplerKind::Gaussian
    }

    /// Whether draws are images of an underlying standard normal, so that a
    /// Brownian path can be coupled to them.
    pub fn has_underlying_normal(&self) -> bool {
        matches!(self.kind, SamplerKind::Gaussian | SamplerKind::TruncatedGaussian)
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidSampler(format!("dt must be positive, got {dt}")));
        }
        if self.kind == SamplerKind::TruncatedGaussian && dt >= 1.0 {
            return Err(Error::InvalidSampler(format!(
                "truncated Gaussian increments need dt < 1 (got {dt}); the level sqrt(2k|ln dt|) vanishes at dt = 1"
            )));
        }
        Ok(())
    }

    /// Truncation level `A_Δt` in standard-normal units.
    pub fn truncation_level(&self, dt: f64) -> f64 {
        (2.0 * self.k * dt.ln().abs()).sqrt()
    }

    /// Fills `ds` with one increment per noise component. For samplers with
    /// an underlying normal, `dw` (if given) receives the untruncated
    /// Brownian increments `√Δt·Z` that produced `ds`.
    pub fn sample_into(
        &self,
        dt: f64,
        rng: &mut RngStream,
        ds: &mut [f64],
        mut dw: Option<&mut [f64]>,
    ) -> Result<()> {
        self.check_dt(dt)?;
        let sq = dt.sqrt();
        match self.kind {
            SamplerKind::Gaussian | SamplerKind::TruncatedGaussian => {
                let level = match self.kind {
                    SamplerKind::TruncatedGaussian => self.truncation_level(dt),
                    _ => f64::INFINITY,
                };
                for (p, out) in ds.iter_mut().enumerate() {
                    let z = rng.normal();
                    *out = sq * z.clamp(-level, level);
                    if let Some(w) = dw.as_deref_mut() {
                        w[p] = sq * z;
                    }
                }
            }
            SamplerKind::TwoPoint => {
                if dw.is_some() {
                    return Err(Error::InvalidSampler(
                        "two-point increments have no underlying Brownian increment".into(),
                    ));
                }
                for out in ds.iter_mut() {
                    *out = if rng.coin() { sq } else { -sq };
                }
            }
            SamplerKind::ThreePoint => {
                if dw.is_some() {
                    return Err(Error::InvalidSampler(
                        "three-point increments have no underlying Brownian increment".into(),
                    ));
                }
                let mag = (3.0 * dt).sqrt();
                for out in ds.iter_mut() {
                    *out = match rng.below(6) {
                        0 => -mag,
                        1 => mag,
                        _ => 0.0,
                    };
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, p_dim: usize, dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
        let mut ds = vec![0.0; p_dim];
        self.sample_into(dt, rng, &mut ds, None)?;
        Ok(ds)
    }

    /// Almost-sure bound on `|ΔS^p|`; infinite for Gaussian increments.
    pub fn max_increment_bound(&self, dt: f64) -> f64 {
        match self.kind {
            SamplerKind::Gaussian => f64::INFINITY,
            SamplerKind::TwoPoint => dt.sqrt(),
            SamplerKind::ThreePoint => (3.0 * dt).sqrt(),
            SamplerKind::TruncatedGaussian => dt.sqrt() * self.truncation_level(dt),
        }
    }

    /// The finite outcome set of a discrete sampler.
    pub fn outcomes(&self) -> Option<Vec<Outcome>> {
        let r = Ratio::new;
        match self.kind {
            SamplerKind::TwoPoint => Some(vec![
                Outcome { sign: 1, c: r(1, 1), p: r(1, 2) },
                Outcome { sign: -1, c: r(1, 1), p: r(1, 2) },
            ]),
            SamplerKind::ThreePoint => Some(vec![
                Outcome { sign: 1, c: r(3, 1), p: r(1, 6) },
                Outcome { sign: -1, c: r(3, 1), p: r(1, 6) },
                Outcome { sign: 0, c: r(0, 1), p: r(2, 3) },
            ]),
            _ => None,
        }
    }

    /// Exact `E[ΔS^n] / Δt^{n/2}` of a discrete sampler, computed by
    /// enumerating outcomes in rational arithmetic. Returns `None` for
    /// continuous samplers or when an odd moment is irrational.
    pub fn exact_scaled_moment(&self, n: u32) -> Option<Ratio<i64>> {
        let outcomes = self.outcomes()?;
        if n % 2 == 0 {
            let total = outcomes
                .iter()
                .map(|o| o.p * o.c.pow(n as i32 / 2))
                .fold(Ratio::from_integer(0), |a, b| a + b);
            // An exact zero outcome contributes nothing for n > 0, and 0^0 = 1.
            Some(total)
        } else {
            // Group by magnitude; each group's signed probability mass must
            // vanish for the odd moment to be the rational zero.
            let mut mags: Vec<Ratio<i64>> = outcomes.iter().map(|o| o.c).collect();
            mags.sort();
            mags.dedup();
            let all_cancel = mags.iter().all(|m| {
                outcomes
                    .iter()
                    .filter(|o| o.c == *m)
                    .map(|o| o.p * Ratio::from_integer(o.sign as i64))
                    .fold(Ratio::from_integer(0), |a, b| a + b)
                    == Ratio::from_integer(0)
                    || *m == Ratio::from_integer(0)
            });
            all_cancel.then(|| Ratio::from_integer(0))
        }
    }

    /// Number of leading moments shared with `N(0, Δt)`.
    pub fn matched_moments(&self) -> u32 {
        match self.kind {
            SamplerKind::Gaussian => 5,
            SamplerKind::TwoPoint => 3,
            SamplerKind::ThreePoint => 5,
            // Only the odd moments agree exactly after truncation.
            SamplerKind::TruncatedGaussian => 1,
        }
    }
}

impl Default for IncrementSampler {
    fn default() -> Self {
        Self::two_point()
    }
}

impl fmt::Display for IncrementSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SamplerKind::Gaussian => write!(f, "gaussian"),
            SamplerKind::TwoPoint => write!(f, "two_point"),
            SamplerKind::ThreePoint => write!(f, "three_point"),
            SamplerKind::TruncatedGaussian => write!(f, "truncated_gaussian(k={})", self.k),
        }
    }
}

impl FromStr for IncrementSampler {
    type Err = Error;

    /// `gaussian`, `two_point`, `three_point`, `truncated_gaussian` or
    /// `truncated_gaussian:<k>` (dashes and short forms accepted).
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace('-', "_");
        let (name, arg) = match lower.split_once([':', '=']) {
            Some((n, a)) => (n.to_string(), Some(a.to_string())),
            None => (lower.clone(), None),
        };
        match name.as_str() {
            "gaussian" | "normal" | "unbounded" => Ok(Self::gaussian()),
            "two_point" | "twopoint" | "2point" => Ok(Self::two_point()),
            "three_point" | "threepoint" | "3point" => Ok(Self::three_point()),
            "truncated_gaussian" | "truncated" | "bounded_normal" => {
                let k = arg.as_deref().map(crate::tableau::parse_number).transpose()?;
                Self::truncated(k.unwrap_or(1.0))
            }
            _ => Err(Error::InvalidSampler(format!("unknown sampler `{s}`"))),
        }
    }
}

/// One line of a [`MomentReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct MomentLine {
    pub name: String,
    pub estimate: f64,
    pub std_err: f64,
    /// Value the estimate is compared against, with its comparison rule.
    pub target: Option<Target>,
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Equal(f64),
    AtMost(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub sampler: IncrementSampler,
    pub dt: f64,
    pub n_samples: usize,
    pub lines: Vec<MomentLine>,
}

impl MomentReport {
    pub fn any_flagged(&self) -> bool {
        self.lines.iter().any(|l| l.flagged)
    }

    pub fn line(&self, name: &str) -> Option<&MomentLine> {
        self.lines.iter().find(|l| l.name == name)
    }
}

impl fmt::Display for MomentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            let target = match l.target {
                Some(Target::Equal(v)) => format!("= {v:.6e}"),
                Some(Target::AtMost(v)) => format!("<= {v:.6e}"),
                None => "-".to_string(),
            };
            writeln!(
                f,
                "{:<24} estimate={:+.6e} se={:.3e} target {:<16} {}",
                l.name,
                l.estimate,
                l.std_err,
                target,
                if l.flagged { "FLAG" } else { "ok" }
            )?;
        }
        Ok(())
    }
}

/// Sample mean and standard error of the mean.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = crate::parallel::pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = crate::parallel::pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Flags estimates more than this many standard errors from their target.
pub const FLAG_SIGMAS: f64 = 4.0;

/// Monte-Carlo moments 1–5 of `ΔS`, plus (for the truncated sampler) the
/// coupled quantities `E[(ΔZ−ΔZ̃)²]` and `E[(ΔZ²−ΔZ̃²)(ΔZ−ΔZ̃)]` in
/// standard-normal units.
pub fn validate_moments(
    s: &IncrementSampler,
    dt: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<MomentReport> {
    if n_samples < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "moment validation needs at least 10^4 samples, got {n_samples}"
        )));
    }
    let coupled = s.kind == SamplerKind::TruncatedGaussian;
    let mut ds = vec![0.0; n_samples];
    let mut dw = vec![0.0; if coupled { n_samples } else { 0 }];
    for i in 0..n_samples {
        let mut one = [0.0];
        if coupled {
            let mut w = [0.0];
            s.sample_into(dt, rng, &mut one, Some(&mut w))?;
            dw[i] = w[0];
        } else {
            s.sample_into(dt, rng, &mut one, None)?;
        }
        ds[i] = one[0];
    }

    let normal_moment = |n: u32| match n {
        1 | 3 | 5 => 0.0,
        2 => dt,
        4 => 3.0 * dt * dt,
        _ => unreachable!(),
    };
    let matched = s.matched_moments();
    let mut lines = Vec::new();
    for n in 1..=5u32 {
        let powers: Vec<f64> = ds.iter().map(|x| x.powi(n as i32)).collect();
        let (est, se) = mean_se(&powers);
        let is_matched = n <= matched || (coupled && n % 2 == 1);
        let target = is_matched.then(|| Target::Equal(normal_moment(n)));
        let flagged = is_matched && (est - normal_moment(n)).abs() > FLAG_SIGMAS * se + 1e-12 * normal_moment(n).abs().max(dt.powi(n as i32 / 2));
        lines.push(MomentLine {
            name: format!("moment_{n}"),
            estimate: est,
            std_err: se,
            target,
            flagged,
        });
    }

    if coupled {
        let sq = dt.sqrt();
        let sq_diff: Vec<f64> = ds
            .iter()
            .zip(&dw)
            .map(|(t, w)| ((w - t) / sq).powi(2))
            .collect();
        let (est, se) = mean_se(&sq_diff);
        let bound = dt.powf(s.k);
        lines.push(MomentLine {
            name: "coupled_sq_diff".into(),
            estimate: est,
            std_err: se,
            target: Some(Target::AtMost(bound)),
            flagged: est - FLAG_SIGMAS * se > bound,
        });
        let cross: Vec<f64> = ds
            .iter()
            .zip(&dw)
            .map(|(t, w)| {
                let (z, zt) = (w / sq, t / sq);
                (z * z - zt * zt) * (z - zt)
            })
            .collect();
        let (est, se) = mean_se(&cross);
        lines.push(MomentLine {
            name: "coupled_cross_term".into(),
            estimate: est,
            std_err: se,
            target: Some(Target::Equal(0.0)),
            flagged: est.abs() > FLAG_SIGMAS * se,
        });
    }

    Ok(MomentReport {
        sampler: *s,
        dt,
        n_samples,
        lines,
    })
}
