//! Linear test SDEs with closed-form solutions and Monte Carlo estimators
//! of weak and mean-square convergence orders.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::increments::{IncrementSampler, RngStream};
use crate::integrators::{SdeProblem, Stepper};
use crate::parallel::{map_indexed, pairwise_sum, Execution};

/// Which stochastic integral the exact solution refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpretation {
    Stratonovich,
    Ito,
}

impl FromStr for Interpretation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strat" | "stratonovich" => Ok(Interpretation::Stratonovich),
            "ito" | "itô" => Ok(Interpretation::Ito),
            other => Err(Error::InvalidArgument(format!("unknown interpretation `{other}`"))),
        }
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interpretation::Stratonovich => "stratonovich",
            Interpretation::Ito => "ito",
        })
    }
}

/// `dq = a q dt + b q dW` with `q(0) = q0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearTestSde {
    pub a: f64,
    pub b: f64,
    pub q0: f64,
    pub interpretation: Interpretation,
}

impl Default for LinearTestSde {
    /// `a = 1`, `b = 0.5`, `q0 = 1`, Itô.
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 0.5,
            q0: 1.0,
            interpretation: Interpretation::Ito,
        }
    }
}

impl LinearTestSde {
    pub fn new(a: f64, b: f64, q0: f64, interpretation: Interpretation) -> Self {
        Self { a, b, q0, interpretation }
    }

    /// Drift `a q`, diffusion `b q ΔS`, as seen by a stepper.
    pub fn problem(&self) -> SdeProblem {
        SdeProblem::linear_scalar(self.a, self.b)
    }

    /// Exact solution given the terminal Brownian value `W_t`.
    pub fn exact(&self, w: f64, t: f64) -> f64 {
        let rate = match self.interpretation {
            Interpretation::Stratonovich => self.a,
            Interpretation::Ito => self.a - 0.5 * self.b * self.b,
        };
        self.q0 * (rate * t + self.b * w).exp()
    }

    pub fn exact_mean(&self, t: f64) -> f64 {
        match self.interpretation {
            Interpretation::Stratonovich => self.q0 * (self.a * t + 0.5 * self.b * self.b * t).exp(),
            Interpretation::Ito => self.q0 * (self.a * t).exp(),
        }
    }

    pub fn exact_second_moment(&self, t: f64) -> f64 {
        let b2 = self.b * self.b;
        let rate = match self.interpretation {
            Interpretation::Stratonovich => 2.0 * self.a + 2.0 * b2,
            Interpretation::Ito => 2.0 * self.a + b2,
        };
        self.q0 * self.q0 * (rate * t).exp()
    }
}

/// Free-function form of [`LinearTestSde::exact`].
pub fn exact_path(sde: &LinearTestSde, w_terminal: f64, t: f64) -> f64 {
    sde.exact(w_terminal, t)
}

/// Terminal observable of a weak estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    Mean,
    SecondMoment,
}

/// Monte Carlo settings shared by both estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McSettings {
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl McSettings {
    pub fn new(t_end: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            t_end,
            n_paths,
            seed,
            exec: Execution::default(),
        }
    }
}

fn steps_for(t_end: f64, dt: f64) -> Result<usize> {
    let n = (t_end / dt).round();
    if !(dt > 0.0) || n < 1.0 || (n * dt - t_end).abs() > 1e-12 * t_end.max(1.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not divide t_end = {t_end}")));
    }
    Ok(n as usize)
}

/// Simulates one path on stream `path`, returning the terminal state and
/// the sum of the underlying standard-normal increments when requested.
fn simulate(
    stepper: &dyn Stepper,
    sde: &LinearTestSde,
    dt: f64,
    n_steps: usize,
    sampler: &IncrementSampler,
    seed: u64,
    path: usize,
    track_w: bool,
) -> Result<(f64, f64)> {
    let mut rng = RngStream::new(seed, path as u64);
    let mut q = vec![sde.q0];
    let mut ds = [0.0];
    let mut dw = [0.0];
    let mut w = 0.0;
    for k in 1..=n_steps {
        if track_w {
            sampler.sample_into(dt, &mut rng, &mut ds, Some(&mut dw))?;
            w += dw[0];
        } else {
            sampler.sample_into(dt, &mut rng, &mut ds, None)?;
        }
        q = stepper.step(&q, dt, &ds);
        if !q[0].is_finite() {
            return Err(Error::NonFinite { step: k });
        }
    }
    Ok((q[0], w))
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// `√(mean over paths of (q_N − q(T))²)`, with each path's exact solution
/// driven by the same underlying normals as the stepper's increments.
/// Needs a sampler with an underlying normal (Gaussian or truncated).
pub fn mean_square_error(
    stepper: &dyn Stepper,
    sde: &LinearTestSde,
    dt: f64,
    mc: McSettings,
    sampler: &IncrementSampler,
) -> Result<f64> {
    if !sampler.has_underlying_normal() {
        return Err(Error::InvalidSampler(format!(
            "{sampler} has no underlying normal; mean-square coupling is undefined"
        )));
    }
    let n_steps = steps_for(mc.t_end, dt)?;
    let sq = collect(map_indexed(mc.n_paths, mc.exec, |p| {
        simulate(stepper, sde, dt, n_steps, sampler, mc.seed, p, true)
            .map(|(q, w)| (q - sde.exact(w, mc.t_end)).powi(2))
    }))?;
    Ok((pairwise_sum(&sq) / mc.n_paths as f64).sqrt())
}

/// A Monte Carlo weak-error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakEstimate {
    pub estimate: f64,
    pub std_err: f64,
    pub exact: f64,
}

impl WeakEstimate {
    /// `|estimate − exact|`.
    pub fn error(&self) -> f64 {
        (self.estimate - self.exact).abs()
    }
}

/// Monte Carlo estimate of `E[φ(q_N)]` against its analytic value.
pub fn weak_estimate(
    stepper: &dyn Stepper,
    sde: &LinearTestSde,
    dt: f64,
    mc: McSettings,
    sampler: &IncrementSampler,
    observable: Observable,
) -> Result<WeakEstimate> {
    if mc.n_paths < 2 {
        return Err(Error::InvalidArgument("weak estimates need at least 2 paths".into()));
    }
    let n_steps = steps_for(mc.t_end, dt)?;
    let phi = |q: f64| match observable {
        Observable::Mean => q,
        Observable::SecondMoment => q * q,
    };
    let vals = collect(map_indexed(mc.n_paths, mc.exec, |p| {
        simulate(stepper, sde, dt, n_steps, sampler, mc.seed, p, false).map(|(q, _)| phi(q))
    }))?;
    let n = vals.len() as f64;
    let mean = pairwise_sum(&vals) / n;
    let dev: Vec<f64> = vals.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    let exact = match observable {
        Observable::Mean => sde.exact_mean(mc.t_end),
        Observable::SecondMoment => sde.exact_second_moment(mc.t_end),
    };
    Ok(WeakEstimate {
        estimate: mean,
        std_err: (var / n).sqrt(),
        exact,
    })
}

/// `|MC estimate − analytic value|` of a terminal observable.
pub fn weak_error(
    stepper: &dyn Stepper,
    sde: &LinearTestSde,
    dt: f64,
    mc: McSettings,
    sampler: &IncrementSampler,
    observable: Observable,
) -> Result<f64> {
    weak_estimate(stepper, sde, dt, mc, sampler, observable).map(|w| w.error())
}

/// Least-squares slope of `ln err` against `ln dt` and the RMS residual.
/// Non-positive or non-finite errors are dropped with a warning.
pub fn fit_order(errors: &[(f64, f64)]) -> Result<(f64, f64)> {
    let kept: Vec<(f64, f64)> = errors
        .iter()
        .filter(|&&(dt, e)| {
            let ok = e > 0.0 && e.is_finite() && dt > 0.0;
            if !ok {
                log::warn!("dropping error sample ({dt}, {e}) from order fit");
            }
            ok
        })
        .map(|&(dt, e)| (dt.ln(), e.ln()))
        .collect();
    if kept.len() < 3 {
        return Err(Error::TooFewPoints(kept.len()));
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = kept.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Ok((slope, (rss / n).sqrt()))
}

/// Which error a convergence study measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    WeakMean,
    MeanSquare,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "weak" | "weak_mean" => Ok(Estimator::WeakMean),
            "ms" | "mean_square" | "strong" => Ok(Estimator::MeanSquare),
            other => Err(Error::InvalidArgument(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Errors over a step-size ladder and the fitted order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub dt_list: Vec<f64>,
    pub n_paths: usize,
    pub estimator: Estimator,
    pub errors: Vec<f64>,
    /// Monte Carlo standard errors (weak estimator only).
    pub std_errs: Vec<Option<f64>>,
    pub fitted_order: f64,
    pub fit_residual: f64,
}

impl ConvergenceStudy {
    /// `dt,error` CSV followed by a comment line with the fit.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dt,error,std_err\n");
        for ((dt, e), se) in self.dt_list.iter().zip(&self.errors).zip(&self.std_errs) {
            let se = se.map(|v| format!("{v:e}")).unwrap_or_default();
            s.push_str(&format!("{dt:e},{e:e},{se}\n"));
        }
        s.push_str(&format!("# fitted_order={} residual={}\n", self.fitted_order, self.fit_residual));
        s
    }
}

fn check_dt_list(dt_list: &[f64]) -> Result<()> {
    if dt_list.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "a convergence study needs at least 4 step sizes, got {}",
            dt_list.len()
        )));
    }
    if dt_list.windows(2).any(|w| !(w[1] < w[0])) || dt_list.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("dt_list must be positive and decreasing".into()));
    }
    if dt_list[0] / dt_list[dt_list.len() - 1] < 8.0 {
        return Err(Error::InvalidArgument("dt_list must span at least a factor of 8".into()));
    }
    Ok(())
}

/// Measures the error at each `dt` and fits the order.
pub fn run_convergence(
    stepper: &dyn Stepper,
    sde: &LinearTestSde,
    dt_list: &[f64],
    mc: McSettings,
    sampler: &IncrementSampler,
    estimator: Estimator,
) -> Result<ConvergenceStudy> {
    check_dt_list(dt_list)?;
    let mut errors = Vec::with_capacity(dt_list.len());
    let mut std_errs = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        match estimator {
            Estimator::MeanSquare => {
                errors.push(mean_square_error(stepper, sde, dt, mc, sampler)?);
                std_errs.push(None);
            }
            Estimator::WeakMean => {
                let w = weak_estimate(stepper, sde, dt, mc, sampler, Observable::Mean)?;
                errors.push(w.error());
                std_errs.push(Some(w.std_err));
            }
        }
    }
    let pairs: Vec<(f64, f64)> = dt_list.iter().copied().zip(errors.iter().copied()).collect();
    let (fitted_order, fit_residual) = fit_order(&pairs)?;
    Ok(ConvergenceStudy {
        dt_list: dt_list.to_vec(),
        n_paths: mc.n_paths,
        estimator,
        errors,
        std_errs,
        fitted_order,
        fit_residual,
    })
}

/// Parses a comma- or space-separated step-size list; entries may be
/// fractions (`1/16`) or powers of two (`2^-4`).
pub fn parse_dt_list(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            if let Some(e) = t.strip_prefix("2^") {
                e.parse::<i32>().map(|e| 2f64.powi(e)).map_err(|_| Error::InvalidArgument(format!("bad dt `{t}`")))
            } else {
                crate::tableau::parse_number(t)
            }
        })
        .collect()
}
