use std::fmt;

use super::problem::{EmFlowMap, NoiseScaling, SumMap};
use super::steppers::{
    em_step, sark_step, sgark_step, shu_osher_step, srk_step, strang_additive_step,
    strang_sequential_step, ShuOsherMethod,
};
use crate::diagnostics::{RecordSpec, RunRecord};
use crate::error::{Error, Result};
use crate::increments::{IncrementSampler, RngStream};
use crate::tableau::{builtin, ArkPair, ButcherTableau, GarkTableaus};

/// Anything that advances a state by one step given `(Δt, ΔS)`.
pub trait Stepper: Sync {
    fn step(&self, q: &[f64], dt: f64, ds: &[f64]) -> Vec<f64>;

    fn cfl(&self, _q: &[f64], _dt: f64, _ds: &[f64]) -> Option<f64> {
        None
    }
}

impl<F> Stepper for F
where
    F: Fn(&[f64], f64, &[f64]) -> Vec<f64> + Sync,
{
    fn step(&self, q: &[f64], dt: f64, ds: &[f64]) -> Vec<f64> {
        self(q, dt, ds)
    }
}

/// A time-integration method with its coefficients bound.
#[derive(Clone, Debug)]
pub enum Scheme {
    EulerMaruyama,
    Butcher(ButcherTableau),
    ShuOsher(ShuOsherMethod),
    Additive(ArkPair),
    Gark(GarkTableaus),
    StrangSequential { m: usize, n: usize },
    StrangAdditive { m: usize, n: usize },
}

impl Scheme {
    /// Resolves a method name. SSP names map to their Shu–Osher form; other
    /// builtin tableaus (`midpoint`, `gamma(..)`, `fe`) to Butcher form.
    /// `m` and `n` are the substep counts used by the splitting methods.
    pub fn from_name(name: &str, m: usize, n: usize) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        match lower.as_str() {
            "em" | "euler_maruyama" => Ok(Scheme::EulerMaruyama),
            "strang_sequential" | "strang_seq" | "sequential_split" => {
                Ok(Scheme::StrangSequential { m, n })
            }
            "strang_additive" | "strang_add" | "additive_split" => {
                Ok(Scheme::StrangAdditive { m, n })
            }
            other => match other.parse::<ShuOsherMethod>() {
                Ok(so) => Ok(Scheme::ShuOsher(so)),
                Err(_) => {
                    let body = other.strip_prefix("butcher:").unwrap_or(other);
                    Ok(Scheme::Butcher(builtin(body)?))
                }
            },
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::EulerMaruyama => write!(f, "em"),
            Scheme::Butcher(t) => write!(f, "butcher(s={})", t.stages()),
            Scheme::ShuOsher(m) => write!(f, "{m:?}"),
            Scheme::Additive(_) => write!(f, "sark"),
            Scheme::Gark(_) => write!(f, "sgark"),
            Scheme::StrangSequential { m, n } => write!(f, "strang_sequential(m={m},n={n})"),
            Scheme::StrangAdditive { m, n } => write!(f, "strang_additive(m={m},n={n})"),
        }
    }
}

/// The operators a scheme acts on.
#[derive(Clone, Copy)]
pub enum Operators<'a> {
    /// One map carrying both drift and diffusion.
    Single(&'a dyn EmFlowMap),
    /// Drift-only and diffusion-only maps.
    Split {
        drift: &'a dyn EmFlowMap,
        diffusion: &'a dyn EmFlowMap,
    },
}

/// A [`Scheme`] bound to its operators.
pub struct Integrator<'a> {
    pub scheme: Scheme,
    pub ops: Operators<'a>,
    pub scaling: NoiseScaling,
}

impl<'a> Integrator<'a> {
    pub fn new(scheme: Scheme, map: &'a dyn EmFlowMap) -> Self {
        Self {
            scheme,
            ops: Operators::Single(map),
            scaling: NoiseScaling::Linear,
        }
    }

    pub fn split(scheme: Scheme, drift: &'a dyn EmFlowMap, diffusion: &'a dyn EmFlowMap) -> Self {
        Self {
            scheme,
            ops: Operators::Split { drift, diffusion },
            scaling: NoiseScaling::Linear,
        }
    }

    pub fn with_scaling(mut self, scaling: NoiseScaling) -> Self {
        self.scaling = scaling;
        self
    }

    fn parts(&self) -> (&'a dyn EmFlowMap, &'a dyn EmFlowMap) {
        match self.ops {
            Operators::Single(m) => (m, m),
            Operators::Split { drift, diffusion } => (drift, diffusion),
        }
    }
}

impl Stepper for Integrator<'_> {
    fn step(&self, q: &[f64], dt: f64, ds: &[f64]) -> Vec<f64> {
        let (drift, diffusion) = self.parts();
        let sum;
        let full: &dyn EmFlowMap = match self.ops {
            Operators::Single(m) => m,
            Operators::Split { drift, diffusion } => {
                sum = SumMap { drift, diffusion };
                &sum
            }
        };
        match &self.scheme {
            Scheme::EulerMaruyama => em_step(full, q, dt, ds),
            Scheme::Butcher(t) => srk_step(t, full, q, dt, ds),
            Scheme::ShuOsher(m) => shu_osher_step(*m, full, q, dt, ds, self.scaling),
            Scheme::Additive(p) => sark_step(p, drift, diffusion, q, dt, ds),
            Scheme::Gark(g) => sgark_step(g, drift, diffusion, q, dt, ds),
            Scheme::StrangSequential { m, n } => {
                strang_sequential_step(*m, *n, drift, diffusion, q, dt, ds)
            }
            Scheme::StrangAdditive { m, n } => strang_additive_step(*m, *n, drift, diffusion, q, dt, ds),
        }
    }

    fn cfl(&self, q: &[f64], dt: f64, ds: &[f64]) -> Option<f64> {
        match self.ops {
            Operators::Single(m) => m.cfl(q, dt, ds),
            Operators::Split { drift, diffusion } => SumMap { drift, diffusion }.cfl(q, dt, ds),
        }
    }
}

/// What a per-step hook sees.
pub struct StepView<'a> {
    /// 1-based index of the step just taken.
    pub step: usize,
    pub time: f64,
    pub prev: &'a [f64],
    pub state: &'a [f64],
    pub ds: &'a [f64],
}

/// Time grid of a path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSpec {
    pub dt: f64,
    pub n_steps: usize,
    pub noise_dim: usize,
}

impl PathSpec {
    /// `n_steps` equal steps to `t_end`.
    pub fn to_horizon(t_end: f64, n_steps: usize, noise_dim: usize) -> Result<Self> {
        if n_steps == 0 || !(t_end > 0.0) {
            return Err(Error::InvalidArgument(
                "a horizon needs t_end > 0 and at least one step".into(),
            ));
        }
        let dt = t_end / n_steps as f64;
        if (dt * n_steps as f64 - t_end).abs() > 1e-12 * t_end.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "{n_steps} steps of {dt} do not reach t_end = {t_end}"
            )));
        }
        Ok(Self {
            dt,
            n_steps,
            noise_dim,
        })
    }
}

/// Final state and per-step record of one path.
#[derive(Clone, Debug)]
pub struct PathRun {
    pub state: Vec<f64>,
    pub record: RunRecord,
}

/// Integrates one path: samples `ΔS` once per step from `rng`, advances
/// with `stepper`, records diagnostics, then calls `hook`.
pub fn run_path(
    stepper: &dyn Stepper,
    q0: &[f64],
    spec: PathSpec,
    sampler: &IncrementSampler,
    rng: &mut RngStream,
    record_spec: RecordSpec,
    mut hook: Option<&mut dyn FnMut(&StepView<'_>)>,
) -> Result<PathRun> {
    let mut q = q0.to_vec();
    let mut record = RunRecord::new(record_spec);
    record.push(0.0, &q, None);
    let mut ds = vec![0.0; spec.noise_dim];
    for k in 1..=spec.n_steps {
        sampler.sample_into(spec.dt, rng, &mut ds, None)?;
        let next = stepper.step(&q, spec.dt, &ds);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        let cfl = stepper.cfl(&q, spec.dt, &ds);
        let time = k as f64 * spec.dt;
        record.push(time, &next, cfl);
        if let Some(h) = hook.as_deref_mut() {
            h(&StepView {
                step: k,
                time,
                prev: &q,
                state: &next,
                ds: &ds,
            });
        }
        q = next;
    }
    Ok(PathRun { state: q, record })
}
