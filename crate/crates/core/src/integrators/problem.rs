use std::fmt;

/// An Euler–Maruyama flow map, described by its update
/// `Δt·f(q) + G(q)·ΔS`.
///
/// The scaled map used inside Shu–Osher stages is
/// `q ↦ q + increment(q, a·Δt, w(a)·ΔS)` with `w` given by [`NoiseScaling`].
/// Finite-volume maps implement this trait with their flux-form update.
pub trait EmFlowMap: Sync {
    fn dim(&self) -> usize;

    fn noise_dim(&self) -> usize;

    /// Writes `Δt·f(q) + G(q)·ΔS` into `out`.
    fn increment(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]);

    /// Writes the new state `q + increment(q, Δt, ΔS)` into `out`.
    fn step(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        self.increment(q, dt, ds, out);
        for (o, qi) in out.iter_mut().zip(q) {
            *o += qi;
        }
    }

    /// Courant number of a full step from `q`, for maps that have one.
    fn cfl(&self, _q: &[f64], _dt: f64, _ds: &[f64]) -> Option<f64> {
        None
    }
}

/// Weight of the noise term in a time-scaled Euler–Maruyama call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoiseScaling {
    /// `a·G(q)ΔS`; consistent with the Butcher form of every method.
    #[default]
    Linear,
    /// `√a·G(q)ΔS`. Kept only for comparison runs.
    SqrtCompat,
}

impl NoiseScaling {
    pub fn weight(self, a: f64) -> f64 {
        match self {
            NoiseScaling::Linear => a,
            NoiseScaling::SqrtCompat => a.sqrt(),
        }
    }
}

/// `out = step(q, a·dt, w(a)·ds)`.
pub fn em_scaled(
    map: &dyn EmFlowMap,
    q: &[f64],
    a: f64,
    dt: f64,
    ds: &[f64],
    scaling: NoiseScaling,
    out: &mut [f64],
) {
    let w = scaling.weight(a);
    if w == 1.0 {
        map.step(q, a * dt, ds, out);
    } else {
        let scaled: Vec<f64> = ds.iter().map(|v| w * v).collect();
        map.step(q, a * dt, &scaled, out);
    }
}

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type DiffusionFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// `dq = f(q) dt + G(q) ∘ dW` with `d` state and `P` noise components.
pub struct SdeProblem {
    dim: usize,
    noise_dim: usize,
    drift: Box<DriftFn>,
    diffusion: Box<DiffusionFn>,
}

impl SdeProblem {
    /// `drift(q, out)` writes `f(q)`; `diffusion(q, ds, out)` writes
    /// `Σ_p g_p(q) ΔS^p` and must be linear in `ds`.
    pub fn new<F, G>(dim: usize, noise_dim: usize, drift: F, diffusion: G) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            noise_dim,
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
        }
    }

    /// Scalar `dq = λ q dt + μ q ∘ dW`.
    pub fn linear_scalar(lambda: f64, mu: f64) -> Self {
        Self::new(
            1,
            1,
            move |q, out| out[0] = lambda * q[0],
            move |q, ds, out| out[0] = mu * q[0] * ds[0],
        )
    }

    pub fn drift(&self, q: &[f64], out: &mut [f64]) {
        (self.drift)(q, out)
    }

    pub fn diffusion_apply(&self, q: &[f64], ds: &[f64], out: &mut [f64]) {
        (self.diffusion)(q, ds, out)
    }
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .finish_non_exhaustive()
    }
}

impl EmFlowMap for SdeProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    fn increment(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; self.dim];
        self.drift(q, out);
        self.diffusion_apply(q, ds, &mut g);
        for (o, gi) in out.iter_mut().zip(&g) {
            *o = dt * *o + gi;
        }
    }
}

/// Drift taken from one map and diffusion from another:
/// `increment = drift(q, Δt, 0) + diffusion(q, 0, ΔS)`.
pub struct SumMap<'a> {
    pub drift: &'a dyn EmFlowMap,
    pub diffusion: &'a dyn EmFlowMap,
}

impl EmFlowMap for SumMap<'_> {
    fn dim(&self) -> usize {
        self.drift.dim()
    }

    fn noise_dim(&self) -> usize {
        self.diffusion.noise_dim()
    }

    fn increment(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        let zeros = vec![0.0; self.drift.noise_dim()];
        let mut g = vec![0.0; q.len()];
        self.drift.increment(q, dt, &zeros, out);
        self.diffusion.increment(q, 0.0, ds, &mut g);
        for (o, gi) in out.iter_mut().zip(&g) {
            *o += gi;
        }
    }

    fn cfl(&self, q: &[f64], dt: f64, ds: &[f64]) -> Option<f64> {
        let zeros = vec![0.0; self.drift.noise_dim()];
        let a = self.drift.cfl(q, dt, &zeros);
        let b = self.diffusion.cfl(q, 0.0, ds);
        match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, y) => x.or(y),
        }
    }
}

/// A map that clamps every component of the plain Euler–Maruyama update of
/// an inner map into `[lo, hi]`. Its output lies in the box whenever its
/// input does, which makes it a convenient monotone test map.
pub struct ClampMap<'a> {
    pub inner: &'a dyn EmFlowMap,
    pub lo: f64,
    pub hi: f64,
}

impl EmFlowMap for ClampMap<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }

    fn increment(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        self.step(q, dt, ds, out);
        for (o, qi) in out.iter_mut().zip(q) {
            *o -= qi;
        }
    }

    fn step(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        self.inner.step(q, dt, ds, out);
        for o in out.iter_mut() {
            *o = o.clamp(self.lo, self.hi);
        }
    }
}
