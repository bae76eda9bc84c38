//! One-step maps. Every stepper samples nothing itself: the caller passes the
//! increment `ΔS` drawn once for the step, and all stages reuse it.

use std::str::FromStr;

use super::problem::{em_scaled, EmFlowMap, NoiseScaling};
use crate::error::{Error, Result};
use crate::tableau::{ArkPair, Builtin, ButcherTableau, GarkTableaus, StageRef};

/// Plain Euler–Maruyama step `q + Δt f(q) + G(q)ΔS`.
pub fn em_step(map: &dyn EmFlowMap, q: &[f64], dt: f64, ds: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    map.step(q, dt, ds, &mut out);
    out
}

fn axpy_into(acc: &mut [f64], a: f64, x: &[f64]) {
    if a != 0.0 {
        for (y, xi) in acc.iter_mut().zip(x) {
            *y += a * xi;
        }
    }
}

/// Stochastic RK in Butcher form: drift and noise share the weights
/// `a_ij`, `b_i`, and each stage increment is `Δt f(k_j) + G(k_j)ΔS`.
pub fn srk_step(t: &ButcherTableau, map: &dyn EmFlowMap, q: &[f64], dt: f64, ds: &[f64]) -> Vec<f64> {
    let s = t.stages();
    let d = q.len();
    let mut incs: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut stage = vec![0.0; d];
    for i in 0..s {
        stage.copy_from_slice(q);
        for (j, inc) in incs.iter().enumerate() {
            axpy_into(&mut stage, t.a(i, j), inc);
        }
        let mut inc = vec![0.0; d];
        map.increment(&stage, dt, ds, &mut inc);
        incs.push(inc);
    }
    let mut out = q.to_vec();
    for (bi, inc) in t.b().iter().zip(&incs) {
        axpy_into(&mut out, *bi, inc);
    }
    out
}

/// SSP methods with a convex-combination (Shu–Osher) implementation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShuOsherMethod {
    Ssp22,
    Ssp33,
    Ssp104,
}

impl ShuOsherMethod {
    pub fn butcher(self) -> ButcherTableau {
        match self {
            ShuOsherMethod::Ssp22 => Builtin::Ssp22,
            ShuOsherMethod::Ssp33 => Builtin::Ssp33,
            ShuOsherMethod::Ssp104 => Builtin::Ssp104,
        }
        .tableau()
        .expect("builtin tableau")
    }

    /// Radius of monotonicity of the method.
    pub fn radius(self) -> f64 {
        match self {
            ShuOsherMethod::Ssp22 | ShuOsherMethod::Ssp33 => 1.0,
            ShuOsherMethod::Ssp104 => 6.0,
        }
    }
}

impl FromStr for ShuOsherMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ssp22" | "heun" => Ok(ShuOsherMethod::Ssp22),
            "ssp33" => Ok(ShuOsherMethod::Ssp33),
            "ssp104" => Ok(ShuOsherMethod::Ssp104),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

/// `out = α·x + β·y`.
fn combine(out: &mut [f64], alpha: f64, x: &[f64], beta: f64, y: &[f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = alpha * xi + beta * yi;
    }
}

/// Shu–Osher step: every stage is an Euler–Maruyama call or a convex
/// combination of earlier values, so any convex bound satisfied by `em`
/// carries over to the full step.
pub fn shu_osher_step(
    method: ShuOsherMethod,
    em: &dyn EmFlowMap,
    q: &[f64],
    dt: f64,
    ds: &[f64],
    scaling: NoiseScaling,
) -> Vec<f64> {
    let d = q.len();
    let mut work = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut out = vec![0.0; d];
    match method {
        ShuOsherMethod::Ssp22 => {
            em_scaled(em, q, 1.0, dt, ds, scaling, &mut work);
            em_scaled(em, &work, 1.0, dt, ds, scaling, &mut tmp);
            combine(&mut out, 0.5, q, 0.5, &tmp);
        }
        ShuOsherMethod::Ssp33 => {
            em_scaled(em, q, 1.0, dt, ds, scaling, &mut work);
            em_scaled(em, &work, 1.0, dt, ds, scaling, &mut tmp);
            combine(&mut work, 0.75, q, 0.25, &tmp);
            em_scaled(em, &work, 1.0, dt, ds, scaling, &mut tmp);
            combine(&mut out, 1.0 / 3.0, q, 2.0 / 3.0, &tmp);
        }
        ShuOsherMethod::Ssp104 => {
            let a = 1.0 / 6.0;
            work.copy_from_slice(q);
            for _ in 0..4 {
                em_scaled(em, &work, a, dt, ds, scaling, &mut tmp);
                std::mem::swap(&mut work, &mut tmp);
            }
            em_scaled(em, &work, a, dt, ds, scaling, &mut tmp);
            // `out` doubles as the accumulator 1/25 qⁿ + 9/25 EM(q⁴).
            combine(&mut out, 1.0 / 25.0, q, 9.0 / 25.0, &tmp);
            combine(&mut work, 3.0 / 5.0, q, 2.0 / 5.0, &tmp);
            for _ in 0..4 {
                em_scaled(em, &work, a, dt, ds, scaling, &mut tmp);
                std::mem::swap(&mut work, &mut tmp);
            }
            em_scaled(em, &work, a, dt, ds, scaling, &mut tmp);
            axpy_into(&mut out, 15.0 / 25.0, &tmp);
        }
    }
    out
}

/// `Δt f(q)` through a map, with the noise switched off.
fn drift_increment(map: &dyn EmFlowMap, q: &[f64], dt: f64, out: &mut [f64]) {
    let zeros = vec![0.0; map.noise_dim()];
    map.increment(q, dt, &zeros, out);
}

/// `G(q)ΔS` through a map, with the drift switched off.
fn diffusion_increment(map: &dyn EmFlowMap, q: &[f64], ds: &[f64], out: &mut [f64]) {
    map.increment(q, 0.0, ds, out);
}

/// Stochastic additive RK: drift weighted by `(A, b)`, diffusion by
/// `(Ã, b̃)`, over shared stages. `drift` is evaluated with zero noise and
/// `diffusion` with zero time step; pass the same map twice for an
/// [`SdeProblem`](super::SdeProblem).
pub fn sark_step(
    pair: &ArkPair,
    drift: &dyn EmFlowMap,
    diffusion: &dyn EmFlowMap,
    q: &[f64],
    dt: f64,
    ds: &[f64],
) -> Vec<f64> {
    let s = pair.drift.stages();
    let d = q.len();
    let mut f_incs: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut g_incs: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut stage = vec![0.0; d];
    for i in 0..s {
        stage.copy_from_slice(q);
        for j in 0..i {
            axpy_into(&mut stage, pair.drift.a(i, j), &f_incs[j]);
            axpy_into(&mut stage, pair.diffusion.a(i, j), &g_incs[j]);
        }
        let mut fi = vec![0.0; d];
        let mut gi = vec![0.0; d];
        drift_increment(drift, &stage, dt, &mut fi);
        diffusion_increment(diffusion, &stage, ds, &mut gi);
        f_incs.push(fi);
        g_incs.push(gi);
    }
    let mut out = q.to_vec();
    for i in 0..s {
        axpy_into(&mut out, pair.drift.b()[i], &f_incs[i]);
        axpy_into(&mut out, pair.diffusion.b()[i], &g_incs[i]);
    }
    out
}

/// Stochastic generalised additive RK with separate drift and diffusion
/// stage families, evaluated in the tableau's explicit order.
pub fn sgark_step(
    g: &GarkTableaus,
    drift: &dyn EmFlowMap,
    diffusion: &dyn EmFlowMap,
    q: &[f64],
    dt: f64,
    ds: &[f64],
) -> Vec<f64> {
    let (sf, sg) = g.stages();
    let d = q.len();
    let mut f_incs: Vec<Option<Vec<f64>>> = vec![None; sf];
    let mut g_incs: Vec<Option<Vec<f64>>> = vec![None; sg];
    let mut stage = vec![0.0; d];
    for &node in g.order() {
        let (row_f, row_g) = match node {
            StageRef::F(i) => (&g.a_ff[i], &g.a_fg[i]),
            StageRef::G(i) => (&g.a_gf[i], &g.a_gg[i]),
        };
        stage.copy_from_slice(q);
        for (j, c) in row_f.iter().enumerate() {
            if *c != 0.0 {
                axpy_into(&mut stage, *c, f_incs[j].as_ref().expect("explicit order"));
            }
        }
        for (j, c) in row_g.iter().enumerate() {
            if *c != 0.0 {
                axpy_into(&mut stage, *c, g_incs[j].as_ref().expect("explicit order"));
            }
        }
        let mut inc = vec![0.0; d];
        match node {
            StageRef::F(i) => {
                drift_increment(drift, &stage, dt, &mut inc);
                f_incs[i] = Some(inc);
            }
            StageRef::G(i) => {
                diffusion_increment(diffusion, &stage, ds, &mut inc);
                g_incs[i] = Some(inc);
            }
        }
    }
    let mut out = q.to_vec();
    for (b, inc) in g.b_f.iter().zip(&f_incs) {
        axpy_into(&mut out, *b, inc.as_ref().expect("all stages evaluated"));
    }
    for (b, inc) in g.b_g.iter().zip(&g_incs) {
        axpy_into(&mut out, *b, inc.as_ref().expect("all stages evaluated"));
    }
    out
}

/// `count` consecutive Shu–Osher SSP22 steps of `(dt, ds)` each.
fn ssp22_repeated(em: &dyn EmFlowMap, q: &[f64], dt: f64, ds: &[f64], count: usize) -> Vec<f64> {
    let mut cur = q.to_vec();
    for _ in 0..count {
        cur = shu_osher_step(ShuOsherMethod::Ssp22, em, &cur, dt, ds, NoiseScaling::Linear);
    }
    cur
}

/// SSP(2m,2) drift-only pass over a time `span`: `m` SSP22 substeps of `span/m`.
pub fn drift_pass(m: usize, drift_em: &dyn EmFlowMap, q: &[f64], span: f64) -> Vec<f64> {
    let zeros = vec![0.0; drift_em.noise_dim()];
    ssp22_repeated(drift_em, q, span / m as f64, &zeros, m)
}

/// SSP(2n,2) diffusion-only pass: `n` SSP22 substeps, each consuming `ΔS/n`.
pub fn diffusion_pass(n: usize, diff_em: &dyn EmFlowMap, q: &[f64], ds: &[f64]) -> Vec<f64> {
    let part: Vec<f64> = ds.iter().map(|v| v / n as f64).collect();
    ssp22_repeated(diff_em, q, 0.0, &part, n)
}

fn check_counts(m: usize, n: usize) {
    assert!(m >= 1 && n >= 1, "splitting substep counts must be >= 1");
}

/// Sequential Strang splitting: drift over `Δt/2`, full diffusion, drift
/// over `Δt/2`.
pub fn strang_sequential_step(
    m: usize,
    n: usize,
    drift_em: &dyn EmFlowMap,
    diff_em: &dyn EmFlowMap,
    q: &[f64],
    dt: f64,
    ds: &[f64],
) -> Vec<f64> {
    check_counts(m, n);
    let qa = drift_pass(m, drift_em, q, 0.5 * dt);
    let qb = diffusion_pass(n, diff_em, &qa, ds);
    drift_pass(m, drift_em, &qb, 0.5 * dt)
}

/// Additive Strang splitting: the average of drift-then-diffusion and
/// diffusion-then-drift.
pub fn strang_additive_step(
    m: usize,
    n: usize,
    drift_em: &dyn EmFlowMap,
    diff_em: &dyn EmFlowMap,
    q: &[f64],
    dt: f64,
    ds: &[f64],
) -> Vec<f64> {
    check_counts(m, n);
    let qa = drift_pass(m, drift_em, q, dt);
    let qb = diffusion_pass(n, diff_em, q, ds);
    let qba = diffusion_pass(n, diff_em, &qa, ds);
    let qab = drift_pass(m, drift_em, &qb, dt);
    let mut out = vec![0.0; q.len()];
    combine(&mut out, 0.5, &qab, 0.5, &qba);
    out
}
