use std::sync::atomic::{AtomicU64, Ordering};

use super::flux::{edge_flux_integral, evolve_flux_form, godunov_burgers_flux, llf_em_flux_dt, upwind_cgrid_flux, Dir};
use super::grid::{CellField, Grid2D, Stencil};
use super::poisson::PoissonSolver;
use super::recon::{limit_lmp, reconstruct, EdgeStates};
use super::velocity::{cgrid_velocities, VelocityFields};
use crate::integrators::EmFlowMap;
use crate::parallel::Execution;

/// Reconstructed and optionally limited edge states.
pub fn edge_states(g: &Grid2D, q: &[f64], limiter: Option<Stencil>, exec: Execution) -> EdgeStates {
    let e = reconstruct(g, q, exec);
    match limiter {
        Some(s) => limit_lmp(g, q, &e, s, exec),
        None => e,
    }
}

fn flux_step(g: &Grid2D, q: &[f64], e: &EdgeStates, exec: Execution, out: &mut [f64], flux: impl Fn(Dir, usize, f64, f64) -> f64 + Sync + Send) {
    let f = edge_flux_integral(g, e, exec, flux);
    out.copy_from_slice(&evolve_flux_form(g, q, &f, 1.0, exec));
}

fn increment_from_step(map: &dyn EmFlowMap, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
    map.step(q, dt, ds, out);
    for (o, qi) in out.iter_mut().zip(q) {
        *o -= qi;
    }
}

fn max_abs(q: &[f64]) -> f64 {
    q.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Burgers with constant-coefficient noise,
/// `dq + (½q²)_x dt + (½q²)_y dt + (a q_x + b q_y)∘dW = 0`,
/// discretised with the stochastic LLF flux.
///
/// Courant numbers are reported as the sum of the directional maxima
/// `max|aΔS + Δt q|/dx + max|bΔS + Δt q|/dy`.
#[derive(Clone, Debug)]
pub struct BurgersConstNoise {
    pub grid: Grid2D,
    pub a: f64,
    pub b: f64,
    pub limiter: Option<Stencil>,
    pub exec: Execution,
}

impl EmFlowMap for BurgersConstNoise {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn increment(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        increment_from_step(self, q, dt, ds, out)
    }

    fn step(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        let e = edge_states(&self.grid, q, self.limiter, self.exec);
        let (sx, sy) = (self.a * ds[0], self.b * ds[0]);
        flux_step(&self.grid, q, &e, self.exec, out, |dir, _, l, r| match dir {
            Dir::X => llf_em_flux_dt(l, r, dt, sx),
            Dir::Y => llf_em_flux_dt(l, r, dt, sy),
        });
    }

    fn cfl(&self, q: &[f64], dt: f64, ds: &[f64]) -> Option<f64> {
        let speed = |s: f64| q.iter().fold(0.0f64, |m, v| m.max((s + dt * v).abs()));
        Some(speed(self.a * ds[0]) / self.grid.dx + speed(self.b * ds[0]) / self.grid.dy)
    }
}

/// Linear transport `dq + div(u q) dt + Σ_p div(ξ_p q)∘dW^p = 0` with
/// C-grid upwind fluxes. Face displacements are `Δt·u + Σ_p ΔS^p ξ_p`.
///
/// Courant numbers are `max|disp_x|/dx + max|disp_y|/dy`.
#[derive(Clone, Debug)]
pub struct Advection {
    pub grid: Grid2D,
    pub u: VelocityFields,
    pub xi: Vec<VelocityFields>,
    pub limiter: Option<Stencil>,
    pub exec: Execution,
}

impl Advection {
    /// `Δt·u + Σ_p ΔS^p ξ_p`.
    pub fn displacement(&self, dt: f64, ds: &[f64]) -> VelocityFields {
        let mut d = VelocityFields::zeros(&self.grid);
        d.axpy(dt, &self.u);
        for (x, &s) in self.xi.iter().zip(ds) {
            if s != 0.0 {
                d.axpy(s, x);
            }
        }
        d
    }
}

fn transport_step(g: &Grid2D, q: &[f64], d: &VelocityFields, limiter: Option<Stencil>, exec: Execution, out: &mut [f64]) {
    let e = edge_states(g, q, limiter, exec);
    flux_step(g, q, &e, exec, out, |dir, k, l, r| match dir {
        Dir::X => upwind_cgrid_flux(l, r, d.u[k]),
        Dir::Y => upwind_cgrid_flux(l, r, d.v[k]),
    });
}

fn transport_cfl(g: &Grid2D, d: &VelocityFields) -> f64 {
    max_abs(&d.u) / g.dx + max_abs(&d.v) / g.dy
}

impl EmFlowMap for Advection {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn noise_dim(&self) -> usize {
        self.xi.len().max(1)
    }

    fn increment(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        increment_from_step(self, q, dt, ds, out)
    }

    fn step(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        let d = self.displacement(dt, ds);
        transport_step(&self.grid, q, &d, self.limiter, self.exec, out);
    }

    fn cfl(&self, _q: &[f64], dt: f64, ds: &[f64]) -> Option<f64> {
        Some(transport_cfl(&self.grid, &self.displacement(dt, ds)))
    }
}

/// Vorticity form of 2-D Euler with SALT noise. Each call solves
/// `ψ = −Δ⁻¹q` spectrally, forms `Δt·ψ + Σ_p ΔS^p Ψ_p` and transports
/// `q` with the C-grid displacements of that streamfunction.
#[derive(Debug)]
pub struct EulerSalt {
    pub grid: Grid2D,
    pub limiter: Option<Stencil>,
    pub exec: Execution,
    poisson: PoissonSolver,
    modes: Vec<Vec<f64>>,
    max_div: AtomicU64,
}

impl EulerSalt {
    /// Noise streamfunctions `Ψ_p = amplitude · sin(2pπx) sin(2pπy)` for
    /// `p = 0..n_modes`, sampled at cell centres.
    pub fn new(grid: Grid2D, n_modes: usize, amplitude: f64, limiter: Option<Stencil>) -> Self {
        use std::f64::consts::PI;
        let modes = (0..n_modes)
            .map(|p| {
                let w = 2.0 * PI * p as f64;
                CellField::from_fn(grid, |x, y| amplitude * (w * x).sin() * (w * y).sin()).data
            })
            .collect();
        Self {
            grid,
            limiter,
            exec: Execution::default(),
            poisson: PoissonSolver::new(grid),
            modes,
            max_div: AtomicU64::new(0),
        }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Deterministic velocity of a vorticity field.
    pub fn velocity(&self, q: &[f64]) -> VelocityFields {
        cgrid_velocities(&self.grid, &self.poisson.solve(q))
    }

    /// Velocities of the noise streamfunctions.
    pub fn noise_fields(&self) -> Vec<VelocityFields> {
        self.modes.iter().map(|m| cgrid_velocities(&self.grid, m)).collect()
    }

    pub fn displacement(&self, q: &[f64], dt: f64, ds: &[f64]) -> VelocityFields {
        let psi = self.poisson.solve(q);
        let vel = cgrid_velocities(&self.grid, &psi);
        let div = vel.max_abs_divergence(&self.grid);
        self.max_div.fetch_max(div.to_bits(), Ordering::Relaxed);
        let mut phi: Vec<f64> = psi.iter().map(|v| dt * v).collect();
        for (m, &s) in self.modes.iter().zip(ds) {
            if s != 0.0 {
                for (p, v) in phi.iter_mut().zip(m) {
                    *p += s * v;
                }
            }
        }
        cgrid_velocities(&self.grid, &phi)
    }

    /// Largest discrete divergence of any deterministic velocity built so far.
    pub fn max_velocity_divergence(&self) -> f64 {
        f64::from_bits(self.max_div.load(Ordering::Relaxed))
    }
}

impl EmFlowMap for EulerSalt {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn noise_dim(&self) -> usize {
        self.modes.len().max(1)
    }

    fn increment(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        increment_from_step(self, q, dt, ds, out)
    }

    fn step(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        let d = self.displacement(q, dt, ds);
        transport_step(&self.grid, q, &d, self.limiter, self.exec, out);
    }

    fn cfl(&self, q: &[f64], dt: f64, ds: &[f64]) -> Option<f64> {
        Some(transport_cfl(&self.grid, &self.displacement(q, dt, ds)))
    }
}

/// Deterministic 2-D Burgers drift `(½q²)_x + (½q²)_y` with Godunov
/// fluxes in each direction. Ignores `ΔS`.
#[derive(Clone, Debug)]
pub struct GodunovBurgers {
    pub grid: Grid2D,
    pub limiter: Option<Stencil>,
    pub exec: Execution,
}

impl EmFlowMap for GodunovBurgers {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn increment(&self, q: &[f64], dt: f64, ds: &[f64], out: &mut [f64]) {
        increment_from_step(self, q, dt, ds, out)
    }

    fn step(&self, q: &[f64], dt: f64, _ds: &[f64], out: &mut [f64]) {
        if dt == 0.0 {
            out.copy_from_slice(q);
            return;
        }
        let e = edge_states(&self.grid, q, self.limiter, self.exec);
        flux_step(&self.grid, q, &e, self.exec, out, |_, _, l, r| dt * godunov_burgers_flux(l, r));
    }

    fn cfl(&self, q: &[f64], dt: f64, _ds: &[f64]) -> Option<f64> {
        let s = dt * max_abs(q);
        Some(s / self.grid.dx + s / self.grid.dy)
    }
}

/// Problems with a finite-volume Euler–Maruyama map.
#[derive(Clone, Debug)]
pub enum FvProblem {
    BurgersConstNoise { a: f64, b: f64 },
    Advection { u: VelocityFields, xi: Vec<VelocityFields> },
    EulerSalt { n_modes: usize, amplitude: f64 },
    BurgersTransportNoise { xi: Vec<VelocityFields> },
}

/// A single map or a drift/diffusion pair for splitting methods.
pub enum BuiltMap {
    Single(Box<dyn EmFlowMap>),
    Split {
        drift: Box<dyn EmFlowMap>,
        diffusion: Box<dyn EmFlowMap>,
    },
}

pub fn build_em_map(grid: Grid2D, problem: FvProblem, limiter: Option<Stencil>, exec: Execution) -> BuiltMap {
    match problem {
        FvProblem::BurgersConstNoise { a, b } => BuiltMap::Single(Box::new(BurgersConstNoise { grid, a, b, limiter, exec })),
        FvProblem::Advection { u, xi } => BuiltMap::Single(Box::new(Advection { grid, u, xi, limiter, exec })),
        FvProblem::EulerSalt { n_modes, amplitude } => {
            BuiltMap::Single(Box::new(EulerSalt::new(grid, n_modes, amplitude, limiter).with_exec(exec)))
        }
        FvProblem::BurgersTransportNoise { xi } => BuiltMap::Split {
            drift: Box::new(GodunovBurgers { grid, limiter, exec }),
            diffusion: Box::new(Advection {
                grid,
                u: VelocityFields::zeros(&grid),
                xi,
                limiter,
                exec,
            }),
        },
    }
}
