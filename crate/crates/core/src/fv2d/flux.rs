use super::grid::Grid2D;
use super::recon::EdgeStates;
use crate::parallel::{map_indexed, Execution};

/// Local Lax–Friedrichs flux for `𝔽(q) = ½q² + v·q` with the stochastic
/// wave speed `α = max(|v + qL|, |v + qR|)`.
pub fn llf_em_flux(ql: f64, qr: f64, v: f64) -> f64 {
    let f = |q: f64| 0.5 * q * q + v * q;
    let alpha = (v + ql).abs().max((v + qr).abs());
    0.5 * (f(ql) + f(qr)) - 0.5 * alpha * (qr - ql)
}

/// `Δt · llf_em_flux(qL, qR, s/Δt)` evaluated without dividing by `Δt`,
/// where `s = a·ΔS`. Valid at `Δt = 0`.
pub fn llf_em_flux_dt(ql: f64, qr: f64, dt: f64, s: f64) -> f64 {
    let f = |q: f64| 0.5 * q * q * dt + s * q;
    let alpha = (s + dt * ql).abs().max((s + dt * qr).abs());
    0.5 * (f(ql) + f(qr)) - 0.5 * alpha * (qr - ql)
}

/// Exact Riemann (Godunov) flux for `f(q) = ½q²`.
pub fn godunov_burgers_flux(ql: f64, qr: f64) -> f64 {
    let f = |q: f64| 0.5 * q * q;
    if ql > qr {
        let s = 0.5 * (ql + qr);
        if s > 0.0 {
            f(ql)
        } else if s < 0.0 {
            f(qr)
        } else {
            f(ql).max(f(qr))
        }
    } else if ql < qr {
        if ql >= 0.0 {
            f(ql)
        } else if qr <= 0.0 {
            f(qr)
        } else {
            0.0
        }
    } else {
        f(ql)
    }
}

/// Upwind flux `u·qL` for `u ≥ 0`, `u·qR` otherwise.
pub fn upwind_cgrid_flux(ql: f64, qr: f64, u: f64) -> f64 {
    if u >= 0.0 {
        u * ql
    } else {
        u * qr
    }
}

/// Face fluxes: `fx[idx(i, j)]` on face `(i+½, j)`, `fy[idx(i, j)]` on
/// face `(i, j+½)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFluxes {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
}

/// Direction of a face normal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    X,
    Y,
}

/// Two-point Gauss average of `flux(dir, face, qL, qR)` over every face.
/// States come from the right/upper edge of the lower cell and the
/// left/lower edge of the upper cell.
pub fn edge_flux_integral<F>(g: &Grid2D, e: &EdgeStates, exec: Execution, flux: F) -> EdgeFluxes
where
    F: Fn(Dir, usize, f64, f64) -> f64 + Sync + Send,
{
    let both = map_indexed(g.len(), exec, |k| {
        let (i, j) = (k % g.nx, k / g.nx);
        let c = &e.cells[k];
        let east = &e.cells[g.idx(g.ip(i), j)];
        let north = &e.cells[g.idx(i, g.jp(j))];
        let fx = 0.5 * (flux(Dir::X, k, c.r[0], east.l[0]) + flux(Dir::X, k, c.r[1], east.l[1]));
        let fy = 0.5 * (flux(Dir::Y, k, c.u[0], north.d[0]) + flux(Dir::Y, k, c.u[1], north.d[1]));
        (fx, fy)
    });
    let (fx, fy) = both.into_iter().unzip();
    EdgeFluxes { fx, fy }
}

/// `q̄ − Δt[(fx_{i+½} − fx_{i−½})/dx + (fy_{j+½} − fy_{j−½})/dy]`.
pub fn evolve_flux_form(g: &Grid2D, q: &[f64], f: &EdgeFluxes, dt: f64, exec: Execution) -> Vec<f64> {
    let (lx, ly) = (dt / g.dx, dt / g.dy);
    map_indexed(g.len(), exec, |k| {
        let (i, j) = (k % g.nx, k / g.nx);
        let west = g.idx(g.im(i), j);
        let south = g.idx(i, g.jm(j));
        q[k] - lx * (f.fx[k] - f.fx[west]) - ly * (f.fy[k] - f.fy[south])
    })
}
