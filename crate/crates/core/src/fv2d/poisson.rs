use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid2D;

/// Periodic spectral solver for `ψ = −Δ⁻¹ q` with the mean mode set to 0.
#[derive(Clone)]
pub struct PoissonSolver {
    grid: Grid2D,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
}

fn wavenumber(m: usize, n: usize) -> f64 {
    let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
    2.0 * PI * signed
}

impl PoissonSolver {
    pub fn new(grid: Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        let k2 = (0..grid.len())
            .map(|k| {
                let kx = wavenumber(k % grid.nx, grid.nx);
                let ky = wavenumber(k / grid.nx, grid.ny);
                kx * kx + ky * ky
            })
            .collect();
        Self {
            grid,
            fwd_x: planner.plan_fft_forward(grid.nx),
            inv_x: planner.plan_fft_inverse(grid.nx),
            fwd_y: planner.plan_fft_forward(grid.ny),
            inv_y: planner.plan_fft_inverse(grid.ny),
            k2,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], fx: &dyn Fft<f64>, fy: &dyn Fft<f64>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        for row in data.chunks_mut(nx) {
            fx.process(row);
        }
        let mut col = vec![Complex64::default(); ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = data[j * nx + i];
            }
            fy.process(&mut col);
            for j in 0..ny {
                data[j * nx + i] = col[j];
            }
        }
    }

    /// Multiplies the spectrum of `q` by `symbol(k²)` with the zero mode
    /// forced to 0.
    fn apply(&self, q: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut data: Vec<Complex64> = q.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, self.fwd_x.as_ref(), self.fwd_y.as_ref());
        for (z, &k2) in data.iter_mut().zip(&self.k2) {
            *z = if k2 == 0.0 { Complex64::default() } else { *z * symbol(k2) };
        }
        self.transform(&mut data, self.inv_x.as_ref(), self.inv_y.as_ref());
        let norm = 1.0 / self.grid.len() as f64;
        data.iter().map(|z| z.re * norm).collect()
    }

    /// `ψ = F⁻¹[F(q)/(k_x² + k_y²)]`, so that `−Δψ = q − mean(q)`.
    pub fn solve(&self, q: &[f64]) -> Vec<f64> {
        self.apply(q, |k2| 1.0 / k2)
    }

    /// Spectral `−Δψ` with the mean removed.
    pub fn neg_laplacian(&self, psi: &[f64]) -> Vec<f64> {
        self.apply(psi, |k2| k2)
    }
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver").field("grid", &self.grid).finish_non_exhaustive()
    }
}

/// One-shot [`PoissonSolver::solve`].
pub fn spectral_poisson(g: &Grid2D, q: &[f64]) -> Vec<f64> {
    PoissonSolver::new(*g).solve(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv2d::grid::CellField;

    #[test]
    fn zero_in_zero_out() {
        let g = Grid2D::new(8, 8).unwrap();
        assert!(spectral_poisson(&g, &[0.0; 64]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eigenfunction() {
        let g = Grid2D::new(64, 64).unwrap();
        let q = CellField::from_fn(g, |x, y| (2.0 * PI * x).sin() * (2.0 * PI * y).sin());
        let psi = spectral_poisson(&g, &q.data);
        let err = psi
            .iter()
            .zip(&q.data)
            .map(|(p, v)| (p - v / (8.0 * PI * PI)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn mean_is_ignored() {
        let g = Grid2D::new(16, 8).unwrap();
        let q = CellField::from_fn(g, |x, y| (2.0 * PI * x).cos() + (4.0 * PI * y).sin() * x);
        let shifted: Vec<f64> = q.data.iter().map(|v| v + 3.5).collect();
        let a = spectral_poisson(&g, &q.data);
        let b = spectral_poisson(&g, &shifted);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn round_trip() {
        let g = Grid2D::new(64, 64).unwrap();
        let q = CellField::from_fn(g, |x, y| ((x - 0.3).powi(2) + (y - 0.6).powi(2)).sqrt().min(0.2) + x * y);
        let s = PoissonSolver::new(g);
        let back = s.neg_laplacian(&s.solve(&q.data));
        let mean = q.mean();
        let err = back
            .iter()
            .zip(&q.data)
            .map(|(b, v)| (b - (v - mean)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }
}
