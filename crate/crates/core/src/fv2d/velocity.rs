use super::grid::Grid2D;

/// Face-normal velocities on a C-grid: `u[idx(i, j)]` on face `(i+½, j)`
/// and `v[idx(i, j)]` on face `(i, j+½)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityFields {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl VelocityFields {
    pub fn zeros(g: &Grid2D) -> Self {
        Self {
            u: vec![0.0; g.len()],
            v: vec![0.0; g.len()],
        }
    }

    /// Velocities `u = −∂ψ/∂y`, `v = ∂ψ/∂x` differenced from corner values
    /// `corner[idx(i, j)] = ψ(x_{i+½}, y_{j+½})`.
    pub fn from_corners(g: &Grid2D, corner: &[f64]) -> Self {
        let mut u = Vec::with_capacity(g.len());
        let mut v = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = corner[g.idx(i, j)];
                u.push(-(c - corner[g.idx(i, g.jm(j))]) / g.dy);
                v.push((c - corner[g.idx(g.im(i), j)]) / g.dx);
            }
        }
        Self { u, v }
    }

    /// Samples an analytic streamfunction at the cell corners.
    pub fn from_streamfunction(g: &Grid2D, psi: impl Fn(f64, f64) -> f64) -> Self {
        let mut corner = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                corner.push(psi((i + 1) as f64 * g.dx, (j + 1) as f64 * g.dy));
            }
        }
        Self::from_corners(g, &corner)
    }

    /// Discrete divergence per cell.
    pub fn divergence(&self, g: &Grid2D) -> Vec<f64> {
        let mut out = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                out.push(
                    (self.u[k] - self.u[g.idx(g.im(i), j)]) / g.dx
                        + (self.v[k] - self.v[g.idx(i, g.jm(j))]) / g.dy,
                );
            }
        }
        out
    }

    pub fn max_abs_divergence(&self, g: &Grid2D) -> f64 {
        self.divergence(g).iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn max_speed(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.u.iter_mut().zip(&other.u) {
            *x += a * y;
        }
        for (x, y) in self.v.iter_mut().zip(&other.v) {
            *x += a * y;
        }
    }
}

/// Corner values by four-cell averaging, then [`VelocityFields::from_corners`].
pub fn cgrid_velocities(g: &Grid2D, psi: &[f64]) -> VelocityFields {
    let mut corner = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (ip, jp) = (g.ip(i), g.jp(j));
            corner.push(
                0.25 * (psi[g.idx(i, j)] + psi[g.idx(i, jp)] + psi[g.idx(ip, j)] + psi[g.idx(ip, jp)]),
            );
        }
    }
    VelocityFields::from_corners(g, &corner)
}

/// Solid-body rotation `(−2π(y−½), 2π(x−½))`.
pub fn solid_body_rotation(g: &Grid2D) -> VelocityFields {
    VelocityFields::from_streamfunction(g, |x, y| {
        std::f64::consts::PI * ((x - 0.5).powi(2) + (y - 0.5).powi(2))
    })
}

/// Deformational noise field `(2π/10)(x(x−1)(2y−1), −(2x−1)y(y−1))`.
pub fn deformational_noise(g: &Grid2D) -> VelocityFields {
    VelocityFields::from_streamfunction(g, |x, y| {
        -(2.0 * std::f64::consts::PI / 10.0) * x * (x - 1.0) * y * (y - 1.0)
    })
}

/// Cellular noise field `(2π/8)(sin 8πx cos 8πy, −cos 8πx sin 8πy)`.
pub fn cellular_noise(g: &Grid2D) -> VelocityFields {
    use std::f64::consts::PI;
    VelocityFields::from_streamfunction(g, |x, y| -(8.0 * PI * x).sin() * (8.0 * PI * y).sin() / 32.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_psi_gives_zero_velocity() {
        let g = Grid2D::new(5, 7).unwrap();
        let vel = cgrid_velocities(&g, &[2.5; 35]);
        assert_eq!(vel.max_speed(), 0.0);
    }

    #[test]
    fn linear_psi_gives_uniform_u() {
        let g = Grid2D::new(8, 8).unwrap();
        let psi: Vec<f64> = (0..64).map(|k| g.y_center(k / 8)).collect();
        let vel = cgrid_velocities(&g, &psi);
        // Rows away from the periodic seam.
        for j in 1..6 {
            for i in 0..8 {
                assert!((vel.u[g.idx(i, j)] + 1.0).abs() < 1e-12);
                assert!(vel.v[g.idx(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analytic_fields_match_formulas() {
        use std::f64::consts::PI;
        let g = Grid2D::new(32, 32).unwrap();
        let sb = solid_body_rotation(&g);
        let dn = deformational_noise(&g);
        let cn = cellular_noise(&g);
        let (i, j) = (9, 20);
        let k = g.idx(i, j);
        // u on face (i+½, j): x = (i+1)dx, y = y_j.
        let (xf, yc) = ((i + 1) as f64 * g.dx, g.y_center(j));
        let (xc, yf) = (g.x_center(i), (j + 1) as f64 * g.dy);
        assert!((sb.u[k] + 2.0 * PI * (yc - 0.5)).abs() < 1e-12);
        assert!((sb.v[k] - 2.0 * PI * (xc - 0.5)).abs() < 1e-12);
        let c = 2.0 * PI / 10.0;
        assert!((dn.u[k] - c * xf * (xf - 1.0) * (2.0 * yc - 1.0)).abs() < 1e-3);
        assert!((dn.v[k] + c * (2.0 * xc - 1.0) * yf * (yf - 1.0)).abs() < 1e-3);
        let w = 2.0 * PI / 8.0;
        assert!((cn.u[k] - w * (8.0 * PI * xf).sin() * (8.0 * PI * yc).cos()).abs() < 2e-2);
        assert!((cn.v[k] + w * (8.0 * PI * xc).cos() * (8.0 * PI * yf).sin()).abs() < 2e-2);
        for f in [sb, dn, cn] {
            assert!(f.max_abs_divergence(&g) <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn cgrid_is_divergence_free(psi in proptest::collection::vec(-1.0f64..1.0, 48)) {
            let g = Grid2D::new(8, 6).unwrap();
            prop_assert!(cgrid_velocities(&g, &psi).max_abs_divergence(&g) <= 1e-12);
        }
    }
}
