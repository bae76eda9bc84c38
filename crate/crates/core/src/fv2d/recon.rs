use super::grid::{Grid2D, Stencil};
use crate::parallel::{map_indexed, Execution};

/// Offset of the two Gauss nodes from an edge midpoint, as a fraction of
/// the edge length.
pub const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // 1/(2√3)

/// Reconstructed values of one cell at the Gauss nodes of its edges.
///
/// Nodes are ordered by increasing coordinate along the edge: `r`/`l` by
/// `y`, `u`/`d` by `x`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellEdges {
    pub r: [f64; 2],
    pub l: [f64; 2],
    pub u: [f64; 2],
    pub d: [f64; 2],
}

impl CellEdges {
    fn values(&self) -> [f64; 8] {
        [
            self.r[0], self.r[1], self.l[0], self.l[1], self.u[0], self.u[1], self.d[0], self.d[1],
        ]
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            r: self.r.map(&f),
            l: self.l.map(&f),
            u: self.u.map(&f),
            d: self.d.map(&f),
        }
    }
}

/// Edge states of every cell of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeStates {
    pub cells: Vec<CellEdges>,
}

/// Evaluates the linear reconstruction `q̄ + q_x(x − x_c) + q_y(y − y_c)`
/// with centred gradients at every edge Gauss node.
pub fn reconstruct(g: &Grid2D, q: &[f64], exec: Execution) -> EdgeStates {
    let cells = map_indexed(g.len(), exec, |k| {
        let (i, j) = (k % g.nx, k / g.nx);
        let c = q[k];
        // Half-cell increments q_x·dx/2 and q_y·dy/2.
        let sx = 0.25 * (q[g.idx(g.ip(i), j)] - q[g.idx(g.im(i), j)]);
        let sy = 0.25 * (q[g.idx(i, g.jp(j))] - q[g.idx(i, g.jm(j))]);
        let tx = 2.0 * GAUSS_OFFSET * sx;
        let ty = 2.0 * GAUSS_OFFSET * sy;
        CellEdges {
            r: [c + sx - ty, c + sx + ty],
            l: [c - sx - ty, c - sx + ty],
            u: [c + sy - tx, c + sy + tx],
            d: [c - sy - tx, c - sy + tx],
        }
    });
    EdgeStates { cells }
}

/// Largest `θ ∈ [0, 1]` with `c + θ(v − c) ∈ [lo, hi]` for every `v`.
fn scaling_factor(c: f64, values: &[f64], lo: f64, hi: f64) -> f64 {
    let mut theta = 1.0f64;
    for &v in values {
        let d = v - c;
        if v > hi {
            theta = theta.min((hi - c) / d);
        } else if v < lo {
            theta = theta.min((lo - c) / d);
        }
    }
    theta.max(0.0)
}

fn scale_into(c: f64, v: f64, theta: f64, lo: f64, hi: f64) -> f64 {
    (c + theta * (v - c)).clamp(lo, hi)
}

/// Slope-scaling limiter: brings every edge value of a cell into the
/// `[min, max]` of the cell means over its stencil.
///
/// With [`Stencil::ThirteenPoint`] all eight values of a cell share one
/// factor `θ`. With [`Stencil::FivePoint`] the limiter acts dimension by
/// dimension on the edge-midline values, so both Gauss nodes of an edge
/// carry the limited midline value.
pub fn limit_lmp(g: &Grid2D, q: &[f64], e: &EdgeStates, stencil: Stencil, exec: Execution) -> EdgeStates {
    let cells = map_indexed(g.len(), exec, |k| {
        let (i, j) = (k % g.nx, k / g.nx);
        let c = q[k];
        let (lo, hi) = stencil.cell_bounds(g, q, i, j);
        let ce = &e.cells[k];
        match stencil {
            Stencil::ThirteenPoint => {
                let theta = scaling_factor(c, &ce.values(), lo, hi);
                if theta >= 1.0 {
                    *ce
                } else {
                    ce.map(|v| scale_into(c, v, theta, lo, hi))
                }
            }
            Stencil::FivePoint => {
                let mid = |a: [f64; 2]| 0.5 * (a[0] + a[1]);
                let (r, l, u, d) = (mid(ce.r), mid(ce.l), mid(ce.u), mid(ce.d));
                let tx = scaling_factor(c, &[r, l], lo, hi);
                let ty = scaling_factor(c, &[u, d], lo, hi);
                let r = scale_into(c, r, tx, lo, hi);
                let l = scale_into(c, l, tx, lo, hi);
                let u = scale_into(c, u, ty, lo, hi);
                let d = scale_into(c, d, ty, lo, hi);
                CellEdges {
                    r: [r; 2],
                    l: [l; 2],
                    u: [u; 2],
                    d: [d; 2],
                }
            }
        }
    });
    EdgeStates { cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EX: Execution = Execution::Sequential;

    #[test]
    fn gauss_offset_value() {
        assert!((GAUSS_OFFSET - 0.5 / 3f64.sqrt()).abs() < 1e-16);
    }

    #[test]
    fn constant_field_edges() {
        let g = Grid2D::new(5, 4).unwrap();
        let e = reconstruct(&g, &[0.3; 20], EX);
        assert!(e.cells.iter().all(|c| c.values().iter().all(|&v| v == 0.3)));
        for s in [Stencil::FivePoint, Stencil::ThirteenPoint] {
            assert_eq!(limit_lmp(&g, &[0.3; 20], &e, s, EX), e);
        }
    }

    #[test]
    fn linear_in_x_right_edge() {
        let g = Grid2D::new(8, 4).unwrap();
        let q: Vec<f64> = (0..32).map(|k| g.x_center(k % 8)).collect();
        let e = reconstruct(&g, &q, EX);
        let k = g.idx(3, 2);
        let mid = 0.5 * (e.cells[k].r[0] + e.cells[k].r[1]);
        assert!((mid - (q[k] + g.dx / 2.0)).abs() < 1e-15);
        // q̄ + ¼(q_{i+1} − q_{i−1}) = x_i + dx/4 ·2 = right face.
        assert!((mid - (q[k] + 0.25 * (q[k + 1] - q[k - 1]))).abs() < 1e-15);
    }

    #[test]
    fn checkerboard_has_zero_gradients() {
        let g = Grid2D::new(4, 4).unwrap();
        let q: Vec<f64> = (0..16).map(|k| ((k % 4 + k / 4) % 2) as f64).collect();
        let e = reconstruct(&g, &q, EX);
        for (k, c) in e.cells.iter().enumerate() {
            assert!(c.values().iter().all(|&v| v == q[k]));
        }
    }

    #[test]
    fn smooth_ramp_is_untouched() {
        let g = Grid2D::new(16, 16).unwrap();
        let q: Vec<f64> = (0..256)
            .map(|k| 0.3 * (2.0 * std::f64::consts::PI * g.x_center(k % 16)).sin())
            .collect();
        let e = reconstruct(&g, &q, EX);
        let lim = limit_lmp(&g, &q, &e, Stencil::ThirteenPoint, EX);
        // Away from extrema the limiter is inactive.
        for i in [6, 7, 8, 9] {
            let k = g.idx(i, 7);
            assert_eq!(lim.cells[k], e.cells[k]);
        }
    }

    #[test]
    fn spike_edges_scaled_to_stencil_max() {
        let g = Grid2D::new(6, 6).unwrap();
        let mut q = vec![0.0; 36];
        q[g.idx(2, 2)] = 0.9;
        q[g.idx(3, 2)] = 1.0;
        let e = reconstruct(&g, &q, EX);
        let lim = limit_lmp(&g, &q, &e, Stencil::ThirteenPoint, EX);
        // Cell (2, 2): deviation ±0.25 against max 1 gives θ = 0.4.
        let c = lim.cells[g.idx(2, 2)];
        assert!((c.r[0] - 1.0).abs() < 1e-15 && (c.r[1] - 1.0).abs() < 1e-15);
        assert!((c.l[0] - 0.8).abs() < 1e-15);
        assert!(c.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Cell (4, 2): mean 0 next to 1.0, all values pulled to 0.
        assert!(lim.cells[g.idx(4, 2)].values().iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn limited_values_in_stencil_range(q in proptest::collection::vec(-1.0f64..2.0, 49)) {
            let g = Grid2D::new(7, 7).unwrap();
            let e = reconstruct(&g, &q, EX);
            for s in [Stencil::FivePoint, Stencil::ThirteenPoint] {
                let lim = limit_lmp(&g, &q, &e, s, EX);
                for j in 0..7 {
                    for i in 0..7 {
                        let k = g.idx(i, j);
                        let (lo, hi) = s.cell_bounds(&g, &q, i, j);
                        for v in lim.cells[k].values() {
                            prop_assert!(v >= lo && v <= hi);
                        }
                        // Cell-mean consistency of the edge averages.
                        let c = &lim.cells[k];
                        let avg_x = 0.25 * (c.r[0] + c.r[1] + c.l[0] + c.l[1]);
                        let avg_y = 0.25 * (c.u[0] + c.u[1] + c.d[0] + c.d[1]);
                        prop_assert!((avg_x - q[k]).abs() < 1e-12);
                        prop_assert!((avg_y - q[k]).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn reconstruction_independent_of_execution(q in proptest::collection::vec(-1.0f64..1.0, 36)) {
            let g = Grid2D::new(6, 6).unwrap();
            prop_assert_eq!(reconstruct(&g, &q, EX), reconstruct(&g, &q, Execution::Parallel));
        }
    }
}
