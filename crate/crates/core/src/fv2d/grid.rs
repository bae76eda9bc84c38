use crate::error::{Error, Result};

/// Uniform periodic grid on `[0,1]²` with `nx × ny` cells.
///
/// Fields are stored row-major with `x` fastest: cell `(i, j)` lives at
/// `j·nx + i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!("grid {nx}x{ny} is empty")));
        }
        Ok(Self {
            nx,
            ny,
            dx: 1.0 / nx as f64,
            dy: 1.0 / ny as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ip(&self, i: usize) -> usize {
        if i + 1 == self.nx { 0 } else { i + 1 }
    }

    #[inline]
    pub fn im(&self, i: usize) -> usize {
        if i == 0 { self.nx - 1 } else { i - 1 }
    }

    #[inline]
    pub fn jp(&self, j: usize) -> usize {
        if j + 1 == self.ny { 0 } else { j + 1 }
    }

    #[inline]
    pub fn jm(&self, j: usize) -> usize {
        if j == 0 { self.ny - 1 } else { j - 1 }
    }

    /// Periodic shift of `(i, j)` by `(di, dj)`.
    #[inline]
    pub fn shift(&self, i: usize, j: usize, di: isize, dj: isize) -> usize {
        let ii = (i as isize + di).rem_euclid(self.nx as isize) as usize;
        let jj = (j as isize + dj).rem_euclid(self.ny as isize) as usize;
        self.idx(ii, jj)
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
}

/// Cell means on a [`Grid2D`].
#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    pub grid: Grid2D,
    pub data: Vec<f64>,
}

impl CellField {
    pub fn new(grid: Grid2D, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                data.push(f(grid.x_center(i), grid.y_center(j)));
            }
        }
        Self { grid, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        crate::parallel::pairwise_sum(&self.data) / self.data.len() as f64
    }
}

/// Neighbourhood used for local-maximum-principle bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// The cell and its four face neighbours.
    FivePoint,
    /// Face neighbours plus their face neighbours.
    ThirteenPoint,
}

const FIVE: [(isize, isize); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];
const THIRTEEN: [(isize, isize); 13] = [
    (0, 0),
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (2, 0),
    (-2, 0),
    (0, 2),
    (0, -2),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

impl Stencil {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Stencil::FivePoint => &FIVE,
            Stencil::ThirteenPoint => &THIRTEEN,
        }
    }

    /// `[min, max]` of `q` over the stencil of cell `(i, j)`.
    #[inline]
    pub fn cell_bounds(self, g: &Grid2D, q: &[f64], i: usize, j: usize) -> (f64, f64) {
        self.offsets().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(di, dj)| {
            let v = q[g.shift(i, j, di, dj)];
            (lo.min(v), hi.max(v))
        })
    }

    /// Per-cell stencil minima and maxima.
    pub fn bounds(self, g: &Grid2D, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(q.len());
        let mut hi = Vec::with_capacity(q.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (a, b) = self.cell_bounds(g, q, i, j);
                lo.push(a);
                hi.push(b);
            }
        }
        (lo, hi)
    }
}

impl std::str::FromStr for Stencil {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "five_point" | "5" | "five" => Ok(Stencil::FivePoint),
            "thirteen_point" | "13" | "thirteen" => Ok(Stencil::ThirteenPoint),
            other => Err(Error::InvalidArgument(format!("unknown stencil `{other}`"))),
        }
    }
}

impl std::fmt::Display for Stencil {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stencil::FivePoint => "five_point",
            Stencil::ThirteenPoint => "thirteen_point",
        })
    }
}
