//! Uniform cell-centred meshes on rectangles with homogeneous Neumann
//! boundaries realised by mirror ghost cells.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("axis {axis}: extent must be finite and positive, got {extent}")]
    Extent { axis: usize, extent: f64 },
    #[error("axis {axis}: need at least 4 cells, got {cells}")]
    Cells { axis: usize, cells: usize },
    #[error("field has {found} values but the grid has {expected} cells")]
    Shape { expected: usize, found: usize },
    #[error("cannot coarsen: axis {axis} has an odd cell count {cells}")]
    OddCells { axis: usize, cells: usize },
}

/// Uniform tensor mesh. Axis 0 is `x`; in 2-D, values are stored row-major
/// with `x` varying fastest (`index = j * nx + i`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    extent: [f64; 2],
    cells: [usize; 2],
}

impl Grid {
    pub fn new_1d(extent: f64, cells: usize) -> Result<Self, GridError> {
        Self::new(&[extent], &[cells])
    }

    pub fn new_2d(extent: [f64; 2], cells: [usize; 2]) -> Result<Self, GridError> {
        Self::new(&extent, &cells)
    }

    pub fn new(extent: &[f64], cells: &[usize]) -> Result<Self, GridError> {
        let dim = extent.len();
        if !(1..=2).contains(&dim) || cells.len() != dim {
            return Err(GridError::Dimension(dim.max(cells.len())));
        }
        let mut g = Grid { dim, extent: [1.0; 2], cells: [1; 2] };
        for axis in 0..dim {
            if !(extent[axis].is_finite() && extent[axis] > 0.0) {
                return Err(GridError::Extent { axis, extent: extent[axis] });
            }
            if cells[axis] < 4 {
                return Err(GridError::Cells { axis, cells: cells[axis] });
            }
            g.extent[axis] = extent[axis];
            g.cells[axis] = cells[axis];
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.cells().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell width along `axis`.
    pub fn h(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }

    /// Smallest cell width over all axes.
    pub fn h_min(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).product()
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        self.extent().iter().product()
    }

    /// Coordinates of the centre of cell `index`.
    pub fn center(&self, index: usize) -> [f64; 2] {
        let nx = self.cells[0];
        let (i, j) = (index % nx, index / nx);
        let mut c = [(i as f64 + 0.5) * self.h(0), 0.0];
        if self.dim == 2 {
            c[1] = (j as f64 + 0.5) * self.h(1);
        }
        c
    }

    /// Grid with each axis refined by a factor two.
    pub fn refined(&self) -> Grid {
        let mut g = *self;
        for a in 0..self.dim {
            g.cells[a] *= 2;
        }
        g
    }

    /// Discrete Neumann Laplacian `out = Δ_h u` (overwrites `out`).
    pub fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.len());
        let nx = self.cells[0];
        let ny = if self.dim == 2 { self.cells[1] } else { 1 };
        let ix2 = 1.0 / (self.h(0) * self.h(0));
        for j in 0..ny {
            let row = &u[j * nx..(j + 1) * nx];
            for i in 0..nx {
                let left = if i == 0 { row[0] } else { row[i - 1] };
                let right = if i + 1 == nx { row[nx - 1] } else { row[i + 1] };
                out[j * nx + i] = (left - 2.0 * row[i] + right) * ix2;
            }
        }
        if self.dim == 2 {
            let iy2 = 1.0 / (self.h(1) * self.h(1));
            for j in 0..ny {
                let down = if j == 0 { 0 } else { j - 1 };
                let up = if j + 1 == ny { ny - 1 } else { j + 1 };
                for i in 0..nx {
                    out[j * nx + i] +=
                        (u[down * nx + i] - 2.0 * u[j * nx + i] + u[up * nx + i]) * iy2;
                }
            }
        }
    }
}

/// One scalar unknown sampled at the cell centres of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Shape { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.center(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Midpoint-rule integral over the domain.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn laplacian(&self) -> Field {
        let mut out = vec![0.0; self.values.len()];
        self.grid.laplacian(&self.values, &mut out);
        Field { grid: self.grid, values: out }
    }

    /// Restriction onto the grid with half the cells per axis, by averaging
    /// the 2 (1-D) or 4 (2-D) children of each coarse cell.
    pub fn coarsen(&self) -> Result<Field, GridError> {
        let g = &self.grid;
        for axis in 0..g.dim() {
            if g.cells[axis] % 2 != 0 || g.cells[axis] / 2 < 4 {
                return Err(GridError::OddCells { axis, cells: g.cells[axis] });
            }
        }
        let mut coarse = *g;
        for a in 0..g.dim() {
            coarse.cells[a] /= 2;
        }
        let nx = g.cells[0];
        let cx = coarse.cells[0];
        let values = if g.dim() == 1 {
            (0..cx).map(|i| 0.5 * (self.values[2 * i] + self.values[2 * i + 1])).collect()
        } else {
            let cy = coarse.cells[1];
            let mut v = Vec::with_capacity(cx * cy);
            for j in 0..cy {
                for i in 0..cx {
                    let a = (2 * j) * nx + 2 * i;
                    let b = (2 * j + 1) * nx + 2 * i;
                    v.push(
                        0.25 * (self.values[a]
                            + self.values[a + 1]
                            + self.values[b]
                            + self.values[b + 1]),
                    );
                }
            }
            v
        };
        Ok(Field { grid: coarse, values })
    }
}
