//! Uniform periodic grids on the unit torus and fields sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform grid with `n` points per axis on `[0, 1)^d`.
///
/// Points sit at `x_i = i / n`; storage is row-major with the first axis
/// slowest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    n: usize,
}

impl Grid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if n < 2 {
            return Err(Error::invalid("n", format!("need at least 2 points per axis, got {n}")));
        }
        Ok(Self { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Volume of one cell, `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a flat cell index. Unused axes are zero.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.d {
            1 => [flat, 0],
            _ => [flat / self.n, flat % self.n],
        }
    }

    /// Coordinates of a cell; unused axes are zero.
    pub fn coords(&self, flat: usize) -> [f64; 2] {
        let [i, j] = self.multi_index(flat);
        [i as f64 * self.dx(), j as f64 * self.dx()]
    }

    /// Flat index of the periodic neighbour `offset` cells along `axis`.
    pub fn neighbor(&self, flat: usize, axis: usize, offset: isize) -> usize {
        let n = self.n as isize;
        let [i, j] = self.multi_index(flat);
        let shift = |v: usize| ((v as isize + offset).rem_euclid(n)) as usize;
        match (self.d, axis) {
            (1, _) => shift(i),
            (_, 0) => shift(i) * self.n + j,
            _ => i * self.n + shift(j),
        }
    }
}

/// A real periodic field sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    data: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let data = (0..grid.len()).map(|c| f(grid.coords(c))).collect();
        Self { grid, data }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Discrete integral `Σ g · dx^d`.
    pub fn integral(&self) -> f64 {
        crate::stats::pairwise_sum(&self.data) * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        crate::stats::pairwise_sum(&self.data) / self.data.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid L² norm, `(Σ g² dx^d)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.data.iter().map(|v| v * v).collect();
        (crate::stats::pairwise_sum(&sq) * self.grid.cell_volume()).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub(crate) fn ensure_same_grid(&self, other: &Grid) -> Result<()> {
        if self.grid != *other {
            return Err(Error::GridMismatch(format!(
                "field on {:?} used with grid {:?}",
                self.grid, other
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for GridField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for GridField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbours_wrap_around() {
        let g = Grid::new(2, 4).unwrap();
        // (0, 3) -> +1 on axis 1 wraps to (0, 0)
        assert_eq!(g.neighbor(3, 1, 1), 0);
        // (0, 0) -> -1 on axis 0 wraps to (3, 0)
        assert_eq!(g.neighbor(0, 0, -1), 12);
        let g1 = Grid::new(1, 8).unwrap();
        assert_eq!(g1.neighbor(7, 0, 1), 0);
        assert_eq!(g1.neighbor(0, 0, -1), 7);
    }

    #[test]
    fn rejects_three_dimensions() {
        assert!(matches!(Grid::new(3, 8), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn integral_of_constant_is_constant() {
        let g = Grid::new(2, 16).unwrap();
        let f = GridField::constant(g, 2.5);
        assert!((f.integral() - 2.5).abs() < 1e-14);
    }
}
