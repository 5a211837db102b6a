//! Spectrally truncated noise ξ^ε = Σ_k a_k f_k B^k on the torus.
//!
//! The basis is the real trigonometric family
//! `{1} ∪ {√2 cos(2πk·x), √2 sin(2πk·x) : 0 < |k|∞ ≤ M}`, one representative
//! `k` per `±k` pair. Modes are ordered by shell `|k|∞`, so the modes of a
//! cutoff `M` are always a prefix of the modes of any larger cutoff.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::rng::IncrementStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Constant,
    Cos,
    Sin,
}

/// One basis function `a · f_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Wavevector; the second component is zero in d = 1.
    pub k: [i64; 2],
    pub parity: Parity,
    pub weight: f64,
}

impl Mode {
    pub fn shell(&self) -> i64 {
        self.k[0].abs().max(self.k[1].abs())
    }

    pub fn k_squared(&self) -> f64 {
        (self.k[0] * self.k[0] + self.k[1] * self.k[1]) as f64
    }

    /// Fourier coefficient of the unweighted basis function at wavevector
    /// `n`, i.e. `∫ f_k(x) e^{-i2πn·x} dx`, from orthogonality.
    pub fn fourier_coefficient(&self, n: [i64; 2]) -> num_complex::Complex64 {
        use num_complex::Complex64 as C;
        let half = SQRT_2 / 2.0;
        let neg = [-self.k[0], -self.k[1]];
        match self.parity {
            Parity::Constant if n == [0, 0] => C::new(1.0, 0.0),
            Parity::Cos if n == self.k || n == neg => C::new(half, 0.0),
            Parity::Sin if n == self.k => C::new(0.0, -half),
            Parity::Sin if n == neg => C::new(0.0, half),
            _ => C::new(0.0, 0.0),
        }
    }
}

/// Basis modes with `|k|∞ ≤ cutoff`, shell-ordered, unit weights.
pub fn enumerate_modes(d: usize, cutoff: usize) -> Vec<Mode> {
    let mut modes = vec![Mode { k: [0, 0], parity: Parity::Constant, weight: 1.0 }];
    for s in 1..=cutoff as i64 {
        let reps: Vec<[i64; 2]> = if d == 1 {
            vec![[s, 0]]
        } else {
            let mut r = Vec::new();
            for k1 in -s..=s {
                for k2 in -s..=s {
                    let upper = k1 > 0 || (k1 == 0 && k2 > 0);
                    if upper && k1.abs().max(k2.abs()) == s {
                        r.push([k1, k2]);
                    }
                }
            }
            r
        };
        for k in reps {
            modes.push(Mode { k, parity: Parity::Cos, weight: 1.0 });
            modes.push(Mode { k, parity: Parity::Sin, weight: 1.0 });
        }
    }
    modes
}

/// Number of basis modes for a cutoff: `(2M + 1)^d`.
pub fn mode_count(d: usize, cutoff: usize) -> usize {
    (2 * cutoff + 1).pow(d as u32)
}

/// Closed-form sup-norms of the structure sums of the unit-weight basis.
///
/// `F1 = (2M+1)^d`, `F2 = 0`, `F3 = 4π² d (2M+1)^{d-1} M(M+1)(2M+1)/3`.
/// Also valid for non-integer `m` as a smooth envelope.
pub fn closed_form_sums(d: usize, m: f64) -> StructureNorms {
    let width = 2.0 * m + 1.0;
    let shell_sq = m * (m + 1.0) * (2.0 * m + 1.0) / 3.0;
    StructureNorms {
        f1: width.powi(d as i32),
        f2: 0.0,
        f3: 4.0 * PI * PI * d as f64 * width.powi(d as i32 - 1) * shell_sq,
    }
}

/// Sup-norms `(‖F1‖∞, ‖F2‖∞, ‖F3‖∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureNorms {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

/// Pointwise structure sums of a tabulated basis.
#[derive(Clone, Debug)]
pub struct StructureSums {
    /// `F1 = Σ f_k²`.
    pub f1: GridField,
    /// `F2 = ½ Σ ∇(f_k²) = Σ f_k ∇f_k`, one field per axis.
    pub f2: Vec<GridField>,
    /// `F3 = Σ |∇f_k|²`.
    pub f3: GridField,
    pub norms: StructureNorms,
}

/// The finite noise family with its basis tabulated on a grid.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    grid: Grid,
    cutoff: usize,
    modes: Vec<Mode>,
    /// `values[k * cells + c] = a_k f_k(x_c)`.
    values: Vec<f64>,
    /// `grads[(k * d + axis) * cells + c] = a_k ∂_axis f_k(x_c)`.
    grads: Vec<f64>,
    sums: StructureSums,
}

/// Brownian increments `ΔB_k ∈ R^d` for every mode of one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeIncrements {
    pub dt: f64,
    pub step: u64,
    pub seed: u64,
    pub path: u64,
    pub d: usize,
    /// `values[k * d + axis]`.
    pub values: Vec<f64>,
}

impl ModeIncrements {
    pub fn mode_count(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn get(&self, mode: usize, axis: usize) -> f64 {
        self.values[mode * self.d + axis]
    }

    /// All-zero increments, useful for noiseless runs.
    pub fn zeros(d: usize, modes: usize, dt: f64) -> Self {
        Self { dt, step: 0, seed: 0, path: 0, d, values: vec![0.0; modes * d] }
    }
}

/// Builds the cutoff basis with unit weights.
pub fn build_basis(d: usize, cutoff: usize, n: usize) -> Result<NoiseModel> {
    build_basis_weighted(d, cutoff, n, |_| 1.0)
}

/// Builds the cutoff basis with per-mode weights `a_k`.
pub fn build_basis_weighted(
    d: usize,
    cutoff: usize,
    n: usize,
    weight: impl Fn(&Mode) -> f64,
) -> Result<NoiseModel> {
    let grid = Grid::new(d, n)?;
    let required = 4 * cutoff + 4;
    if n < required {
        return Err(Error::ResolutionTooSmall { n, cutoff, required });
    }
    let mut modes = enumerate_modes(d, cutoff);
    for m in &mut modes {
        m.weight = weight(m);
    }
    let cells = grid.len();
    let mut values = vec![0.0; modes.len() * cells];
    let mut grads = vec![0.0; modes.len() * d * cells];
    let nn = n as i64;
    for (k, mode) in modes.iter().enumerate() {
        for c in 0..cells {
            let [i, j] = grid.multi_index(c);
            // exact integer phase reduction keeps the table periodic to the last bit
            let phase_index = (mode.k[0] * i as i64 + mode.k[1] * j as i64).rem_euclid(nn);
            let phase = 2.0 * PI * phase_index as f64 / n as f64;
            let (s, co) = phase.sin_cos();
            let a = mode.weight;
            let (v, dv) = match mode.parity {
                Parity::Constant => (a, 0.0),
                Parity::Cos => (a * SQRT_2 * co, -a * SQRT_2 * s),
                Parity::Sin => (a * SQRT_2 * s, a * SQRT_2 * co),
            };
            values[k * cells + c] = v;
            for axis in 0..d {
                grads[(k * d + axis) * cells + c] = dv * 2.0 * PI * mode.k[axis] as f64;
            }
        }
    }
    let sums = tabulate_sums(grid, &modes, &values, &grads);
    Ok(NoiseModel { grid, cutoff, modes, values, grads, sums })
}

fn tabulate_sums(grid: Grid, modes: &[Mode], values: &[f64], grads: &[f64]) -> StructureSums {
    let d = grid.dim();
    let cells = grid.len();
    let mut f1 = vec![0.0; cells];
    let mut f2 = vec![vec![0.0; cells]; d];
    let mut f3 = vec![0.0; cells];
    for k in 0..modes.len() {
        let fk = &values[k * cells..(k + 1) * cells];
        for c in 0..cells {
            f1[c] += fk[c] * fk[c];
        }
        for axis in 0..d {
            let g = &grads[(k * d + axis) * cells..(k * d + axis + 1) * cells];
            for c in 0..cells {
                f2[axis][c] += fk[c] * g[c];
                f3[c] += g[c] * g[c];
            }
        }
    }
    let f1 = GridField::from_vec(grid, f1).expect("sized from grid");
    let f3 = GridField::from_vec(grid, f3).expect("sized from grid");
    let f2: Vec<GridField> =
        f2.into_iter().map(|v| GridField::from_vec(grid, v).expect("sized from grid")).collect();
    let f2_sup = (0..cells)
        .map(|c| f2.iter().map(|f| f[c] * f[c]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let norms = StructureNorms { f1: f1.sup_norm(), f2: f2_sup, f3: f3.sup_norm() };
    StructureSums { f1, f2, f3, norms }
}

impl NoiseModel {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Tabulated `a_k f_k` on the grid.
    pub fn mode_values(&self, k: usize) -> &[f64] {
        let cells = self.grid.len();
        &self.values[k * cells..(k + 1) * cells]
    }

    /// Tabulated `a_k ∂_axis f_k` on the grid.
    pub fn mode_gradient(&self, k: usize, axis: usize) -> &[f64] {
        let cells = self.grid.len();
        let d = self.grid.dim();
        &self.grads[(k * d + axis) * cells..(k * d + axis + 1) * cells]
    }

    pub fn structure_sums(&self) -> &StructureSums {
        &self.sums
    }

    pub fn norms(&self) -> StructureNorms {
        self.sums.norms
    }

    /// The noise realisation `η_axis(x) = Σ_k a_k f_k(x) ΔB_k^axis`, written into
    /// `out[axis]`.
    pub fn realization_into(&self, inc: &ModeIncrements, out: &mut [Vec<f64>]) -> Result<()> {
        let d = self.grid.dim();
        if inc.d != d || inc.mode_count() < self.modes.len() {
            return Err(Error::GridMismatch(format!(
                "increments carry {} modes in d = {}, model needs {} in d = {}",
                inc.mode_count(),
                inc.d,
                self.modes.len(),
                d
            )));
        }
        for (axis, o) in out.iter_mut().enumerate().take(d) {
            o.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..self.modes.len() {
                let b = inc.get(k, axis);
                if b == 0.0 {
                    continue;
                }
                for (v, f) in o.iter_mut().zip(self.mode_values(k)) {
                    *v += f * b;
                }
            }
        }
        Ok(())
    }
}

/// Draws the increments of `model` for time step `step` from `stream`.
pub fn sample_increments(
    model: &NoiseModel,
    dt: f64,
    stream: &mut IncrementStream,
    step: u64,
) -> Result<ModeIncrements> {
    sample_increments_for(model.dim(), model.mode_count(), dt, stream, step)
}

/// Draws `modes · d` independent `N(0, dt)` increments for time step `step`.
pub fn sample_increments_for(
    d: usize,
    modes: usize,
    dt: f64,
    stream: &mut IncrementStream,
    step: u64,
) -> Result<ModeIncrements> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive and finite, got {dt}")));
    }
    let mut values = stream.normals(step, modes * d);
    let scale = dt.sqrt();
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(ModeIncrements { dt, step, seed: stream.seed(), path: stream.path(), d, values })
}

/// The vector field `Σ_k amp(x) a_k f_k(x) ΔB_k`, before any divergence.
pub fn noise_flux(model: &NoiseModel, amp: &GridField, inc: &ModeIncrements) -> Result<Vec<GridField>> {
    amp.ensure_same_grid(&model.grid)?;
    let d = model.dim();
    let cells = model.grid.len();
    let mut eta = vec![vec![0.0; cells]; d];
    model.realization_into(inc, &mut eta)?;
    Ok(eta
        .into_iter()
        .map(|mut e| {
            for (v, a) in e.iter_mut().zip(amp.as_slice()) {
                *v *= a;
            }
            GridField::from_vec(model.grid, e).expect("sized from grid")
        })
        .collect())
}
