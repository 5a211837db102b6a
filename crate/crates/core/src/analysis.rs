//! Discrete Fourier transforms, negative Sobolev norms and space-time norms.
//!
//! Fourier coefficients use the normalisation `ĝ_n = N^{-d} Σ_x g(x) e^{-i2πn·x}`,
//! so `ĝ_0` is the mean and `Σ|ĝ_n|² = ∫|g|²` (discrete Parseval).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};

/// Fourier coefficients of a field, stored in FFT order (`n mod N` per axis).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Storage index of wavevector `n`.
    pub fn index_of(&self, n: [i64; 2]) -> usize {
        let nn = self.grid.n() as i64;
        let i = n[0].rem_euclid(nn) as usize;
        match self.grid.dim() {
            1 => i,
            _ => i * self.grid.n() + n[1].rem_euclid(nn) as usize,
        }
    }

    /// Signed wavevector of a storage index, each component in `(−N/2, N/2]`.
    pub fn wavevector(&self, flat: usize) -> [i64; 2] {
        let nn = self.grid.n() as i64;
        let [i, j] = self.grid.multi_index(flat);
        let signed = |v: usize| {
            let v = v as i64;
            if v > nn / 2 {
                v - nn
            } else {
                v
            }
        };
        if self.grid.dim() == 1 {
            [signed(i), 0]
        } else {
            [signed(i), signed(j)]
        }
    }

    pub fn get(&self, n: [i64; 2]) -> Complex64 {
        self.data[self.index_of(n)]
    }

    pub fn set(&mut self, n: [i64; 2], v: Complex64) {
        let i = self.index_of(n);
        self.data[i] = v;
    }

    /// Coefficient-wise difference.
    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("spectral fields on different grids".into()));
        }
        Ok(SpectralField {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Largest violation of `ĝ_{−n} = conj(ĝ_n)`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        (0..self.data.len())
            .map(|f| {
                let n = self.wavevector(f);
                (self.data[f] - self.get([-n[0], -n[1]]).conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Planned forward and inverse transforms for one grid.
#[derive(Clone)]
pub struct Dft {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dft({:?})", self.grid)
    }
}

impl Dft {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    fn apply(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.grid.n();
        if self.grid.dim() == 1 {
            fft.process(data);
            return;
        }
        for row in data.chunks_mut(n) {
            fft.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            fft.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    pub fn forward(&self, field: &GridField) -> Result<SpectralField> {
        field.ensure_same_grid(&self.grid)?;
        let scale = 1.0 / self.grid.len() as f64;
        let mut data: Vec<Complex64> = field.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.apply(&self.forward, &mut data);
        data.iter_mut().for_each(|v| *v *= scale);
        Ok(SpectralField { grid: self.grid, data })
    }

    /// Inverse transform; the imaginary part is discarded.
    pub fn inverse(&self, s: &SpectralField) -> Result<GridField> {
        if s.grid != self.grid {
            return Err(Error::GridMismatch("spectral field on a different grid".into()));
        }
        let mut data = s.data.clone();
        self.apply(&self.inverse, &mut data);
        GridField::from_vec(self.grid, data.into_iter().map(|v| v.re).collect())
    }
}

pub fn dft(field: &GridField) -> SpectralField {
    Dft::new(field.grid()).forward(field).expect("same grid by construction")
}

pub fn idft(s: &SpectralField) -> GridField {
    Dft::new(s.grid()).inverse(s).expect("same grid by construction")
}

/// Weight `(1 + 4π²|n|²)^{−β}` of wavevector `n`.
pub fn sobolev_weight(n: [i64; 2], beta: f64) -> f64 {
    let n2 = (n[0] * n[0] + n[1] * n[1]) as f64;
    (1.0 + 4.0 * PI * PI * n2).powf(-beta)
}

/// `(Σ_n (1 + 4π²|n|²)^{−β} |ĝ_n|²)^{1/2}`.
pub fn h_neg_norm(s: &SpectralField, beta: f64) -> f64 {
    let terms: Vec<f64> = s
        .data
        .iter()
        .enumerate()
        .map(|(f, v)| sobolev_weight(s.wavevector(f), beta) * v.norm_sqr())
        .collect();
    crate::stats::pairwise_sum(&terms).sqrt()
}

/// `(ρ − ρ̄)/√ε`.
pub fn fluctuation_field(rho: &GridField, rho_bar: f64, epsilon: f64) -> Result<GridField> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    let s = epsilon.sqrt().recip();
    Ok(rho.map(|v| (v - rho_bar) * s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tau {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Infinity,
}

impl Tau {
    /// `2 − 4/τ`.
    pub fn sobolev_shift(self) -> f64 {
        match self {
            Tau::Two => 0.0,
            Tau::Infinity => 2.0,
        }
    }
}

impl std::fmt::Display for Tau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tau::Two => write!(f, "2"),
            Tau::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Tau {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "2" => Ok(Tau::Two),
            "inf" | "infinity" => Ok(Tau::Infinity),
            other => Err(Error::invalid("tau", format!("expected 2 or inf, got {other:?}"))),
        }
    }
}

/// The `L^τ([0,T]; H^{−β})` norm used for the coupling error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub beta: f64,
    pub tau: Tau,
}

impl NormSpec {
    /// Requires β > d/2 for τ = 2 and β > 1 + d/2 for τ = ∞.
    pub fn new(d: usize, beta: f64, tau: Tau) -> Result<Self> {
        let min = match tau {
            Tau::Two => d as f64 / 2.0,
            Tau::Infinity => 1.0 + d as f64 / 2.0,
        };
        if !(beta > min) {
            return Err(Error::invalid("beta", format!("must exceed {min} for tau = {tau} in d = {d}, got {beta}")));
        }
        Ok(Self { beta, tau })
    }
}

/// Time norm of a sampled scalar path: trapezoidal `(∫ value² dt)^{1/2}` for
/// τ = 2, maximum over the samples for τ = ∞.
pub fn spacetime_norm(traj: &[(f64, f64)], tau: Tau) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::invalid("trajectory", "no snapshots"));
    }
    if traj.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::invalid("trajectory", "times must be sorted"));
    }
    match tau {
        Tau::Infinity => Ok(traj.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)),
        Tau::Two => {
            if traj.len() < 2 {
                return Err(Error::invalid("trajectory", "tau = 2 needs at least two snapshots"));
            }
            let pieces: Vec<f64> = traj
                .windows(2)
                .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 * w[0].1 + w[1].1 * w[1].1))
                .collect();
            Ok(crate::stats::pairwise_sum(&pieces).sqrt())
        }
    }
}

/// `(∫₀ᵀ ∫ |v|^h dx dt)^{1/h}`, trapezoidal in time.
pub fn lp_spacetime_norm(times: &[f64], fields: &[GridField], h: f64) -> Result<f64> {
    if !(h >= 1.0) {
        return Err(Error::invalid("h", format!("must be >= 1, got {h}")));
    }
    if times.len() != fields.len() || times.len() < 2 {
        return Err(Error::invalid("trajectory", "need at least two snapshots with matching times"));
    }
    let inner: Vec<f64> = fields.iter().map(|f| f.map(|v| v.abs().powf(h)).integral()).collect();
    let pieces: Vec<f64> = (1..times.len())
        .map(|i| 0.5 * (times[i] - times[i - 1]) * (inner[i] + inner[i - 1]))
        .collect();
    Ok(crate::stats::pairwise_sum(&pieces).powf(1.0 / h))
}
