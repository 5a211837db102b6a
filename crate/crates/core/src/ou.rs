//! Linearised Langevin equation around a constant state ρ̄,
//!
//! ```text
//! dv = Δ(φ̇(ρ̄) v) dt − ∇·(ν̇(ρ̄) v) dt − ∇·(σ(ρ̄) dξ),
//! ```
//!
//! solved exactly per Fourier mode. With `ĝ_n = ∫ g e^{−i2πn·x}` each mode is
//! a complex Ornstein–Uhlenbeck process
//!
//! ```text
//! dv̂_n = λ_n v̂_n dt + Σ_{k,a} c_{n,k}^a dB_k^a,
//! λ_n = −4π²|n|² φ̇(ρ̄) − i2π n·ν̇(ρ̄),   c_{n,k}^a = −i2π n_a σ(ρ̄) f̂_k(n).
//! ```
//!
//! Only one representative of each `±n` pair is stored; `v̂_{−n} = conj(v̂_n)`.
//! Representatives follow the shell order of the noise basis, so
//! representative `r ≥ 1` is driven by noise modes `2r − 1` (cos) and `2r`
//! (sin), and the modes of a smaller cutoff form a prefix.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;

use crate::analysis::SpectralField;
use crate::coefficients::Coefficients;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::noise::{enumerate_modes, sample_increments_for, ModeIncrements, NoiseModel};
use crate::rng::{IncrementStream, Lane};

/// One noise driver of a Fourier mode: `c · dB_{noise_mode}^{axis}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Driver {
    pub noise_mode: usize,
    pub axis: usize,
    pub c: Complex64,
}

#[derive(Clone, Debug)]
pub struct OuModeSystem {
    grid: Grid,
    pub rho_bar: f64,
    pub nv: usize,
    pub sigma_bar: f64,
    pub dphi_bar: f64,
    pub dnu_bar: [f64; 2],
    /// Representative wavevectors; index 0 is `n = 0`.
    pub wavevectors: Vec<[i64; 2]>,
    pub lambda: Vec<Complex64>,
    pub drivers: Vec<Vec<Driver>>,
    noise_modes: usize,
}

/// Builds the per-mode system for `|n|∞ ≤ nv` on the grid of `model`.
pub fn build_ou(c: &Coefficients, rho_bar: f64, model: &NoiseModel, nv: usize) -> Result<OuModeSystem> {
    if !(rho_bar > 0.0) {
        return Err(Error::invalid("rho_bar", format!("must be positive, got {rho_bar}")));
    }
    let grid = model.grid();
    let d = grid.dim();
    let nyquist = grid.n() / 2;
    if nv >= nyquist {
        return Err(Error::invalid("nv", format!("must be below the Nyquist index {nyquist}, got {nv}")));
    }
    let sigma_bar = c.sigma(rho_bar);
    let dphi_bar = c.dphi(rho_bar);
    let dnu_bar = [c.dnu(0, rho_bar), if d > 1 { c.dnu(1, rho_bar) } else { 0.0 }];
    let modes = enumerate_modes(d, nv);
    let mut wavevectors = vec![[0, 0]];
    let mut drivers = vec![Vec::new()];
    for (idx, m) in modes.iter().enumerate().skip(1).step_by(2) {
        let n = m.k;
        let mut ds = Vec::new();
        for noise_mode in [idx, idx + 1] {
            let fhat = modes[noise_mode].fourier_coefficient(n);
            for (axis, &na) in n.iter().enumerate().take(d) {
                if na != 0 {
                    let c = Complex64::new(0.0, -2.0 * PI * na as f64) * sigma_bar * fhat;
                    ds.push(Driver { noise_mode, axis, c });
                }
            }
        }
        wavevectors.push(n);
        drivers.push(ds);
    }
    let lambda = wavevectors
        .iter()
        .map(|n| {
            let n2 = (n[0] * n[0] + n[1] * n[1]) as f64;
            let adv = n[0] as f64 * dnu_bar[0] + n[1] as f64 * dnu_bar[1];
            Complex64::new(-4.0 * PI * PI * n2 * dphi_bar, -2.0 * PI * adv)
        })
        .collect();
    Ok(OuModeSystem {
        grid,
        rho_bar,
        nv,
        sigma_bar,
        dphi_bar,
        dnu_bar,
        wavevectors,
        lambda,
        drivers,
        noise_modes: modes.len(),
    })
}

/// `e^z − 1` for complex `z`, accurate for small `|z|`.
fn cexpm1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// `Σ_{j=1}^{K} e^{x j}` for real `x`.
fn geometric_real(x: f64, k: usize) -> f64 {
    if x == 0.0 {
        k as f64
    } else {
        x.exp() * (x * k as f64).exp_m1() / x.exp_m1()
    }
}

/// `Σ_{j=1}^{K} e^{z j}` for complex `z`.
fn geometric_complex(z: Complex64, k: usize) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        Complex64::new(k as f64, 0.0)
    } else {
        z.exp() * cexpm1(z * k as f64) / cexpm1(z)
    }
}

impl OuModeSystem {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn mode_count(&self) -> usize {
        self.wavevectors.len()
    }

    /// Number of noise basis modes (cutoff `nv`) driving the system.
    pub fn noise_mode_count(&self) -> usize {
        self.noise_modes
    }

    /// Representatives with `|n|∞ ≤ cutoff`; always a prefix.
    pub fn shared_count(&self, cutoff: usize) -> usize {
        self.wavevectors
            .iter()
            .take_while(|n| n[0].abs().max(n[1].abs()) as usize <= cutoff)
            .count()
    }

    pub fn zero_state(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.mode_count()]
    }

    /// `Σ_{k,a} |c_{n,k}^a|²` of representative `i`.
    pub fn noise_strength(&self, i: usize) -> f64 {
        self.drivers[i].iter().map(|d| d.c.norm_sqr()).sum()
    }

    /// `E|v̂_n|²` after `k` steps of [`ou_step`] from zero.
    pub fn variance_after(&self, i: usize, k: usize, dt: f64) -> f64 {
        self.noise_strength(i) * dt * geometric_real(2.0 * self.lambda[i].re * dt, k)
    }

    /// Continuous-time stationary variance `−Σ|c|²/(2 Re λ_n)`.
    pub fn stationary_variance(&self, i: usize) -> f64 {
        if self.lambda[i].re == 0.0 {
            return if self.noise_strength(i) == 0.0 { 0.0 } else { f64::INFINITY };
        }
        -self.noise_strength(i) / (2.0 * self.lambda[i].re)
    }

    /// Exact-drift steps of the representatives in `range`:
    /// `v̂_n ← e^{λ_n dt}(v̂_n + Σ c ΔB)`.
    pub fn step_modes(&self, v: &mut [Complex64], inc: &ModeIncrements, dt: f64, range: Range<usize>) -> Result<()> {
        for i in range {
            let mut kick = Complex64::new(0.0, 0.0);
            for d in &self.drivers[i] {
                if d.noise_mode >= inc.mode_count() {
                    return Err(Error::GridMismatch(format!(
                        "increments cover {} noise modes, mode {:?} needs {}",
                        inc.mode_count(),
                        self.wavevectors[i],
                        d.noise_mode + 1
                    )));
                }
                kick += d.c * inc.get(d.noise_mode, d.axis);
            }
            v[i] = (self.lambda[i] * dt).exp() * (v[i] + kick);
        }
        Ok(())
    }

    /// Advances the representatives in `range` by `k` steps of size `dt` at
    /// once, driven by increments nobody else observes.
    ///
    /// The stochastic convolution `Σ_{j=1}^{k} e^{λ j dt} ΔB_j` of every driver
    /// is a complex Gaussian whose real and imaginary parts have the
    /// covariance `dt·[Σ Re², Σ Re Im; Σ Re Im, Σ Im²]` of the weights; it is
    /// sampled directly from two normals of `stream` block `block`. The result
    /// has the same law as `k` calls of [`OuModeSystem::step_modes`].
    pub fn advance_aggregated(
        &self,
        v: &mut [Complex64],
        range: Range<usize>,
        k: usize,
        dt: f64,
        stream: &mut IncrementStream,
        block: u64,
    ) {
        if k == 0 {
            return;
        }
        let draws: usize = range.clone().map(|i| 2 * self.drivers[i].len()).sum();
        let z = stream.normals(block, draws);
        let mut next = 0;
        for i in range {
            let lam = self.lambda[i];
            let sa = geometric_real(2.0 * lam.re * dt, k);
            let sb = geometric_complex(2.0 * lam * dt, k);
            let var_re = 0.5 * dt * (sa + sb.re);
            let var_im = (0.5 * dt * (sa - sb.re)).max(0.0);
            let cov = 0.5 * dt * sb.im;
            let l11 = var_re.max(0.0).sqrt();
            let l21 = if l11 > 0.0 { cov / l11 } else { 0.0 };
            let l22 = (var_im - l21 * l21).max(0.0).sqrt();
            let mut acc = (lam * (dt * k as f64)).exp() * v[i];
            for d in &self.drivers[i] {
                let (g1, g2) = (z[next], z[next + 1]);
                next += 2;
                let y = Complex64::new(l11 * g1, l21 * g1 + l22 * g2);
                acc += d.c * y;
            }
            v[i] = acc;
        }
    }

    /// Spreads the representatives into a full spectral field (zero above
    /// `nv`).
    pub fn to_spectral(&self, v: &[Complex64]) -> SpectralField {
        let mut s = SpectralField::zeros(self.grid);
        for (n, &val) in self.wavevectors.iter().zip(v) {
            s.set(*n, val);
            if *n != [0, 0] {
                s.set([-n[0], -n[1]], val.conj());
            }
        }
        s
    }
}

/// One step of every mode; `inc` must cover all `nv` noise modes.
pub fn ou_step(sys: &OuModeSystem, v: &mut [Complex64], inc: &ModeIncrements, dt: f64) -> Result<()> {
    sys.step_modes(v, inc, dt, 0..sys.mode_count())
}

/// Integrates from `v = 0` with the per-step increments of
/// `(seed, path)`, returning the snapshots at the given step indices.
///
/// The increments are the ones a nonlinear path with the same seed and path
/// index reads, so the shared modes are driven by the same Brownian motions.
pub fn ou_solve(
    sys: &OuModeSystem,
    steps: usize,
    dt: f64,
    snapshot_steps: &[usize],
    seed: u64,
    path: u64,
) -> Result<Vec<(f64, SpectralField)>> {
    let mut v = sys.zero_state();
    let mut stream = IncrementStream::new(seed, path, Lane::Increments);
    let d = sys.grid.dim();
    let mut out = Vec::with_capacity(snapshot_steps.len());
    let mut next = 0;
    let mut take = |j: usize, v: &[Complex64], out: &mut Vec<(f64, SpectralField)>| {
        while next < snapshot_steps.len() && snapshot_steps[next] == j {
            out.push((j as f64 * dt, sys.to_spectral(v)));
            next += 1;
        }
    };
    take(0, &v, &mut out);
    for j in 0..steps {
        let inc = sample_increments_for(d, sys.noise_modes, dt, &mut stream, j as u64)?;
        ou_step(sys, &mut v, &inc, dt)?;
        take(j + 1, &v, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{model_case, Power, SharedProfile};
    use crate::noise::build_basis;
    use std::sync::Arc;

    fn system(m: f64, nv: usize) -> OuModeSystem {
        let model = build_basis(1, 1, 32).unwrap();
        build_ou(&model_case(m).unwrap(), 1.0, &model, nv).unwrap()
    }

    #[test]
    fn eigenvalues_and_zero_mode() {
        let sys = system(2.0, 5);
        assert_eq!(sys.lambda[0], Complex64::new(0.0, 0.0));
        assert!(sys.drivers[0].is_empty());
        for (i, n) in sys.wavevectors.iter().enumerate().skip(1) {
            let expect = -8.0 * PI * PI * (n[0] * n[0]) as f64;
            assert!((sys.lambda[i].re - expect).abs() < 1e-12);
            assert_eq!(sys.lambda[i].im, 0.0);
        }
    }

    #[test]
    fn drift_rotates_modes() {
        let model = build_basis(1, 1, 32).unwrap();
        let c = model_case(1.0).unwrap().with_drift(vec![Arc::new(Power::new(3.0, 1.0)) as SharedProfile]);
        let sys = build_ou(&c, 1.0, &model, 3).unwrap();
        assert!((sys.lambda[2].im + 2.0 * PI * 2.0 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_decay_is_exact() {
        let sys = system(1.0, 3);
        let mut v = sys.zero_state();
        v[1] = Complex64::new(1.0, 0.0);
        let inc = ModeIncrements::zeros(1, sys.noise_mode_count(), 1e-3);
        for _ in 0..100 {
            ou_step(&sys, &mut v, &inc, 1e-3).unwrap();
        }
        let expect = (sys.lambda[1].re * 0.1).exp();
        assert!((v[1].norm() - expect).abs() < 1e-14);
        assert_eq!(v[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn stationary_variance_of_sqrt_noise() {
        // σ(ρ̄)²/(2φ̇(ρ̄)) for every mode.
        let sys = system(2.0, 4);
        for i in 1..sys.mode_count() {
            assert!((sys.stationary_variance(i) - 1.0 / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_variance_tends_to_stationary() {
        let sys = system(1.0, 2);
        let dt = 1e-5;
        let v = sys.variance_after(1, 200_000, dt);
        let s = sys.stationary_variance(1);
        assert!((v / s - 1.0).abs() < 1e-3);
    }

    #[test]
    fn aggregated_matches_stepwise_variance() {
        let sys = system(1.0, 3);
        let (dt, k, paths) = (2e-3, 25, 4000);
        let mut acc = vec![0.0; sys.mode_count()];
        for p in 0..paths {
            let mut v = sys.zero_state();
            let mut st = IncrementStream::new(5, p, Lane::Fresh);
            sys.advance_aggregated(&mut v, 0..sys.mode_count(), k, dt, &mut st, 0);
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += x.norm_sqr();
            }
        }
        for i in 1..sys.mode_count() {
            let est = acc[i] / paths as f64;
            let exact = sys.variance_after(i, k, dt);
            // |v̂|² is exponential with mean `exact`: stderr = exact/√paths
            assert!((est - exact).abs() < 4.0 * exact / (paths as f64).sqrt(), "mode {i}: {est} vs {exact}");
        }
    }

    #[test]
    fn shared_prefix_and_spectral_layout() {
        let sys = system(2.0, 5);
        assert_eq!(sys.shared_count(2), 3);
        let mut v = sys.zero_state();
        v[2] = Complex64::new(0.5, -0.25);
        let s = sys.to_spectral(&v);
        assert_eq!(s.get([2, 0]), v[2]);
        assert_eq!(s.get([-2, 0]), v[2].conj());
        assert!(s.conjugate_asymmetry() < 1e-15);
    }

    #[test]
    fn solve_starts_at_zero_and_is_deterministic() {
        let sys = system(2.0, 3);
        let a = ou_solve(&sys, 10, 1e-3, &[0, 5, 10], 1, 2).unwrap();
        let b = ou_solve(&sys, 10, 1e-3, &[0, 5, 10], 1, 2).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a[0].1.as_slice().iter().all(|v| v.norm() == 0.0));
        assert_eq!(a, b);
        assert!(a[2].1.get([0, 0]).norm() == 0.0);
    }

    #[test]
    fn complex_geometric_sum() {
        let z = Complex64::new(-0.3, 0.7);
        let direct: Complex64 = (1..=9).map(|j| (z * j as f64).exp()).sum();
        assert!((geometric_complex(z, 9) - direct).norm() < 1e-13);
        assert!((geometric_real(-0.01, 50) - (1..=50).map(|j| (-0.01 * j as f64).exp()).sum::<f64>()).abs() < 1e-12);
    }
}
