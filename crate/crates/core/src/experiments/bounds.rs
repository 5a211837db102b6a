//! Explicit right-hand sides of the convergence estimates.

use serde::{Deserialize, Serialize};

use crate::analysis::NormSpec;
use crate::coefficients::Exponents;
use crate::error::{Error, Result};
use crate::noise::{enumerate_modes, NoiseModel, Parity, StructureNorms};
use crate::solver::Rho0Spec;

/// `1 + E[‖ρ₀‖_{L¹}^{m+p−1} + ‖ρ₀‖_{L^p}^p]`.
pub fn initial_moment_factor(rho0: &Rho0Spec, e: &Exponents) -> f64 {
    let q1 = e.m + e.p - 1.0;
    let l1 = match rho0 {
        Rho0Spec::Field(f) => f.integral().abs().powf(q1),
        other => other.moment(q1),
    };
    1.0 + l1 + rho0.moment(e.p)
}

/// Noise-dependent leading term of the rate bound (without the constant):
///
/// ```text
/// (ε(F1 + F3)² + √ε F3^{1/2}) (1 + εF3)^{g + (d/2)(p+m)} (1 + moments)
/// ```
pub fn rate_leading(d: usize, epsilon: f64, norms: StructureNorms, e: &Exponents, rho0: &Rho0Spec) -> f64 {
    let f13 = norms.f1 + norms.f3;
    let noise = epsilon * f13 * f13 + epsilon.sqrt() * norms.f3.sqrt();
    let power = e.g + 0.5 * d as f64 * (e.p + e.m);
    noise * (1.0 + epsilon * norms.f3).powf(power) * initial_moment_factor(rho0, e)
}

/// Spectral tail `T Σ_{n≠0} |n|^{(2−4/τ)−2β} Σ_k |⟨e_n, f^ε_k − f_k⟩|²` over
/// `|n|∞ ≤ nv`, where `f^ε_k = a_k f_k` are the weighted modes of `model`
/// and `f_k` the full unit-weight basis up to `nv`.
pub fn rate_tail(model: &NoiseModel, nv: usize, norm: NormSpec, t_end: f64) -> f64 {
    let expo = norm.tau.sobolev_shift() - 2.0 * norm.beta;
    let weights = model.modes();
    enumerate_modes(model.dim(), nv)
        .iter()
        .enumerate()
        .filter(|(_, m)| m.parity != Parity::Constant)
        .map(|(i, m)| {
            let a = weights.get(i).map_or(0.0, |w| w.weight);
            let n = m.k_squared().sqrt();
            // |f̂_k(±k)|² = 1/2 at both ±k
            (a - 1.0) * (a - 1.0) * n.powf(expo)
        })
        .sum::<f64>()
        * t_end
}

/// `C = observed / (leading + tail)`, fitted on one row.
pub fn fit_rate_constant(observed: f64, leading: f64, tail: f64) -> Result<f64> {
    let rhs = leading + tail;
    if !(rhs > 0.0 && rhs.is_finite()) {
        return Err(Error::invalid("rate bound", format!("right-hand side {rhs} cannot be fitted")));
    }
    Ok(observed / rhs)
}

/// Scale of the `L^h` moment estimate:
/// `F3^{h/2} (1 + εF3)^{(d/2)(p+m)} (1 + moments)`.
pub fn moment_scale(d: usize, epsilon: f64, h: f64, norms: StructureNorms, e: &Exponents, rho0: &Rho0Spec) -> f64 {
    norms.f3.powf(0.5 * h)
        * (1.0 + epsilon * norms.f3).powf(0.5 * d as f64 * (e.p + e.m))
        * initial_moment_factor(rho0, e)
}

/// Admissible integrability range `[1, p/(k+1)]` for the moment estimate.
pub fn moment_h_range(e: &Exponents) -> (f64, f64) {
    (1.0, e.p / (e.k + 1.0))
}

/// `R_ε = C₀ (inf φ̇)^{−2} (ε²‖F1‖‖F3‖ + ε‖F3‖)`.
pub fn moser_r(c0: f64, inf_dphi: f64, epsilon: f64, norms: StructureNorms) -> f64 {
    c0 * (epsilon * epsilon * norms.f1 * norms.f3 + epsilon * norms.f3) / (inf_dphi * inf_dphi)
}

/// Exponent ζ of the iteration, which depends on whether `R ≥ 1`.
pub fn moser_zeta(d: usize, r_at_least_one: bool) -> f64 {
    let d = d as f64;
    if r_at_least_one {
        0.5 * d * (1.0 + 2.0 / d).powi(2)
    } else {
        (-d * (d + 1.0)).exp() * (0.5 + 1.0 / d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoserSeries {
    pub sum: f64,
    /// Index at which the series was truncated.
    pub terms: usize,
}

const SERIES_TOL: f64 = 1e-12;
const SERIES_MAX: usize = 10_000_000;

/// `Σ_{j≥1} j^{−2} R^{ζ(1+2/d)^{−j}}`, given `ln R`, truncated at the first
/// term below 1e-12 once the factor `R^{…}` no longer exceeds one.
///
/// Working with `ln R` keeps the series meaningful when R underflows.
pub fn moser_series(d: usize, ln_r: f64) -> MoserSeries {
    if ln_r == f64::NEG_INFINITY {
        return MoserSeries { sum: 0.0, terms: 0 };
    }
    let zeta = moser_zeta(d, ln_r >= 0.0);
    let ratio = 1.0 / (1.0 + 2.0 / d as f64);
    let mut x = zeta * ln_r;
    let mut sum = 0.0;
    let mut j = 1usize;
    loop {
        x *= ratio;
        let jj = (j * j) as f64;
        // once |x| is below rounding, the factor is exactly one
        let term = if x.abs() < 1e-18 { 1.0 / jj } else { x.exp() / jj };
        sum += term;
        if (term < SERIES_TOL && 1.0 / jj < SERIES_TOL) || j >= SERIES_MAX {
            return MoserSeries { sum, terms: j };
        }
        j += 1;
    }
}

/// `c*/(ℓ − δ) · Σ_j j^{−2} R^{ζ(1+2/d)^{−j}}` with `c* = 1`.
pub fn moser_bound(d: usize, low: f64, delta: f64, ln_r: f64) -> f64 {
    moser_series(d, ln_r).sum / (low - delta)
}

/// Solves `moser_bound(ln R) = target` for `ln R`. The bound increases
/// with R, vanishes as R → 0 and is unbounded as R → ∞.
pub fn fit_moser_ln_r(d: usize, low: f64, delta: f64, target: f64) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::invalid("moser fit", format!("target probability {target} must be positive")));
    }
    let (mut lo, mut hi) = (-1e300f64, 700.0f64);
    if moser_bound(d, low, delta, hi) < target {
        return Err(Error::invalid("moser fit", "target beyond the range of the bound"));
    }
    // bisect in a signed-log coordinate so both tiny and huge |ln R| resolve
    let to_u = |x: f64| x.signum() * x.abs().ln_1p();
    let from_u = |u: f64| u.signum() * u.abs().exp_m1();
    let (mut ulo, mut uhi) = (to_u(lo), to_u(hi));
    for _ in 0..200 {
        let um = 0.5 * (ulo + uhi);
        let x = from_u(um);
        if moser_bound(d, low, delta, x) < target {
            ulo = um;
            lo = x;
        } else {
            uhi = um;
            hi = x;
        }
        if uhi - ulo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Tau;
    use crate::coefficients::model_case;
    use crate::noise::{build_basis, closed_form_sums};
    use std::f64::consts::PI;

    #[test]
    fn tail_is_a_zeta_remainder() {
        let model = build_basis(1, 2, 64).unwrap();
        let norm = NormSpec::new(1, 1.0, Tau::Two).unwrap();
        let got = rate_tail(&model, 31, norm, 0.5);
        // each n ≠ 0 with |n| > M carries unit mass, counted for ±n
        let want: f64 = 2.0 * (3..=31).map(|n| 1.0 / (n * n) as f64).sum::<f64>() * 0.5;
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn tail_vanishes_without_truncation() {
        let model = build_basis(1, 10, 64).unwrap();
        let norm = NormSpec::new(1, 2.0, Tau::Infinity).unwrap();
        assert_eq!(rate_tail(&model, 10, norm, 1.0), 0.0);
    }

    #[test]
    fn leading_term_by_hand() {
        let e = model_case(2.0).unwrap().exponents;
        let n = closed_form_sums(1, 1.0);
        let eps: f64 = 1e-2;
        let want = (eps * (3.0 + 8.0 * PI * PI).powi(2) + 0.1 * (8.0 * PI * PI).sqrt())
            * (1.0 + eps * 8.0 * PI * PI).powf(3.0)
            * 3.0;
        let got = rate_leading(1, eps, n, &e, &Rho0Spec::Constant(1.0));
        assert!((got - want).abs() < 1e-10 * want);
    }

    #[test]
    fn moser_r_arithmetic() {
        let n = StructureNorms { f1: 3.0, f2: 0.0, f3: 8.0 };
        let r = moser_r(2.0, 0.5, 0.1, n);
        assert!((r - 2.0 * (0.01 * 24.0 + 0.8) / 0.25).abs() < 1e-14);
        assert_eq!(moser_zeta(1, true), 4.5);
        assert!((moser_zeta(1, false) - 1.5 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn series_limits() {
        // R = 1: every factor is one
        let s = moser_series(1, 0.0);
        assert!((s.sum - PI * PI / 6.0).abs() < 2e-6);
        assert!(s.terms >= 1_000_000);
        let small = moser_series(1, -1e6).sum;
        let tiny = moser_series(1, -1e12).sum;
        assert!(tiny < small && small < s.sum);
        assert!(moser_series(1, 1.0).sum > s.sum);
    }

    #[test]
    fn moser_fit_round_trip() {
        for target in [0.9, 0.3, 0.02] {
            let ln_r = fit_moser_ln_r(1, 1.0, 0.5, target).unwrap();
            let b = moser_bound(1, 1.0, 0.5, ln_r);
            assert!((b - target).abs() < 1e-6 * target, "{target}: {b}");
        }
    }
}
