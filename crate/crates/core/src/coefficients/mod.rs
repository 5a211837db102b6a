//! The nonlinearity triple (φ, ν, σ), its exponent constants, a sampled
//! assumption validator and the near-zero smoothing.

mod profile;
mod smooth;
mod validate;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

pub use profile::{Custom, Power, Profile, SharedProfile};
pub use smooth::{smooth_near_zero, smooth_near_zero_with_reference, SmoothedCoefficients};
pub use validate::{validate_assumptions, CheckStatus, ConditionResult, ValidationReport};

/// Growth exponents attached to a coefficient triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub m: f64,
    pub p: f64,
    pub k: f64,
    pub g: f64,
    pub theta: f64,
}

impl Exponents {
    /// Violated exponent constraints, as human-readable strings.
    pub fn constraint_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.m < 1.0 {
            out.push(format!("m = {} < 1", self.m));
        }
        if self.p < 2.0 {
            out.push(format!("p = {} < 2", self.p));
        }
        let k_max = ((self.p - 4.0) / 4.0).max(0.0);
        if self.k < 0.0 || self.k > k_max + 1e-12 {
            out.push(format!("k = {} outside [0, {k_max}]", self.k));
        }
        let g_max = (self.p / (2.0 * (self.k + 1.0)) - 2.0).max(0.0);
        if self.g < 0.0 || self.g > g_max + 1e-12 {
            out.push(format!("g = {} outside [0, {g_max}]", self.g));
        }
        out
    }

    pub fn theta_admissible(&self) -> bool {
        self.theta > 0.0 && self.theta < 0.5
    }
}

#[derive(Clone, Debug)]
pub struct Coefficients {
    pub name: String,
    pub phi: SharedProfile,
    /// One component per axis; empty means ν ≡ 0.
    pub nu: Vec<SharedProfile>,
    pub sigma: SharedProfile,
    pub exponents: Exponents,
}

impl Coefficients {
    pub fn new(
        name: impl Into<String>,
        phi: impl Profile + 'static,
        sigma: impl Profile + 'static,
        exponents: Exponents,
    ) -> Self {
        Self {
            name: name.into(),
            phi: Arc::new(phi),
            nu: Vec::new(),
            sigma: Arc::new(sigma),
            exponents,
        }
    }

    pub fn with_drift(mut self, nu: Vec<SharedProfile>) -> Self {
        self.nu = nu;
        self
    }

    /// φ(z) = κz with σ(z) = z^{a}.
    pub fn linear(kappa: f64, sigma_exponent: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::invalid("kappa", format!("must be positive, got {kappa}")));
        }
        if !(sigma_exponent >= 0.5) {
            return Err(Error::invalid("sigma_exponent", format!("must be >= 1/2, got {sigma_exponent}")));
        }
        let theta = if sigma_exponent < 1.0 { 1.0 - sigma_exponent } else { 0.25 };
        Ok(Self::new(
            format!("linear(kappa={kappa},sigma=z^{sigma_exponent})"),
            Power::new(kappa, 1.0),
            Power::new(1.0, sigma_exponent),
            Exponents { m: 1.0, p: 4.0, k: 0.0, g: 0.0, theta },
        ))
    }

    #[inline]
    pub fn phi(&self, z: f64) -> f64 {
        self.phi.value(z)
    }

    #[inline]
    pub fn dphi(&self, z: f64) -> f64 {
        self.phi.d1(z)
    }

    pub fn ddphi(&self, z: f64) -> f64 {
        self.phi.d2(z)
    }

    #[inline]
    pub fn sigma(&self, z: f64) -> f64 {
        self.sigma.value(z)
    }

    #[inline]
    pub fn dsigma(&self, z: f64) -> f64 {
        self.sigma.d1(z)
    }

    pub fn has_drift(&self) -> bool {
        !self.nu.is_empty()
    }

    #[inline]
    pub fn nu(&self, axis: usize, z: f64) -> f64 {
        self.nu.get(axis).map_or(0.0, |f| f.value(z))
    }

    #[inline]
    pub fn dnu(&self, axis: usize, z: f64) -> f64 {
        self.nu.get(axis).map_or(0.0, |f| f.d1(z))
    }

    pub fn ddnu(&self, axis: usize, z: f64) -> f64 {
        self.nu.get(axis).map_or(0.0, |f| f.d2(z))
    }
}

/// The power-law family φ(z) = z^m, σ(z) = z^{m/2}, ν = 0.
pub fn model_case(m: f64) -> Result<Coefficients> {
    if !(m >= 1.0) || !m.is_finite() {
        return Err(Error::invalid("m", format!("must be >= 1, got {m}")));
    }
    let theta = if m < 2.0 { 1.0 - m / 2.0 } else { 0.25 };
    let exponents = Exponents {
        m,
        p: (m * m).max(4.0),
        k: ((m - 2.0) / 2.0).max(0.0),
        g: (m - 2.0).max(0.0),
        theta,
    };
    Ok(Coefficients::new(
        format!("power(m={m})"),
        Power::new(1.0, m),
        Power::new(1.0, m / 2.0),
        exponents,
    ))
}

/// Θ_{φ,q}(z) = ∫₀^z s^{(q−2)/2} √φ̇(s) ds.
///
/// Integrated in u with s = z·u²; the extra factor u tames the endpoint
/// singularities of power-law derivatives.
pub fn theta_phi_q(c: &Coefficients, q: f64, z: f64) -> Result<f64> {
    if !(q >= 2.0) {
        return Err(Error::invalid("q", format!("must be >= 2, got {q}")));
    }
    if !(z >= 0.0) {
        return Err(Error::invalid("z", format!("must be >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let a = (q - 2.0) / 2.0;
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let s = z * u * u;
        2.0 * z * u * s.powf(a) * c.dphi(s).max(0.0).sqrt()
    };
    quad::integrate(integrand, 0.0, 1.0, 1e-300, 1e-11)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_case_exponents() {
        let c = model_case(1.0).unwrap();
        assert_eq!(c.exponents.p, 4.0);
        assert_eq!((c.exponents.k, c.exponents.g), (0.0, 0.0));
        assert!((c.sigma(4.0) - 2.0).abs() < 1e-15);
        let c = model_case(2.0).unwrap();
        assert_eq!((c.exponents.p, c.exponents.k, c.exponents.g), (4.0, 0.0, 0.0));
        assert_eq!(c.phi(3.0), 9.0);
        assert_eq!(c.sigma(3.0), 3.0);
        let c = model_case(3.0).unwrap();
        assert_eq!((c.exponents.p, c.exponents.k, c.exponents.g), (9.0, 0.5, 1.0));
        assert!(c.exponents.constraint_violations().is_empty());
        assert!(model_case(0.5).is_err());
    }

    #[test]
    fn zero_at_origin() {
        for m in [1.0, 1.5, 2.0, 3.0] {
            let c = model_case(m).unwrap();
            assert_eq!(c.phi(0.0), 0.0);
            assert_eq!(c.sigma(0.0), 0.0);
        }
    }

    #[test]
    fn theta_closed_forms() {
        let lin = model_case(1.0).unwrap();
        assert!((theta_phi_q(&lin, 2.0, 3.0).unwrap() - 3.0).abs() < 1e-12);
        let sq = model_case(2.0).unwrap();
        let z: f64 = 2.5;
        let exact = 2.0_f64.sqrt() * z.powf(1.5) * 2.0 / 3.0;
        assert!((theta_phi_q(&sq, 2.0, z).unwrap() - exact).abs() < 1e-10 * exact);
        assert_eq!(theta_phi_q(&sq, 4.0, 0.0).unwrap(), 0.0);
        assert!(theta_phi_q(&sq, 1.0, 1.0).is_err());
    }

    #[test]
    fn theta_handles_singular_derivative() {
        // φ = z^{1.2}: φ̇ ~ z^{0.2}; Θ_{φ,2}(z) = √1.2 z^{1.1}/1.1
        let c = Coefficients::new(
            "p12",
            Power::new(1.0, 1.2),
            Power::new(1.0, 0.6),
            Exponents { m: 1.2, p: 4.0, k: 0.0, g: 0.0, theta: 0.4 },
        );
        let exact = 1.2_f64.sqrt() * 2.0_f64.powf(1.1) / 1.1;
        assert!((theta_phi_q(&c, 2.0, 2.0).unwrap() - exact).abs() < 1e-9);
    }
}
