//! C² modifications of (φ, ν, σ) on `[0, δ]` that agree with the originals
//! on `[δ, ∞)`.

use std::sync::Arc;

use super::{Coefficients, Profile, SharedProfile};
use crate::error::{Error, Result};

/// Replacement for φ on `[0, δ]`:
///
/// ```text
/// P(z) = s z + (f' − s)(δ/q)((z/δ)^{q+1} − z/δ),   s = φ(δ)/δ, f' = φ̇(δ)
/// ```
///
/// so `P(0) = 0`, `P(δ) = φ(δ)`, `P'(δ) = φ̇(δ)` and `P'` is monotone on
/// `[0, δ]`. The exponent `q ≥ 1` is chosen so that `P' ≥ φ̇(δ)/3`
/// whenever `s > φ̇(δ)/3`, and `P' ≥ s/2` otherwise.
#[derive(Debug)]
struct PhiExtension {
    base: SharedProfile,
    delta: f64,
    s: f64,
    fd: f64,
    q: f64,
}

impl PhiExtension {
    fn new(base: SharedProfile, delta: f64) -> Result<Self> {
        let s = base.value(delta) / delta;
        let fd = base.d1(delta);
        if !(s > 0.0) || !(fd > 0.0) {
            return Err(Error::invalid(
                "phi",
                format!("needs phi(delta) > 0 and dphi(delta) > 0 at delta = {delta:e}"),
            ));
        }
        let q = if fd <= s {
            1.0
        } else if s > fd / 3.0 {
            ((fd - s) / (s - fd / 3.0)).max(1.0)
        } else {
            (2.0 * (fd - s) / s).max(1.0)
        };
        Ok(Self { base, delta, s, fd, q })
    }
}

impl Profile for PhiExtension {
    fn value(&self, z: f64) -> f64 {
        if z >= self.delta {
            return self.base.value(z);
        }
        let z = z.max(0.0);
        let t = z / self.delta;
        self.s * z + (self.fd - self.s) * (self.delta / self.q) * (t.powf(self.q + 1.0) - t)
    }

    fn d1(&self, z: f64) -> f64 {
        if z >= self.delta {
            return self.base.d1(z);
        }
        let t = z.max(0.0) / self.delta;
        self.s + (self.fd - self.s) * ((self.q + 1.0) * t.powf(self.q) - 1.0) / self.q
    }

    fn d2(&self, z: f64) -> f64 {
        if z >= self.delta {
            return self.base.d2(z);
        }
        let t = z.max(0.0) / self.delta;
        (self.fd - self.s) * (self.q + 1.0) * t.powf(self.q - 1.0) / self.delta
    }
}

/// Cubic Hermite replacement on `[0, δ]` keeping `f(0)`, matching value and
/// slope at δ, with slope at 0 equal to the secant slope.
#[derive(Debug)]
struct HermiteExtension {
    base: SharedProfile,
    delta: f64,
    v0: f64,
    s: f64,
    fd: f64,
}

impl HermiteExtension {
    fn new(base: SharedProfile, delta: f64) -> Self {
        let v0 = base.value(0.0);
        let s = (base.value(delta) - v0) / delta;
        let fd = base.d1(delta);
        Self { base, delta, v0, s, fd }
    }
}

impl Profile for HermiteExtension {
    fn value(&self, z: f64) -> f64 {
        if z >= self.delta {
            return self.base.value(z);
        }
        let z = z.max(0.0);
        let d = self.delta;
        self.v0 + self.s * z + (self.fd - self.s) * (z * z * z / (d * d) - z * z / d)
    }

    fn d1(&self, z: f64) -> f64 {
        if z >= self.delta {
            return self.base.d1(z);
        }
        let z = z.max(0.0);
        let d = self.delta;
        self.s + (self.fd - self.s) * (3.0 * z * z / (d * d) - 2.0 * z / d)
    }

    fn d2(&self, z: f64) -> f64 {
        if z >= self.delta {
            return self.base.d2(z);
        }
        let z = z.max(0.0);
        let d = self.delta;
        (self.fd - self.s) * (6.0 * z / (d * d) - 2.0 / d)
    }
}

#[derive(Clone, Debug)]
pub struct SmoothedCoefficients {
    pub base: Coefficients,
    pub eta: f64,
    pub delta_eta: f64,
    pub smoothed: Coefficients,
}

/// [`smooth_near_zero_with_reference`] with reference scale 1.
pub fn smooth_near_zero(c: &Coefficients, eta: f64) -> Result<SmoothedCoefficients> {
    smooth_near_zero_with_reference(c, eta, 1.0)
}

/// Replaces φ, ν, σ on `[0, η·z_ref]`.
pub fn smooth_near_zero_with_reference(c: &Coefficients, eta: f64, z_ref: f64) -> Result<SmoothedCoefficients> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid("eta", format!("must lie in (0, 1), got {eta}")));
    }
    if !(z_ref > 0.0) {
        return Err(Error::invalid("z_ref", format!("must be positive, got {z_ref}")));
    }
    let delta = eta * z_ref;
    let phi: SharedProfile = Arc::new(PhiExtension::new(c.phi.clone(), delta)?);
    let sigma: SharedProfile = Arc::new(HermiteExtension::new(c.sigma.clone(), delta));
    let nu = c
        .nu
        .iter()
        .map(|f| Arc::new(HermiteExtension::new(f.clone(), delta)) as SharedProfile)
        .collect();
    let smoothed = Coefficients {
        name: format!("{} smoothed(eta={eta})", c.name),
        phi,
        nu,
        sigma,
        exponents: c.exponents,
    };
    Ok(SmoothedCoefficients { base: c.clone(), eta, delta_eta: delta, smoothed })
}
