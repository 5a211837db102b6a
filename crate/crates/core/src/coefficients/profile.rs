use std::fmt;
use std::sync::Arc;

/// A scalar nonlinearity on `[0, ∞)` with first and second derivatives.
///
/// The default derivative implementations are central finite differences;
/// closed-form families override them.
pub trait Profile: Send + Sync + fmt::Debug {
    fn value(&self, z: f64) -> f64;

    fn d1(&self, z: f64) -> f64 {
        let h = fd_step(z);
        if z > h {
            (self.value(z + h) - self.value(z - h)) / (2.0 * h)
        } else {
            (self.value(z + h) - self.value(z)) / h
        }
    }

    fn d2(&self, z: f64) -> f64 {
        let h = fd_step(z).sqrt() * 1e-2;
        let z = z.max(h);
        (self.d1(z + h) - self.d1(z - h)) / (2.0 * h)
    }
}

fn fd_step(z: f64) -> f64 {
    f64::EPSILON.cbrt() * z.abs().max(1e-3)
}

pub type SharedProfile = Arc<dyn Profile>;

#[derive(Clone, Copy, Debug, PartialEq)]
enum PowerKind {
    Zero,
    Constant,
    Linear,
    Square,
    Sqrt,
    Integer(i32),
    General,
}

/// `scale · z^exponent` on `z ≥ 0`; negative arguments are evaluated at 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Power {
    pub scale: f64,
    pub exponent: f64,
    kind: PowerKind,
}

impl Power {
    pub fn new(scale: f64, exponent: f64) -> Self {
        let kind = if scale == 0.0 {
            PowerKind::Zero
        } else if exponent == 0.0 {
            PowerKind::Constant
        } else if exponent == 1.0 {
            PowerKind::Linear
        } else if exponent == 2.0 {
            PowerKind::Square
        } else if exponent == 0.5 {
            PowerKind::Sqrt
        } else if exponent.fract() == 0.0 && exponent.abs() < 64.0 {
            PowerKind::Integer(exponent as i32)
        } else {
            PowerKind::General
        };
        Self { scale, exponent, kind }
    }

    fn pow(&self, z: f64, a: f64) -> f64 {
        if a == 0.0 {
            1.0
        } else if a.fract() == 0.0 && a.abs() < 64.0 {
            z.powi(a as i32)
        } else {
            z.powf(a)
        }
    }
}

impl Profile for Power {
    #[inline]
    fn value(&self, z: f64) -> f64 {
        let z = z.max(0.0);
        match self.kind {
            PowerKind::Zero => 0.0,
            PowerKind::Constant => self.scale,
            PowerKind::Linear => self.scale * z,
            PowerKind::Square => self.scale * z * z,
            PowerKind::Sqrt => self.scale * z.sqrt(),
            PowerKind::Integer(i) => self.scale * z.powi(i),
            PowerKind::General => self.scale * z.powf(self.exponent),
        }
    }

    #[inline]
    fn d1(&self, z: f64) -> f64 {
        let z = z.max(0.0);
        match self.kind {
            PowerKind::Zero | PowerKind::Constant => 0.0,
            PowerKind::Linear => self.scale,
            PowerKind::Square => 2.0 * self.scale * z,
            PowerKind::Sqrt => 0.5 * self.scale / z.sqrt(),
            _ => self.scale * self.exponent * self.pow(z, self.exponent - 1.0),
        }
    }

    fn d2(&self, z: f64) -> f64 {
        let z = z.max(0.0);
        match self.kind {
            PowerKind::Zero | PowerKind::Constant | PowerKind::Linear => 0.0,
            PowerKind::Square => 2.0 * self.scale,
            _ => {
                let a = self.exponent;
                self.scale * a * (a - 1.0) * self.pow(z, a - 2.0)
            }
        }
    }
}

/// A user-supplied closure; derivatives by finite differences.
#[derive(Clone)]
pub struct Custom {
    pub label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Custom {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Custom({})", self.label)
    }
}

impl Profile for Custom {
    fn value(&self, z: f64) -> f64 {
        (self.f)(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_paths_agree_with_general_formula() {
        for &a in &[0.5, 1.0, 2.0, 3.0, 1.5, 0.0] {
            let p = Power::new(1.7, a);
            for &z in &[0.3, 1.0, 2.5] {
                assert!((p.value(z) - 1.7 * z.powf(a)).abs() < 1e-12);
                let d1 = if a == 0.0 { 0.0 } else { 1.7 * a * z.powf(a - 1.0) };
                assert!((p.d1(z) - d1).abs() < 1e-12);
                let d2 = if a == 0.0 || a == 1.0 { 0.0 } else { 1.7 * a * (a - 1.0) * z.powf(a - 2.0) };
                assert!((p.d2(z) - d2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn custom_uses_finite_differences() {
        let c = Custom::new("cube", |z| z * z * z);
        assert!((c.d1(2.0) - 12.0).abs() < 1e-6);
        assert!((c.d2(2.0) - 12.0).abs() < 1e-3);
    }
}
