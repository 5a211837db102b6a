use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{closed_form_sums, StructureNorms};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub epsilon: f64,
    pub cutoff: usize,
    pub norms: StructureNorms,
    /// `√ε (‖F1‖ + ‖F2‖ + ‖F3‖)` at the integer cutoff.
    pub envelope: f64,
}

/// Noise strengths paired with ultraviolet cutoffs `M_ε = ⌊ε^{−γ}⌋`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSchedule {
    pub d: usize,
    pub gamma: Option<f64>,
    pub rows: Vec<ScheduleRow>,
    /// Whether the envelope is strictly decreasing after flooring the
    /// cutoffs. Small ε lists can fail this even inside the regime.
    pub floored_monotone: bool,
}

fn envelope(eps: f64, n: StructureNorms) -> f64 {
    eps.sqrt() * (n.f1 + n.f2 + n.f3)
}

fn row(d: usize, epsilon: f64, cutoff: usize) -> ScheduleRow {
    let norms = closed_form_sums(d, cutoff as f64);
    ScheduleRow { epsilon, cutoff, norms, envelope: envelope(epsilon, norms) }
}

fn strictly_decreasing(xs: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = xs.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

/// Builds the cutoff schedule for a strictly decreasing list of ε in (0, 1).
///
/// Rejects γ with `γ(d + 2) ≥ 1/2`, for which `√ε ‖F3‖ ~ ε^{1/2 − γ(d+2)}`
/// does not vanish, and lists along which the un-floored envelope
/// `√ε (F1 + F3)(ε^{−γ})` fails to decrease.
pub fn make_schedule(d: usize, eps: &[f64], gamma: f64) -> Result<ScalingSchedule> {
    if d != 1 && d != 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
    }
    check_eps(eps)?;
    let limit = 0.5 / (d as f64 + 2.0);
    if gamma >= limit {
        return Err(Error::RegimeViolation(format!(
            "gamma = {gamma} in d = {d}: sqrt(eps)*||F3|| ~ eps^(1/2 - gamma*(d+2)) does not vanish; need gamma < {limit:.6}"
        )));
    }
    let smooth: Vec<f64> = eps
        .iter()
        .map(|&e| envelope(e, closed_form_sums(d, e.powf(-gamma))))
        .collect();
    if !strictly_decreasing(smooth.iter().copied()) {
        return Err(Error::RegimeViolation(format!(
            "envelope sqrt(eps)*(F1+F3) is not strictly decreasing along the list: {smooth:?}"
        )));
    }
    let rows: Vec<ScheduleRow> = eps
        .iter()
        .map(|&e| row(d, e, (e.powf(-gamma) * (1.0 + 1e-12)).floor() as usize))
        .collect();
    let floored_monotone = strictly_decreasing(rows.iter().map(|r| r.envelope));
    Ok(ScalingSchedule { d, gamma: Some(gamma), rows, floored_monotone })
}

/// A schedule with explicit cutoffs and no regime check (ε = 0 allowed).
pub fn fixed_schedule(d: usize, pairs: &[(f64, usize)]) -> Result<ScalingSchedule> {
    if d != 1 && d != 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if pairs.is_empty() {
        return Err(Error::invalid("epsilon", "empty list"));
    }
    if pairs.iter().any(|p| !(p.0 >= 0.0 && p.0.is_finite())) {
        return Err(Error::invalid("epsilon", "values must be finite and nonnegative"));
    }
    let rows: Vec<ScheduleRow> = pairs.iter().map(|&(e, m)| row(d, e, m)).collect();
    let floored_monotone = strictly_decreasing(rows.iter().map(|r| r.envelope));
    Ok(ScalingSchedule { d, gamma: None, rows, floored_monotone })
}

fn check_eps(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::invalid("epsilon", "empty list"));
    }
    if eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::invalid("epsilon", "values must lie in (0, 1)"));
    }
    if !strictly_decreasing(eps.iter().copied()) {
        return Err(Error::invalid("epsilon", "list must be strictly decreasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn eighth_power_schedule() {
        let s = make_schedule(1, &[1e-2, 1e-3, 1e-4], 0.125).unwrap();
        let cutoffs: Vec<usize> = s.rows.iter().map(|r| r.cutoff).collect();
        assert_eq!(cutoffs, vec![1, 2, 3]);
        assert!((s.rows[1].norms.f3 - 40.0 * PI * PI).abs() < 1e-9);
        // flooring breaks monotonicity on this short list
        assert!(!s.floored_monotone);
    }

    #[test]
    fn half_power_is_rejected() {
        assert!(matches!(make_schedule(1, &[1e-2, 1e-3], 0.5), Err(Error::RegimeViolation(_))));
        assert!(matches!(make_schedule(2, &[1e-2], 0.15), Err(Error::RegimeViolation(_))));
    }

    #[test]
    fn single_epsilon_is_valid() {
        let s = make_schedule(1, &[1e-3], 0.1).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert!(s.floored_monotone);
    }

    #[test]
    fn bad_lists() {
        assert!(make_schedule(1, &[1e-3, 1e-2], 0.1).is_err());
        assert!(make_schedule(1, &[0.0], 0.1).is_err());
        assert!(make_schedule(1, &[], 0.1).is_err());
        assert!(fixed_schedule(1, &[(0.0, 0)]).is_ok());
    }
}
