//! Sampled checks of the coefficient growth and regularity conditions.
//!
//! Every inequality `lhs(z) ≤ c·rhs(z)` is checked on a log-spaced grid of
//! `samples` points in `[z_max·1e-8, z_max]`. The reported constant is the
//! largest sampled ratio. Whether the ratio stays bounded is judged from its
//! growth rate over the outermost decade at each relevant end:
//! `ln(r_end / r_inner) / ln 10`. A growth rate at most `PASS_GROWTH` passes,
//! up to `BOUNDARY_GROWTH` is reported as a boundary case (logarithmic or
//! very slow power growth), anything larger is a violation whose witness is
//! the end point. Choose `z_max` at least a couple of decades beyond the
//! scale where the coefficients change character.

use serde::{Deserialize, Serialize};

use super::{theta_phi_q, Coefficients};

const DECADES: f64 = 8.0;
const PASS_GROWTH: f64 = 0.05;
const BOUNDARY_GROWTH: f64 = 0.25;
/// Threshold used for the conditions that only constrain `z > δ`.
const AWAY_FROM_ZERO: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Boundary,
    Violation,
}

impl CheckStatus {
    fn worst(self, other: Self) -> Self {
        use CheckStatus::*;
        match (self, other) {
            (Violation, _) | (_, Violation) => Violation,
            (Boundary, _) | (_, Boundary) => Boundary,
            _ => Pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub id: String,
    pub status: CheckStatus,
    /// Smallest constant that works on the sample grid.
    pub constant: Option<f64>,
    /// A sample point where the inequality fails or degenerates.
    pub witness: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub name: String,
    pub z_min: f64,
    pub z_max: f64,
    pub samples: usize,
    pub results: Vec<ConditionResult>,
}

impl ValidationReport {
    pub fn get(&self, id: &str) -> Option<&ConditionResult> {
        self.results.iter().find(|r| r.id == id)
    }

    pub fn status(&self, id: &str) -> Option<CheckStatus> {
        self.get(id).map(|r| r.status)
    }

    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.status == CheckStatus::Pass)
    }

    /// True when every condition whose id starts with `prefix` passes.
    pub fn group_passes(&self, prefix: &str) -> bool {
        self.results
            .iter()
            .filter(|r| r.id.starts_with(prefix))
            .all(|r| r.status == CheckStatus::Pass)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Ends {
    Both,
    Low,
    High,
}

struct Sampler {
    z: Vec<f64>,
    decade: usize,
}

impl Sampler {
    fn new(z_max: f64, samples: usize) -> Self {
        let n = samples;
        let z = (0..n)
            .map(|i| z_max * 10f64.powf(-DECADES * (1.0 - i as f64 / (n - 1) as f64)))
            .collect();
        let decade = (((n - 1) as f64 / DECADES).round() as usize).max(1);
        Self { z, decade }
    }

    fn growth(a_end: f64, a_inner: f64) -> f64 {
        match (a_end > 0.0, a_inner > 0.0) {
            (false, _) => f64::NEG_INFINITY,
            (true, false) => f64::INFINITY,
            (true, true) => (a_end / a_inner).ln() / std::f64::consts::LN_10,
        }
    }

    /// Boundedness of `ratio` on the sample points `idx` (ascending).
    fn ratio_check(&self, id: &str, idx: &[usize], ends: Ends, ratio: impl Fn(f64) -> f64) -> ConditionResult {
        let r: Vec<f64> = idx.iter().map(|&i| ratio(self.z[i])).collect();
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return ConditionResult {
                id: id.into(),
                status: CheckStatus::Violation,
                constant: None,
                witness: Some(self.z[idx[j]]),
                note: "non-finite ratio".into(),
            };
        }
        let constant = r.iter().cloned().fold(0.0, f64::max);
        let span = self.decade.min(r.len().saturating_sub(1));
        let mut status = CheckStatus::Pass;
        let mut witness = None;
        let mut note = String::new();
        if span > 0 {
            let mut judge = |g: f64, z: f64, end: &str| {
                let s = if g <= PASS_GROWTH {
                    CheckStatus::Pass
                } else if g <= BOUNDARY_GROWTH {
                    CheckStatus::Boundary
                } else {
                    CheckStatus::Violation
                };
                if s != CheckStatus::Pass {
                    witness = Some(z);
                    note = format!("ratio grows at rate {g:.3} per decade near {end}");
                }
                status = status.worst(s);
            };
            if ends != Ends::High {
                judge(Self::growth(r[0], r[span]), self.z[idx[0]], "0");
            }
            if ends != Ends::Low {
                let n = r.len();
                judge(Self::growth(r[n - 1], r[n - 1 - span]), self.z[idx[n - 1]], "infinity");
            }
        }
        ConditionResult { id: id.into(), status, constant: Some(constant), witness, note }
    }
}

fn combine(id: &str, parts: Vec<ConditionResult>) -> ConditionResult {
    let mut out = ConditionResult {
        id: id.into(),
        status: CheckStatus::Pass,
        constant: Some(0.0),
        witness: None,
        note: String::new(),
    };
    for p in parts {
        out.status = out.status.worst(p.status);
        out.constant = match (out.constant, p.constant) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        if p.status != CheckStatus::Pass && out.witness.is_none() {
            out.witness = p.witness;
            out.note = format!("{}: {}", p.id, p.note);
        }
    }
    out
}

fn pass(id: &str, constant: f64, note: &str) -> ConditionResult {
    ConditionResult {
        id: id.into(),
        status: CheckStatus::Pass,
        constant: Some(constant),
        witness: None,
        note: note.into(),
    }
}

/// Log-slope of `f` between grid points `i` and `j`.
fn log_slope(z: &[f64], f: &[f64], i: usize, j: usize) -> f64 {
    (f[j].abs().ln() - f[i].abs().ln()) / (z[j].ln() - z[i].ln())
}

/// Checks the growth/regularity conditions of `c` on `[z_max·1e-8, z_max]`.
pub fn validate_assumptions(c: &Coefficients, z_max: f64, samples: usize) -> ValidationReport {
    let samples = samples.max(100);
    let s = Sampler::new(z_max, samples);
    let z = &s.z;
    let n = z.len();
    let e = c.exponents;
    let all: Vec<usize> = (0..n).collect();
    let away: Vec<usize> = (0..n).filter(|&i| z[i] > AWAY_FROM_ZERO).collect();
    let mut results = Vec::new();

    let theta2: Vec<f64> = z.iter().map(|&x| theta_phi_q(c, 2.0, x).unwrap_or(f64::NAN)).collect();
    let thetap: Vec<f64> = z.iter().map(|&x| theta_phi_q(c, e.p, x).unwrap_or(f64::NAN)).collect();
    let at = |v: &[f64], x: f64| v[z.iter().position(|&y| y == x).expect("grid point")];
    let nu_abs = |x: f64| (0..c.nu.len()).map(|a| c.nu(a, x).powi(2)).sum::<f64>().sqrt();
    let nu_dd = |x: f64| (0..c.nu.len()).map(|a| c.ddnu(a, x).abs()).sum::<f64>();

    // (i): normalisation and strict monotonicity of φ.
    let phi0 = c.phi(0.0);
    let sigma0 = c.sigma(0.0);
    let bad = z.iter().position(|&x| !(c.dphi(x) > 0.0));
    let min_dphi = z.iter().map(|&x| c.dphi(x)).fold(f64::INFINITY, f64::min);
    results.push(if phi0.abs() > 1e-14 || sigma0.abs() > 1e-14 {
        ConditionResult {
            id: "C1(i)".into(),
            status: CheckStatus::Violation,
            constant: None,
            witness: Some(0.0),
            note: format!("phi(0) = {phi0:e}, sigma(0) = {sigma0:e}"),
        }
    } else if let Some(i) = bad {
        ConditionResult {
            id: "C1(i)".into(),
            status: CheckStatus::Violation,
            constant: None,
            witness: Some(z[i]),
            note: format!("dphi({:e}) = {:e} is not positive", z[i], c.dphi(z[i])),
        }
    } else {
        pass("C1(i)", min_dphi, "minimum sampled dphi")
    });

    results.push(s.ratio_check("C1(ii)", &all, Ends::Both, |x| c.phi(x) / (1.0 + x.powf(e.m))));
    results.push(s.ratio_check("C1(iii)", &all, Ends::Low, |x| c.sigma(x).powi(2) / x));

    let running_sup = |f: &dyn Fn(f64) -> f64| {
        let mut acc = f(0.0);
        z.iter()
            .map(|&x| {
                acc = acc.max(f(x));
                acc
            })
            .collect::<Vec<f64>>()
    };
    let sup_sigma2 = running_sup(&|x| c.sigma(x).powi(2));
    results.push(s.ratio_check("C1(iv)", &all, Ends::Both, |x| {
        at(&sup_sigma2, x) / (1.0 + x + c.sigma(x).powi(2))
    }));
    if c.has_drift() {
        let sup_nu2 = running_sup(&|x| nu_abs(x).powi(2));
        results.push(s.ratio_check("C1(v)", &all, Ends::Both, |x| {
            at(&sup_nu2, x) / (1.0 + x + nu_abs(x).powi(2))
        }));
    } else {
        results.push(pass("C1(v)", 0.0, "nu = 0"));
    }

    results.push(check_vi(&s, c, &thetap));

    let vii_a = s.ratio_check("C1(vii)a", &all, Ends::Both, |x| {
        c.sigma(x).powi(2) / (1.0 + x + at(&theta2, x).powi(2))
    });
    let vii_b = s.ratio_check("C1(vii)b", &all, Ends::Both, |x| {
        x.powf(e.p - 2.0) * c.sigma(x).powi(2) / (1.0 + x + at(&thetap, x).powi(2))
    });
    results.push(combine("C1(vii)", vec![vii_a, vii_b]));

    results.push(s.ratio_check("C1(viii)", &away, Ends::High, |x| {
        let ds = c.dsigma(x);
        let lhs = ds.powi(4) / c.dphi(x) + (c.sigma(x) * ds).powi(2) + nu_abs(x) + c.dphi(x);
        lhs / (1.0 + x + at(&thetap, x).powi(2))
    }));

    let w_sigma = s.ratio_check("sigma", &away, Ends::High, |x| c.sigma(x).abs() / (1.0 + x.powf(e.k + 1.0)));
    let w_dsigma = s.ratio_check("dsigma", &away, Ends::High, |x| c.dsigma(x).abs() / (1.0 + x.powf(e.k)));
    results.push(combine("C2weak(i)", vec![w_sigma, w_dsigma]));
    results.push(s.ratio_check("C2weak(ii)", &away, Ends::High, |x| {
        (c.ddphi(x).abs() + nu_dd(x)) / (1.0 + x.powf(e.g))
    }));

    results.push(check_c2_i(&s, c));
    results.push(s.ratio_check("C2(ii)", &all, Ends::Both, |x| {
        (c.ddphi(x).abs() + nu_dd(x)) / (1.0 + x.powf(e.g))
    }));

    let violations = e.constraint_violations();
    results.push(if violations.is_empty() {
        pass("exponents", 0.0, "")
    } else {
        ConditionResult {
            id: "exponents".into(),
            status: CheckStatus::Violation,
            constant: None,
            witness: None,
            note: violations.join("; "),
        }
    });

    ValidationReport { name: c.name.clone(), z_min: z[0], z_max, samples, results }
}

/// Either `1/Θ̇_p ≤ c z^γ` for some γ ∈ [0, 1/2], or a Hölder bound
/// `|z − z'|^q ≤ c |Θ_p(z) − Θ_p(z')|²` with q read off the growth of Θ_p
/// at 0.
fn check_vi(s: &Sampler, c: &Coefficients, thetap: &[f64]) -> ConditionResult {
    let z = &s.z;
    let n = z.len();
    let p = c.exponents.p;
    let all: Vec<usize> = (0..n).collect();
    let dtheta = |x: f64| x.powf((p - 2.0) / 2.0) * c.dphi(x).max(0.0).sqrt();
    for step in 0..=10 {
        let gamma = 0.05 * step as f64;
        let r = s.ratio_check("C1(vi)", &all, Ends::Both, |x| 1.0 / (dtheta(x) * x.powf(gamma)));
        if r.status == CheckStatus::Pass {
            return ConditionResult { note: format!("option A with gamma = {gamma:.2}"), ..r };
        }
    }

    if thetap.iter().any(|t| !t.is_finite()) {
        return ConditionResult {
            id: "C1(vi)".into(),
            status: CheckStatus::Violation,
            constant: None,
            witness: None,
            note: "Theta_{phi,p} quadrature failed".into(),
        };
    }
    let d = s.decade;
    let slope0 = log_slope(z, thetap, 0, d);
    let slope_inf = log_slope(z, thetap, n - 1 - d, n - 1);
    let q = 2.0 * slope0;
    if q < 1.0 || q > 2.0 * slope_inf + 2.0 * PASS_GROWTH {
        return ConditionResult {
            id: "C1(vi)".into(),
            status: CheckStatus::Violation,
            constant: None,
            witness: Some(z[n - 1]),
            note: format!("no admissible q: Theta_p grows like z^{slope0:.3} at 0 and z^{slope_inf:.3} at infinity"),
        };
    }
    let log_ratio = |i: usize, j: usize| q * (z[j] - z[i]).ln() - 2.0 * (thetap[j] - thetap[i]).abs().ln();
    let sup_over = |lo: usize, hi: usize| {
        let mut best = f64::NEG_INFINITY;
        for i in lo..hi {
            for j in i + 1..hi {
                best = best.max(log_ratio(i, j));
            }
        }
        best
    };
    let full = sup_over(0, n);
    let inner = sup_over(d, n - d);
    let growth = (full - inner) / std::f64::consts::LN_10;
    let status = if !full.is_finite() {
        CheckStatus::Violation
    } else if growth <= PASS_GROWTH {
        CheckStatus::Pass
    } else if growth <= BOUNDARY_GROWTH {
        CheckStatus::Boundary
    } else {
        CheckStatus::Violation
    };
    ConditionResult {
        id: "C1(vi)".into(),
        status,
        constant: Some(full.exp()),
        witness: (status != CheckStatus::Pass).then_some(z[0]),
        note: format!("option B with q = {q:.3}"),
    }
}

/// Bounds on σ, σ̇ and σσ̇ over all of (0, ∞). The exponent θ needed by σ̇ at
/// 0 is estimated from the sampled slope and must lie strictly below 1/2.
fn check_c2_i(s: &Sampler, c: &Coefficients) -> ConditionResult {
    const SLACK: f64 = 0.02;
    let z = &s.z;
    let n = z.len();
    let e = c.exponents;
    let all: Vec<usize> = (0..n).collect();
    let ds: Vec<f64> = z.iter().map(|&x| c.dsigma(x)).collect();
    let theta_req = if ds[0] == 0.0 || ds[s.decade] == 0.0 {
        0.0
    } else {
        (-log_slope(z, &ds, 0, s.decade)).max(0.0)
    };
    if theta_req > 0.5 + SLACK {
        return ConditionResult {
            id: "C2(i)".into(),
            status: CheckStatus::Violation,
            constant: None,
            witness: Some(z[0]),
            note: format!("dsigma ~ z^-{theta_req:.3} near 0 needs theta >= 1/2"),
        };
    }
    let theta = if e.theta_admissible() && e.theta >= theta_req { e.theta } else { theta_req.clamp(0.01, 0.5) };
    let a = s.ratio_check("sigma", &all, Ends::Both, |x| c.sigma(x).abs() / (1.0 + x.powf(e.k + 1.0)));
    let b = s.ratio_check("dsigma", &all, Ends::Both, |x| {
        c.dsigma(x).abs() / (1.0 + x.powf(-theta) + x.powf(e.k))
    });
    let cc = s.ratio_check("sigma*dsigma", &all, Ends::Both, |x| {
        (c.sigma(x) * c.dsigma(x)).abs() / (1.0 + x.powf(2.0 * e.k + 1.0))
    });
    let mut out = combine("C2(i)", vec![a, b, cc]);
    if theta_req >= 0.5 - SLACK && out.status != CheckStatus::Violation {
        out.status = CheckStatus::Boundary;
        out.witness = Some(z[0]);
        out.note = format!("dsigma ~ z^-{theta_req:.3} near 0: needs theta = 1/2, outside (0, 1/2)");
    } else if out.note.is_empty() {
        out.note = format!("theta = {theta:.3}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{model_case, Custom, Exponents, Power};

    #[test]
    fn model_case_two_passes_everything() {
        let r = validate_assumptions(&model_case(2.0).unwrap(), 1e3, 200);
        for res in &r.results {
            assert_eq!(res.status, CheckStatus::Pass, "{res:?}");
        }
        assert!(r.all_pass());
    }

    #[test]
    fn model_case_one_is_boundary_for_theta() {
        let r = validate_assumptions(&model_case(1.0).unwrap(), 1e3, 200);
        assert!(r.group_passes("C1"), "{:?}", r.results);
        assert!(r.group_passes("C2weak"), "{:?}", r.results);
        assert_eq!(r.status("C2(i)"), Some(CheckStatus::Boundary));
    }

    #[test]
    fn model_case_three_passes() {
        let r = validate_assumptions(&model_case(3.0).unwrap(), 1e3, 200);
        assert!(r.all_pass(), "{:?}", r.results);
    }

    #[test]
    fn decreasing_phi_has_witness() {
        let c = Coefficients::new(
            "neg",
            Custom::new("-z", |z| -z),
            Power::new(1.0, 1.0),
            Exponents { m: 1.0, p: 4.0, k: 0.0, g: 0.0, theta: 0.25 },
        );
        let r = validate_assumptions(&c, 1e3, 100);
        let res = r.get("C1(i)").unwrap();
        assert_eq!(res.status, CheckStatus::Violation);
        assert!(res.witness.is_some());
    }

    #[test]
    fn fast_growing_sigma_violates_vii() {
        // φ = z, σ = z²: σ² outgrows Θ_2² = z².
        let c = Coefficients::new(
            "bad",
            Power::new(1.0, 1.0),
            Power::new(1.0, 2.0),
            Exponents { m: 1.0, p: 4.0, k: 0.0, g: 0.0, theta: 0.25 },
        );
        let r = validate_assumptions(&c, 1e3, 100);
        assert_eq!(r.status("C1(vii)"), Some(CheckStatus::Violation));
        assert_eq!(r.status("C2weak(i)"), Some(CheckStatus::Violation));
    }

    #[test]
    fn slow_porous_medium_breaks_second_derivative_bound() {
        // φ = z^{3/2}: φ̈ ~ z^{-1/2} at 0.
        let r = validate_assumptions(&model_case(1.5).unwrap(), 1e3, 100);
        assert_eq!(r.status("C2(ii)"), Some(CheckStatus::Violation));
        assert_eq!(r.status("C2weak(ii)"), Some(CheckStatus::Pass));
    }
}
