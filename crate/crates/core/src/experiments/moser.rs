use serde::{Deserialize, Serialize};

use super::bounds::{fit_moser_ln_r, moser_bound, moser_r, moser_series, moser_zeta};
use super::runner::{pick_dt, row_seed, run_row, Observables, RunMeta, RunSettings};
use super::schedule::ScalingSchedule;
use crate::coefficients::Coefficients;
use crate::error::{Error, Result};
use crate::noise::build_basis;
use crate::solver::Rho0Spec;
use crate::stats::Proportion;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoserSpec {
    /// Lower bound ℓ of the initial density.
    pub low: f64,
    /// Margin δ ∈ (0, ℓ); paths count when `min ρ < ℓ − δ`.
    pub delta: f64,
    /// `inf φ̇`; estimated on a log grid when absent.
    pub inf_dphi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoserRow {
    pub epsilon: f64,
    pub cutoff: usize,
    pub f1: f64,
    pub f3: f64,
    pub paths: usize,
    pub rejected: usize,
    pub tail: Proportion,
    pub r_eps: f64,
    pub ln_r: f64,
    pub zeta: f64,
    pub bound: f64,
    pub series_terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoserReport {
    pub meta: RunMeta,
    pub low: f64,
    pub delta: f64,
    pub inf_dphi: f64,
    /// Fitted constant of `R_ε`, so the bound is tight at the largest ε.
    pub c0: f64,
    pub ln_c0: f64,
    pub rows: Vec<MoserRow>,
}

/// `min φ̇` over `z ∈ [1e-8, 1e8]` (400 log points).
pub fn estimate_inf_dphi(c: &Coefficients) -> f64 {
    (0..400)
        .map(|i| c.dphi(10f64.powf(-8.0 + 16.0 * i as f64 / 399.0)))
        .fold(f64::INFINITY, f64::min)
}

fn rho0_min(r: &Rho0Spec) -> f64 {
    match r {
        Rho0Spec::Constant(v) => *v,
        Rho0Spec::Uniform { lo, .. } => *lo,
        Rho0Spec::Field(f) => f.min(),
    }
}

/// Probability that a path started above ℓ dips below `ℓ − δ`, against the
/// iterated lower-bound estimate.
pub fn moser_experiment(c: &Coefficients, sched: &ScalingSchedule, s: &RunSettings, spec: MoserSpec) -> Result<MoserReport> {
    s.validate()?;
    if !(spec.low > 0.0 && spec.delta > 0.0 && spec.delta < spec.low) {
        return Err(Error::invalid("delta", "need 0 < delta < low"));
    }
    if rho0_min(&s.rho0) < spec.low {
        return Err(Error::invalid("rho0", format!("initial density must be at least low = {}", spec.low)));
    }
    let inf_dphi = spec.inf_dphi.unwrap_or_else(|| estimate_inf_dphi(c));
    if !(inf_dphi > 0.0 && inf_dphi.is_finite()) {
        return Err(Error::invalid(
            "phi",
            format!("needs inf dphi > 0 (got {inf_dphi:e}); use smoothed or nondegenerate coefficients"),
        ));
    }
    let dt = pick_dt(s, c, sched)?;
    let threshold = spec.low - spec.delta;
    let mut rows = Vec::with_capacity(sched.rows.len());
    for (i, row) in sched.rows.iter().enumerate() {
        let model = build_basis(s.d, row.cutoff, s.n)?;
        let cfg = s.solver_config(row.epsilon, dt);
        let recs = run_row(s, c, &model, &cfg, Observables::default(), row_seed(s.seed, i))?;
        let accepted: Vec<f64> = recs.iter().filter(|r| !r.rejected).map(|r| r.min_rho).collect();
        let hits = accepted.iter().filter(|&&m| m < threshold).count();
        rows.push(MoserRow {
            epsilon: row.epsilon,
            cutoff: row.cutoff,
            f1: row.norms.f1,
            f3: row.norms.f3,
            paths: s.paths,
            rejected: s.paths - accepted.len(),
            tail: Proportion::wilson(hits, accepted.len()),
            r_eps: f64::NAN,
            ln_r: f64::NAN,
            zeta: f64::NAN,
            bound: f64::NAN,
            series_terms: 0,
        });
    }
    let base = |r: &MoserRow| moser_r(1.0, inf_dphi, r.epsilon, crate::noise::StructureNorms { f1: r.f1, f2: 0.0, f3: r.f3 });
    let anchor = rows
        .iter()
        .max_by(|a, b| a.epsilon.total_cmp(&b.epsilon))
        .expect("schedule has rows");
    let ln_c0 = if anchor.tail.estimate > 0.0 && base(anchor) > 0.0 {
        fit_moser_ln_r(s.d, spec.low, spec.delta, anchor.tail.estimate)? - base(anchor).ln()
    } else {
        f64::NEG_INFINITY
    };
    for r in &mut rows {
        let ln_r = ln_c0 + base(r).ln();
        r.ln_r = ln_r;
        r.r_eps = ln_r.exp();
        r.zeta = moser_zeta(s.d, ln_r >= 0.0);
        let series = moser_series(s.d, ln_r);
        r.series_terms = series.terms;
        r.bound = moser_bound(s.d, spec.low, spec.delta, ln_r);
    }
    Ok(MoserReport {
        meta: RunMeta::new(s, c, sched, dt),
        low: spec.low,
        delta: spec.delta,
        inf_dphi,
        c0: ln_c0.exp(),
        ln_c0,
        rows,
    })
}
