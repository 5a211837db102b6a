use serde::{Deserialize, Serialize};

use super::bounds::{fit_rate_constant, rate_leading, rate_tail};
use super::runner::{pick_dt, row_seed, run_row, Observables, RunMeta, RunSettings};
use super::schedule::ScalingSchedule;
use crate::analysis::NormSpec;
use crate::coefficients::Coefficients;
use crate::error::{Error, Result};
use crate::noise::build_basis;
use crate::stats::{MeanEstimate, Proportion};

#[derive(Clone, Debug, PartialEq)]
pub struct CltSpec {
    pub norm: NormSpec,
    /// Levels `a` of the exceedance probabilities `P(‖v^ε − v‖ > a)`.
    pub thresholds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltRow {
    pub epsilon: f64,
    pub cutoff: usize,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub paths: usize,
    pub rejected: usize,
    /// `E‖v^ε − v‖²` over accepted paths.
    pub mean_sq_err: MeanEstimate,
    pub leading: f64,
    pub tail: f64,
    pub bound: f64,
    pub ratio: f64,
    pub exceed: Vec<Proportion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub meta: RunMeta,
    pub norm: NormSpec,
    pub thresholds: Vec<f64>,
    /// Constant of the rate bound, fitted so the first row is tight.
    pub rate_constant: f64,
    pub rows: Vec<CltRow>,
}

/// Coupling error between the finite-difference fluctuation field and the
/// limit equation, one row per schedule entry.
pub fn clt_experiment(c: &Coefficients, sched: &ScalingSchedule, s: &RunSettings, spec: &CltSpec) -> Result<CltReport> {
    s.validate()?;
    if sched.d != s.d {
        return Err(Error::invalid("schedule", "dimension differs from the run settings"));
    }
    if spec.thresholds.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::invalid("thresholds", "must be positive"));
    }
    let dt = pick_dt(s, c, sched)?;
    let nv = s.nv();
    let obs = Observables { coupling: Some((spec.norm, nv)), lh: None };
    let mut rows = Vec::with_capacity(sched.rows.len());
    for (i, row) in sched.rows.iter().enumerate() {
        let model = build_basis(s.d, row.cutoff, s.n)?;
        let cfg = s.solver_config(row.epsilon, dt);
        let recs = run_row(s, c, &model, &cfg, obs, row_seed(s.seed, i))?;
        let errs: Vec<f64> = recs.iter().filter(|r| !r.rejected).map(|r| r.coupling).collect();
        let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
        let exceed = spec
            .thresholds
            .iter()
            .map(|&a| Proportion::wilson(errs.iter().filter(|&&e| e > a).count(), errs.len()))
            .collect();
        rows.push(CltRow {
            epsilon: row.epsilon,
            cutoff: row.cutoff,
            f1: row.norms.f1,
            f2: row.norms.f2,
            f3: row.norms.f3,
            paths: s.paths,
            rejected: s.paths - errs.len(),
            mean_sq_err: MeanEstimate::from_samples(&sq),
            leading: rate_leading(s.d, row.epsilon, row.norms, &c.exponents, &s.rho0),
            tail: rate_tail(&model, nv, spec.norm, s.t_end),
            bound: f64::NAN,
            ratio: f64::NAN,
            exceed,
        });
    }
    let first = &rows[0];
    let rate_constant = fit_rate_constant(first.mean_sq_err.mean, first.leading, first.tail)?;
    for r in &mut rows {
        r.bound = rate_constant * (r.leading + r.tail);
        r.ratio = r.mean_sq_err.mean / r.bound;
    }
    Ok(CltReport {
        meta: RunMeta::new(s, c, sched, dt),
        norm: spec.norm,
        thresholds: spec.thresholds.clone(),
        rate_constant,
        rows,
    })
}
