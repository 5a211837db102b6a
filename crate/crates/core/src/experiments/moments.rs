use serde::{Deserialize, Serialize};

use super::bounds::{moment_h_range, moment_scale};
use super::runner::{pick_dt, row_seed, run_row, Observables, RunMeta, RunSettings};
use super::schedule::ScalingSchedule;
use crate::coefficients::Coefficients;
use crate::error::{Error, Result};
use crate::noise::build_basis;
use crate::stats::MeanEstimate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub epsilon: f64,
    pub cutoff: usize,
    pub f1: f64,
    pub f3: f64,
    pub paths: usize,
    pub rejected: usize,
    /// `E ∫₀ᵀ∫ |v^ε|^h`.
    pub mean_lh: MeanEstimate,
    pub scale: f64,
    /// `mean_lh / scale`; NaN when the noise has no gradient (`F3 = 0`).
    pub ratio: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub meta: RunMeta,
    pub h: f64,
    pub rows: Vec<MomentRow>,
}

/// Empirical `L^h` moments of the fluctuation field against their
/// predicted scale.
pub fn moment_experiment(c: &Coefficients, sched: &ScalingSchedule, s: &RunSettings, h: f64) -> Result<MomentReport> {
    s.validate()?;
    let (lo, hi) = moment_h_range(&c.exponents);
    if !(h >= lo && h <= hi) {
        return Err(Error::invalid("h", format!("must lie in [{lo}, {hi}] for these exponents, got {h}")));
    }
    let dt = pick_dt(s, c, sched)?;
    let obs = Observables { coupling: None, lh: Some(h) };
    let mut rows = Vec::with_capacity(sched.rows.len());
    for (i, row) in sched.rows.iter().enumerate() {
        let model = build_basis(s.d, row.cutoff, s.n)?;
        let cfg = s.solver_config(row.epsilon, dt);
        let recs = run_row(s, c, &model, &cfg, obs, row_seed(s.seed, i))?;
        let vals: Vec<f64> = recs.iter().filter(|r| !r.rejected).map(|r| r.lh).collect();
        let mean_lh = MeanEstimate::from_samples(&vals);
        let scale = moment_scale(s.d, row.epsilon, h, row.norms, &c.exponents, &s.rho0);
        let degenerate = !(scale > 0.0);
        rows.push(MomentRow {
            epsilon: row.epsilon,
            cutoff: row.cutoff,
            f1: row.norms.f1,
            f3: row.norms.f3,
            paths: s.paths,
            rejected: s.paths - vals.len(),
            mean_lh,
            scale,
            ratio: if degenerate { f64::NAN } else { mean_lh.mean / scale },
            degenerate,
        });
    }
    Ok(MomentReport { meta: RunMeta::new(s, c, sched, dt), h, rows })
}
