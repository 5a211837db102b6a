//! Path-level driver shared by the sweeps: the finite-difference solution,
//! its coupled Langevin limit and the per-path observables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schedule::ScalingSchedule;
use crate::analysis::{fluctuation_field, h_neg_norm, spacetime_norm, Dft, NormSpec};
use crate::coefficients::{Coefficients, Exponents};
use crate::error::{Error, Result};
use crate::noise::{sample_increments, ModeIncrements, NoiseModel};
use crate::ou::build_ou;
use crate::rng::{IncrementStream, Lane};
use crate::solver::{cfl_dt, is_path_failure, NonnegPolicy, PathState, Rho0Spec, SolverConfig, Stepper};
use crate::stats::pairwise_sum;

/// Discretisation and Monte-Carlo settings common to all sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub d: usize,
    pub n: usize,
    pub t_end: f64,
    pub rho0: Rho0Spec,
    /// Number of equal snapshot intervals on `[0, T]`.
    pub snapshots: usize,
    /// Fixed step; `None` picks the stability limit over the schedule.
    pub dt: Option<f64>,
    pub nonneg_policy: NonnegPolicy,
    pub sigma_floor: f64,
    pub seed: u64,
    pub paths: usize,
    pub workers: usize,
    /// Fourier cutoff of the limit equation; `None` means `N/2 − 1`.
    pub nv: Option<usize>,
    pub rejection_limit: f64,
}

impl RunSettings {
    pub fn new(d: usize, n: usize, t_end: f64, rho0: Rho0Spec) -> Self {
        Self {
            d,
            n,
            t_end,
            rho0,
            snapshots: 25,
            dt: None,
            nonneg_policy: NonnegPolicy::Clip,
            sigma_floor: 1e-6,
            seed: 0,
            paths: 100,
            workers: 1,
            nv: None,
            rejection_limit: 0.01,
        }
    }

    pub fn nv(&self) -> usize {
        self.nv.unwrap_or(self.n / 2 - 1)
    }

    pub(crate) fn solver_config(&self, epsilon: f64, dt: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.d, self.n, self.t_end, dt, epsilon, self.rho0.clone())
            .with_uniform_snapshots(self.snapshots);
        cfg.nonneg_policy = self.nonneg_policy;
        cfg.sigma_floor = self.sigma_floor;
        cfg
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::invalid("paths", "must be at least 1"));
        }
        if self.snapshots == 0 {
            return Err(Error::invalid("snapshots", "must be at least 1"));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::invalid("T", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.rejection_limit) {
            return Err(Error::invalid("rejection_limit", "must lie in [0, 1]"));
        }
        self.solver_config(0.0, self.t_end).validate()
    }
}

/// Run description written next to every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub coefficients: String,
    pub exponents: Exponents,
    pub d: usize,
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub snapshots: usize,
    pub paths: usize,
    pub seed: u64,
    pub nv: usize,
    pub rho0: String,
    pub nonneg_policy: NonnegPolicy,
    pub gamma: Option<f64>,
    pub floored_monotone: bool,
}

impl RunMeta {
    pub(crate) fn new(s: &RunSettings, c: &Coefficients, sched: &ScalingSchedule, dt: f64) -> Self {
        Self {
            coefficients: c.name.clone(),
            exponents: c.exponents,
            d: s.d,
            n: s.n,
            t_end: s.t_end,
            dt,
            steps: s.solver_config(0.0, dt).steps(),
            snapshots: s.snapshots,
            paths: s.paths,
            seed: s.seed,
            nv: s.nv(),
            rho0: describe_rho0(&s.rho0),
            nonneg_policy: s.nonneg_policy,
            gamma: sched.gamma,
            floored_monotone: sched.floored_monotone,
        }
    }
}

fn describe_rho0(r: &Rho0Spec) -> String {
    match r {
        Rho0Spec::Constant(v) => format!("constant({v})"),
        Rho0Spec::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
        Rho0Spec::Field(f) => format!("field(mean={})", f.mean()),
    }
}

/// Time step used for every row: the smallest stability limit over the
/// schedule (or the requested step, if it is stable), shrunk so that an
/// integer number of steps covers `[0, T]`.
pub fn pick_dt(s: &RunSettings, c: &Coefficients, sched: &ScalingSchedule) -> Result<f64> {
    let mut limit = f64::INFINITY;
    for row in &sched.rows {
        let cfg = s.solver_config(row.epsilon, 1.0);
        limit = limit.min(cfl_dt(&cfg, c, row.norms.f1, s.rho0.sup())?);
    }
    let dt = match s.dt {
        Some(dt) if dt > limit => {
            return Err(Error::invalid("dt", format!("{dt:e} exceeds the stability limit {limit:e}")));
        }
        Some(dt) if !(dt > 0.0) => return Err(Error::invalid("dt", "must be positive")),
        Some(dt) => dt,
        None => limit,
    };
    let steps = (s.t_end / dt * (1.0 - 1e-12)).ceil().max(1.0);
    Ok(s.t_end / steps)
}

/// Independent master seed for row `row` of a sweep.
pub(crate) fn row_seed(seed: u64, row: usize) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(row as u64 + 1))
}

/// What to measure along a path.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Observables {
    /// Coupling error norm against the limit equation with cutoff `nv`.
    pub coupling: Option<(NormSpec, usize)>,
    /// Exponent h of `∫₀ᵀ∫|v^ε|^h`.
    pub lh: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct PathRecord {
    pub rejected: bool,
    /// `‖v^ε − v‖_{L^τ H^{−β}}`.
    pub coupling: f64,
    pub lh: f64,
    /// Minimum of ρ over all cells and steps.
    pub min_rho: f64,
    pub max_mass_drift: f64,
    pub negativity_events: usize,
}

fn trapezoid(series: &[(f64, f64)]) -> f64 {
    let pieces: Vec<f64> = series.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).collect();
    pairwise_sum(&pieces)
}

/// Runs path `path` of `seed`. Fluctuation observables need ε > 0 and a
/// spatially constant initial datum, which is then the expansion point.
pub(crate) fn run_path(
    cfg: &SolverConfig,
    c: &Coefficients,
    model: &NoiseModel,
    obs: Observables,
    seed: u64,
    path: u64,
) -> Result<PathRecord> {
    let grid = cfg.grid()?;
    let rho0 = cfg.rho0.realize(grid, seed, path);
    let rho_bar = rho0.mean();
    let fluctuations = obs.coupling.is_some() || obs.lh.is_some();
    if fluctuations {
        if !(cfg.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "fluctuation observables need epsilon > 0"));
        }
        if rho0.max() - rho0.min() > 1e-12 * rho_bar {
            return Err(Error::invalid("rho0", "fluctuation observables need a spatially constant initial density"));
        }
    }
    let ou = match obs.coupling {
        Some((_, nv)) => Some(build_ou(c, rho_bar, model, nv)?),
        None => None,
    };
    let shared = ou.as_ref().map_or(0, |o| o.shared_count(model.cutoff()));
    let mut v = ou.as_ref().map(|o| o.zero_state()).unwrap_or_default();
    let dft = Dft::new(grid);
    let steps_at = cfg.snapshot_steps();
    let steps = cfg.steps();
    let dt = cfg.dt;

    let mut state = PathState::new(rho0);
    let mut stepper = Stepper::new(cfg, c, model)?;
    let mut stream = IncrementStream::new(seed, path, Lane::Increments);
    let mut fresh = IncrementStream::new(seed, path, Lane::Fresh);
    let mut zeros = ModeIncrements::zeros(cfg.d, model.mode_count(), dt);
    let mut rec = PathRecord { min_rho: state.rho.min(), ..Default::default() };
    let mut coupling_series = Vec::with_capacity(steps_at.len());
    let mut lh_series = Vec::with_capacity(steps_at.len());
    let mut next = 0usize;
    let mut last_fresh = 0usize;

    for j in 0..=steps {
        if j > 0 {
            let inc = if cfg.epsilon > 0.0 {
                sample_increments(model, dt, &mut stream, (j - 1) as u64)?
            } else {
                zeros.step = (j - 1) as u64;
                zeros.clone()
            };
            match stepper.step(&mut state, &inc) {
                Ok(()) => {}
                Err(e) if is_path_failure(&e) => {
                    rec.rejected = true;
                    rec.negativity_events = state.negativity_events;
                    return Ok(rec);
                }
                Err(e) => return Err(e),
            }
            if let Some(o) = &ou {
                o.step_modes(&mut v, &inc, dt, 0..shared)?;
            }
            rec.min_rho = rec.min_rho.min(state.rho.min());
            rec.max_mass_drift = rec.max_mass_drift.max(state.relative_mass_drift());
        }
        while next < steps_at.len() && steps_at[next] == j {
            let t = j as f64 * dt;
            if fluctuations {
                let fl = fluctuation_field(&state.rho, rho_bar, cfg.epsilon)?;
                if let (Some(o), Some((norm, _))) = (&ou, obs.coupling) {
                    o.advance_aggregated(&mut v, shared..o.mode_count(), j - last_fresh, dt, &mut fresh, next as u64);
                    last_fresh = j;
                    let diff = dft.forward(&fl)?.sub(&o.to_spectral(&v))?;
                    coupling_series.push((t, h_neg_norm(&diff, norm.beta)));
                }
                if let Some(h) = obs.lh {
                    lh_series.push((t, fl.map(|x| x.abs().powf(h)).integral()));
                }
            }
            next += 1;
        }
    }
    if let Some((norm, _)) = obs.coupling {
        rec.coupling = spacetime_norm(&coupling_series, norm.tau)?;
    }
    if obs.lh.is_some() {
        rec.lh = trapezoid(&lh_series);
    }
    rec.negativity_events = state.negativity_events;
    Ok(rec)
}

/// Evaluates `f(0..count)` on `workers` threads; results keep index order,
/// so outputs do not depend on the worker count.
pub(crate) fn par_map<T, F>(workers: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}

/// All paths of one row, with the rejection limit enforced.
pub(crate) fn run_row(
    s: &RunSettings,
    c: &Coefficients,
    model: &NoiseModel,
    cfg: &SolverConfig,
    obs: Observables,
    seed: u64,
) -> Result<Vec<PathRecord>> {
    let recs = par_map(s.workers, s.paths, |p| run_path(cfg, c, model, obs, seed, p as u64))?;
    let rejected = recs.iter().filter(|r| r.rejected).count();
    let fraction = rejected as f64 / s.paths as f64;
    if fraction > s.rejection_limit {
        return Err(Error::TooManyRejections { epsilon: cfg.epsilon, fraction, limit: s.rejection_limit });
    }
    Ok(recs)
}
