//! Conservative explicit Euler–Maruyama scheme for
//!
//! ```text
//! dρ = Δφ(ρ) dt − ∇·ν(ρ) dt − √ε ∇·(σ(ρ) dξ^ε) + (ε/2) ∇·(F1 σ̇(ρ)² ∇ρ + σ̇(ρ)σ(ρ) F2) dt
//! ```
//!
//! Every term is written as a flux through the cell faces `c + ½e_a`, and the
//! update subtracts the discrete divergence of the total flux, so the grid
//! mass `Σ ρ dx^d` telescopes exactly.
//!
//! Face fluxes, with `c⁺ = c + e_a`:
//!
//! * diffusion: `−(φ(ρ_{c⁺}) − φ(ρ_c)) / dx`
//! * drift: `½(ν_a(ρ_c) + ν_a(ρ_{c⁺}))`
//! * noise: `√ε · ½(q_c + q_{c⁺})` with `q = σ(ρ⁺) Σ_k f_k ΔB_k^a`
//! * correction: `−(ε/2) · ½(w_c + w_{c⁺})` with
//!   `w = F1 σ̇(ρ⁺)² (ρ_{c+e} − ρ_{c−e}) / (2dx) + σ̇(ρ⁺)σ(ρ⁺) F2_a`
//!
//! The noise flux averaged to faces has the centred difference as its
//! divergence, so its discrete quadratic variation generates the wide
//! (2dx) Laplacian; the correction uses the same wide stencil, which keeps
//! the discrete Itô balance exact for spatially constant σ̇.
//! `σ̇` is evaluated at `max(ρ, sigma_floor)` so that `σ(z) = √z` stays usable.

use serde::{Deserialize, Serialize};

use crate::coefficients::Coefficients;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::noise::{sample_increments, ModeIncrements, NoiseModel};
use crate::rng::{IncrementStream, Lane};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonnegPolicy {
    /// Set negative cells to zero, then rescale to restore the mass.
    Clip,
    /// Abort the path on the first negative cell.
    Reject,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rho0Spec {
    Constant(f64),
    /// A random constant, uniform on `[lo, hi]`, drawn once per path.
    Uniform { lo: f64, hi: f64 },
    Field(GridField),
}

impl Rho0Spec {
    /// Initial field of `path`.
    pub fn realize(&self, grid: Grid, seed: u64, path: u64) -> GridField {
        match self {
            Rho0Spec::Constant(v) => GridField::constant(grid, *v),
            Rho0Spec::Uniform { lo, hi } => {
                let u = IncrementStream::new(seed, path, Lane::Initial).uniform(0);
                GridField::constant(grid, lo + (hi - lo) * u)
            }
            Rho0Spec::Field(f) => f.clone(),
        }
    }

    /// Largest value the initial data can take.
    pub fn sup(&self) -> f64 {
        match self {
            Rho0Spec::Constant(v) => *v,
            Rho0Spec::Uniform { hi, .. } => *hi,
            Rho0Spec::Field(f) => f.max(),
        }
    }

    /// `E[ρ₀^q]` for a spatially constant datum, `∫ρ₀^q` otherwise.
    pub fn moment(&self, q: f64) -> f64 {
        match self {
            Rho0Spec::Constant(v) => v.powf(q),
            Rho0Spec::Uniform { lo, hi } => {
                if hi == lo {
                    lo.powf(q)
                } else {
                    (hi.powf(q + 1.0) - lo.powf(q + 1.0)) / ((q + 1.0) * (hi - lo))
                }
            }
            Rho0Spec::Field(f) => f.map(|v| v.abs().powf(q)).integral(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Rho0Spec::Constant(v) => *v > 0.0 && v.is_finite(),
            Rho0Spec::Uniform { lo, hi } => *lo > 0.0 && hi >= lo && hi.is_finite(),
            Rho0Spec::Field(f) => f.min() > 0.0 && f.max().is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("rho0", "initial density must be positive and finite"))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub d: usize,
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub snapshot_times: Vec<f64>,
    pub nonneg_policy: NonnegPolicy,
    pub rho0: Rho0Spec,
    pub sigma_floor: f64,
}

impl SolverConfig {
    pub fn new(d: usize, n: usize, t_end: f64, dt: f64, epsilon: f64, rho0: Rho0Spec) -> Self {
        Self {
            d,
            n,
            t_end,
            dt,
            epsilon,
            snapshot_times: vec![0.0, t_end],
            nonneg_policy: NonnegPolicy::Clip,
            rho0,
            sigma_floor: 1e-6,
        }
    }

    /// `count + 1` equally spaced snapshots on `[0, T]`.
    pub fn with_uniform_snapshots(mut self, count: usize) -> Self {
        let count = count.max(1);
        self.snapshot_times = (0..=count).map(|i| self.t_end * i as f64 / count as f64).collect();
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.d, self.n)
    }

    /// Number of time steps covering `[0, T]`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt * (1.0 - 1e-12)).ceil().max(0.0) as usize
    }

    /// Step index of each snapshot (nearest step).
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let steps = self.steps();
        self.snapshot_times
            .iter()
            .map(|t| ((t / self.dt).round() as usize).min(steps))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("T", format!("must be nonnegative, got {}", self.t_end)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", format!("must be nonnegative, got {}", self.epsilon)));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::invalid("sigma_floor", "must be positive"));
        }
        if self.snapshot_times.is_empty() {
            return Err(Error::invalid("snapshot_times", "at least one snapshot is required"));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("snapshot_times", "must be sorted"));
        }
        if self.snapshot_times.iter().any(|&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(Error::invalid("snapshot_times", "must lie in [0, T]"));
        }
        self.rho0.validate()
    }
}

/// Diffusive (and, with drift, advective) stability limit for `dx = 1/N`.
///
/// The diffusivity `φ̇(z) + (ε/2)‖F1‖σ̇(z)²` is maximised over a log grid of
/// `z ∈ [max(floor, 10⁻³ρ_max), 2ρ_max]`.
pub fn cfl_dt(cfg: &SolverConfig, c: &Coefficients, f1_sup: f64, rho_max_est: f64) -> Result<f64> {
    if !(rho_max_est > 0.0) {
        return Err(Error::invalid("rho_max_est", format!("must be positive, got {rho_max_est}")));
    }
    const POINTS: usize = 400;
    let dx = 1.0 / cfg.n as f64;
    let hi = 2.0 * rho_max_est;
    let lo = cfg.sigma_floor.max(1e-3 * rho_max_est).min(hi);
    let mut diff = 0.0f64;
    let mut adv = 0.0f64;
    for i in 0..POINTS {
        let z = lo * (hi / lo).powf(i as f64 / (POINTS - 1) as f64);
        let ds = c.dsigma(z.max(cfg.sigma_floor));
        diff = diff.max(c.dphi(z) + 0.5 * cfg.epsilon * f1_sup * ds * ds);
        adv = adv.max((0..cfg.d).map(|a| c.dnu(a, z).abs()).sum::<f64>());
    }
    if !(diff > 0.0 && diff.is_finite()) {
        return Err(Error::invalid("coefficients", format!("effective diffusivity {diff} is not positive")));
    }
    let mut dt = 0.2 * dx * dx / diff;
    if c.has_drift() && adv > 0.0 {
        dt = dt.min(0.1 * dx / adv);
    }
    Ok(dt)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathState {
    pub rho: GridField,
    pub t: f64,
    pub step: usize,
    pub mass0: f64,
    pub negativity_events: usize,
}

impl PathState {
    pub fn new(rho: GridField) -> Self {
        let mass0 = rho.integral();
        Self { rho, t: 0.0, step: 0, mass0, negativity_events: 0 }
    }

    pub fn relative_mass_drift(&self) -> f64 {
        (self.rho.integral() - self.mass0).abs() / self.mass0.abs().max(f64::MIN_POSITIVE)
    }
}

/// Reusable scratch space for [`step`].
pub struct Stepper<'a> {
    cfg: &'a SolverConfig,
    c: &'a Coefficients,
    model: &'a NoiseModel,
    grid: Grid,
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
    phi: Vec<f64>,
    sig: Vec<f64>,
    dsig: Vec<f64>,
    nu: Vec<Vec<f64>>,
    eta: Vec<Vec<f64>>,
    w: Vec<f64>,
    q: Vec<f64>,
    flux: Vec<f64>,
    delta: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a SolverConfig, c: &'a Coefficients, model: &'a NoiseModel) -> Result<Self> {
        let grid = cfg.grid()?;
        if grid != model.grid() {
            return Err(Error::GridMismatch(format!(
                "solver grid d = {}, N = {} but noise grid d = {}, N = {}",
                grid.dim(),
                grid.n(),
                model.dim(),
                model.grid().n()
            )));
        }
        let cells = grid.len();
        let d = grid.dim();
        let plus = (0..d).map(|a| (0..cells).map(|i| grid.neighbor(i, a, 1)).collect()).collect();
        let minus = (0..d).map(|a| (0..cells).map(|i| grid.neighbor(i, a, -1)).collect()).collect();
        Ok(Self {
            cfg,
            c,
            model,
            grid,
            plus,
            minus,
            phi: vec![0.0; cells],
            sig: vec![0.0; cells],
            dsig: vec![0.0; cells],
            nu: vec![vec![0.0; cells]; if c.has_drift() { d } else { 0 }],
            eta: vec![vec![0.0; cells]; d],
            w: vec![0.0; cells],
            q: vec![0.0; cells],
            flux: vec![0.0; cells],
            delta: vec![0.0; cells],
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Advances `state` by one step of size `cfg.dt` with increments `inc`.
    pub fn step(&mut self, state: &mut PathState, inc: &ModeIncrements) -> Result<()> {
        state.rho.ensure_same_grid(&self.grid)?;
        let cfg = self.cfg;
        let c = self.c;
        let d = self.grid.dim();
        let cells = self.grid.len();
        let dx = self.grid.dx();
        let dt = cfg.dt;
        let eps = cfg.epsilon;
        let noisy = eps > 0.0;
        let rho = state.rho.as_slice();

        for i in 0..cells {
            let r = rho[i];
            let rp = r.max(0.0);
            self.phi[i] = c.phi(r);
            if noisy {
                self.sig[i] = c.sigma(rp);
                self.dsig[i] = c.dsigma(rp.max(cfg.sigma_floor));
            }
        }
        for (a, nu) in self.nu.iter_mut().enumerate() {
            for i in 0..cells {
                nu[i] = c.nu(a, rho[i]);
            }
        }
        if noisy {
            self.model.realization_into(inc, &mut self.eta)?;
        }

        let sums = self.model.structure_sums();
        let f1 = sums.f1.as_slice();
        let sqrt_eps = eps.sqrt();
        let half_corr = 0.5 * eps * dt;
        self.delta.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..d {
            let plus = &self.plus[a];
            let minus = &self.minus[a];
            let f2 = sums.f2[a].as_slice();
            if noisy {
                let eta = &self.eta[a];
                for i in 0..cells {
                    let g = (rho[plus[i]] - rho[minus[i]]) / (2.0 * dx);
                    let ds = self.dsig[i];
                    self.w[i] = f1[i] * ds * ds * g + ds * self.sig[i] * f2[i];
                    self.q[i] = self.sig[i] * eta[i];
                }
            }
            for i in 0..cells {
                let p = plus[i];
                let mut phi_face = -dt * (self.phi[p] - self.phi[i]) / dx;
                if let Some(nu) = self.nu.get(a) {
                    phi_face += dt * 0.5 * (nu[i] + nu[p]);
                }
                if noisy {
                    phi_face += sqrt_eps * 0.5 * (self.q[i] + self.q[p]) - half_corr * 0.5 * (self.w[i] + self.w[p]);
                }
                self.flux[i] = phi_face;
            }
            for i in 0..cells {
                self.delta[i] -= (self.flux[i] - self.flux[minus[i]]) / dx;
            }
        }

        let rho = state.rho.as_mut_slice();
        let mut min = f64::INFINITY;
        for (r, dr) in rho.iter_mut().zip(&self.delta) {
            *r += dr;
            min = min.min(*r);
        }
        state.step += 1;
        state.t = state.step as f64 * dt;
        if !min.is_finite() || rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: state.step,
                time: state.t,
                detail: "density is NaN or infinite".into(),
            });
        }
        if min < 0.0 {
            state.negativity_events += 1;
            match cfg.nonneg_policy {
                NonnegPolicy::Reject => return Err(Error::NegativeDensity { step: state.step, value: min }),
                NonnegPolicy::Clip => clip_preserving_mass(rho),
            }
        }
        Ok(())
    }
}

/// Zeroes negative cells and rescales so that the sum is unchanged.
fn clip_preserving_mass(rho: &mut [f64]) {
    let before: f64 = crate::stats::pairwise_sum(rho);
    rho.iter_mut().for_each(|v| *v = v.max(0.0));
    let after: f64 = crate::stats::pairwise_sum(rho);
    if after > 0.0 && before > 0.0 {
        let s = before / after;
        rho.iter_mut().for_each(|v| *v *= s);
    }
}

/// One step with freshly allocated scratch; see [`Stepper`] for loops.
pub fn step(
    state: &mut PathState,
    cfg: &SolverConfig,
    c: &Coefficients,
    model: &NoiseModel,
    inc: &ModeIncrements,
) -> Result<()> {
    Stepper::new(cfg, c, model)?.step(state, inc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub step: usize,
    pub time: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Actual snapshot times (multiples of dt).
    pub times: Vec<f64>,
    pub snapshots: Vec<GridField>,
    pub dt: f64,
    pub steps: usize,
    pub mass0: f64,
    pub max_mass_drift: f64,
    pub min_rho: f64,
    pub negativity_events: usize,
    /// Set when the path was aborted; snapshots then stop early.
    pub rejection: Option<Rejection>,
}

/// Tracks snapshots and diagnostics along a path.
pub(crate) struct Recorder {
    pub(crate) steps_at: Vec<usize>,
    next: usize,
    pub(crate) traj: Trajectory,
}

impl Recorder {
    pub(crate) fn new(cfg: &SolverConfig, mass0: f64) -> Self {
        Self {
            steps_at: cfg.snapshot_steps(),
            next: 0,
            traj: Trajectory {
                times: Vec::new(),
                snapshots: Vec::new(),
                dt: cfg.dt,
                steps: cfg.steps(),
                mass0,
                max_mass_drift: 0.0,
                min_rho: f64::INFINITY,
                negativity_events: 0,
                rejection: None,
            },
        }
    }

    /// Records the state after step `state.step`; returns the number of new
    /// snapshots taken.
    pub(crate) fn observe(&mut self, state: &PathState) -> usize {
        let t = &mut self.traj;
        t.max_mass_drift = t.max_mass_drift.max(state.relative_mass_drift());
        t.min_rho = t.min_rho.min(state.rho.min());
        t.negativity_events = state.negativity_events;
        let mut taken = 0;
        while self.next < self.steps_at.len() && self.steps_at[self.next] == state.step {
            t.times.push(state.step as f64 * t.dt);
            t.snapshots.push(state.rho.clone());
            self.next += 1;
            taken += 1;
        }
        taken
    }

    pub(crate) fn reject(&mut self, state: &PathState, err: &Error) {
        self.traj.negativity_events = state.negativity_events;
        self.traj.rejection = Some(Rejection { step: state.step, time: state.t, reason: err.to_string() });
    }
}

/// True for step failures that reject a path rather than abort a run.
pub(crate) fn is_path_failure(err: &Error) -> bool {
    matches!(err, Error::NonFinite { .. } | Error::NegativeDensity { .. })
}

/// Path 0 of [`simulate_path_indexed`].
pub fn simulate_path(cfg: &SolverConfig, c: &Coefficients, model: &NoiseModel, seed: u64) -> Result<Trajectory> {
    simulate_path_indexed(cfg, c, model, seed, 0)
}

/// Runs one path; the result is a pure function of the arguments.
pub fn simulate_path_indexed(
    cfg: &SolverConfig,
    c: &Coefficients,
    model: &NoiseModel,
    seed: u64,
    path: u64,
) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut state = PathState::new(cfg.rho0.realize(grid, seed, path));
    let mut stepper = Stepper::new(cfg, c, model)?;
    let mut rec = Recorder::new(cfg, state.mass0);
    let mut stream = IncrementStream::new(seed, path, Lane::Increments);
    let mut zeros = ModeIncrements::zeros(cfg.d, model.mode_count(), cfg.dt);
    rec.observe(&state);
    for j in 0..rec.traj.steps {
        let inc = if cfg.epsilon > 0.0 {
            sample_increments(model, cfg.dt, &mut stream, j as u64)?
        } else {
            zeros.step = j as u64;
            zeros.clone()
        };
        match stepper.step(&mut state, &inc) {
            Ok(()) => {
                rec.observe(&state);
            }
            Err(e) if is_path_failure(&e) => {
                rec.reject(&state, &e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rec.traj)
}
