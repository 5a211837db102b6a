//! TOML run configuration with dotted-key overrides.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use fluctuon::coefficients::{model_case, smooth_near_zero, Coefficients};
use fluctuon::experiments::{fixed_schedule, make_schedule, RunSettings, ScalingSchedule};
use fluctuon::{NonnegPolicy, NormSpec, Rho0Spec, Tau};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// φ = z^m, σ = z^{m/2}.
    Power,
    /// φ = κz, σ = z^a.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientSection {
    pub family: Family,
    pub m: f64,
    pub kappa: f64,
    pub sigma_exponent: f64,
    /// Replace the coefficients on `[0, eta]` by the C² extension.
    pub smooth_eta: Option<f64>,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        Self { family: Family::Power, m: 2.0, kappa: 1.0, sigma_exponent: 1.0, smooth_eta: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub d: usize,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { d: 1, n: 128 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub t_end: f64,
    pub dt: Option<f64>,
    pub snapshots: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { t_end: 0.25, dt: None, snapshots: 25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub rho0: f64,
    /// Upper end of a uniformly random constant `[rho0, rho0_hi]`.
    pub rho0_hi: Option<f64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { rho0: 1.0, rho0_hi: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub epsilon: Vec<f64>,
    pub gamma: f64,
    /// Explicit cutoffs; skips the regime check.
    pub cutoffs: Option<Vec<usize>>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { epsilon: vec![1e-2, 1e-3, 1e-4], gamma: 0.125, cutoffs: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormSection {
    pub beta: f64,
    #[serde(deserialize_with = "tau_any")]
    pub tau: Tau,
    pub thresholds: Vec<f64>,
}

/// Accepts `"2"`, `"inf"`, `2` and `inf` (a bare TOML float).
fn tau_any<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Tau, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Text(String),
        Int(i64),
        Float(f64),
    }
    let text = match Repr::deserialize(d)? {
        Repr::Text(s) => s,
        Repr::Int(i) => i.to_string(),
        Repr::Float(f) if f == f64::INFINITY => "inf".into(),
        Repr::Float(f) => f.to_string(),
    };
    text.parse().map_err(serde::de::Error::custom)
}

impl Default for NormSection {
    fn default() -> Self {
        Self { beta: 1.0, tau: Tau::Two, thresholds: vec![0.5, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentSection {
    pub h: f64,
}

impl Default for MomentSection {
    fn default() -> Self {
        Self { h: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoserSection {
    pub low: f64,
    pub delta: f64,
}

impl Default for MoserSection {
    fn default() -> Self {
        Self { low: 1.0, delta: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub paths: usize,
    pub seed: u64,
    pub rejection_limit: f64,
    pub nonneg_policy: NonnegPolicy,
    pub sigma_floor: f64,
    pub nv: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            paths: 100,
            seed: 0,
            rejection_limit: 0.01,
            nonneg_policy: NonnegPolicy::Clip,
            sigma_floor: 1e-6,
            nv: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub epsilon: f64,
    pub cutoff: usize,
    pub path: u64,
    /// Also dump DFT snapshots.
    pub spectral: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { epsilon: 1e-3, cutoff: 4, path: 0, spectral: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub z_max: f64,
    pub samples: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { z_max: 1e3, samples: 400 }
    }
}

/// Everything that determines a run's numbers. Worker count and output
/// directory are command-line only, so they never change the hash.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub coefficients: CoefficientSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    pub schedule: ScheduleSection,
    pub norm: NormSection,
    pub moments: MomentSection,
    pub moser: MoserSection,
    pub run: RunSection,
    pub simulate: SimulateSection,
    pub validate: ValidateSection,
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Applies `section.key=value` to `table`.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not of the form key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key {key:?} is malformed");
    }
    let (last, sections) = parts.split_last().expect("nonempty");
    let mut cur = table;
    for s in sections {
        let entry = cur.entry(s.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| anyhow!("override key {key:?}: `{s}` is not a section"))?;
    }
    cur.insert(last.to_string(), parse_value(value.trim()));
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.norm_spec()?;
        self.schedule()?;
        self.coefficients()?;
        self.settings(1).solver_check()?;
        if self.norm.thresholds.iter().any(|a| !(*a > 0.0)) {
            bail!("norm.thresholds: levels must be positive");
        }
        if let Some(hi) = self.initial.rho0_hi {
            if !(hi >= self.initial.rho0) {
                bail!("initial.rho0_hi must be at least initial.rho0");
            }
        }
        Ok(())
    }

    pub fn norm_spec(&self) -> Result<NormSpec> {
        NormSpec::new(self.grid.d, self.norm.beta, self.norm.tau).context("norm")
    }

    pub fn schedule(&self) -> Result<ScalingSchedule> {
        let s = &self.schedule;
        match &s.cutoffs {
            Some(cut) => {
                if cut.len() != s.epsilon.len() {
                    bail!("schedule.cutoffs needs one entry per schedule.epsilon");
                }
                let pairs: Vec<(f64, usize)> = s.epsilon.iter().copied().zip(cut.iter().copied()).collect();
                fixed_schedule(self.grid.d, &pairs).context("schedule")
            }
            None => make_schedule(self.grid.d, &s.epsilon, s.gamma).context("schedule"),
        }
    }

    pub fn coefficients(&self) -> Result<Coefficients> {
        let c = &self.coefficients;
        let base = match c.family {
            Family::Power => model_case(c.m),
            Family::Linear => Coefficients::linear(c.kappa, c.sigma_exponent),
        }
        .context("coefficients")?;
        match c.smooth_eta {
            Some(eta) => Ok(smooth_near_zero(&base, eta).context("coefficients.smooth_eta")?.smoothed),
            None => Ok(base),
        }
    }

    pub fn rho0(&self) -> Rho0Spec {
        match self.initial.rho0_hi {
            Some(hi) if hi > self.initial.rho0 => Rho0Spec::Uniform { lo: self.initial.rho0, hi },
            _ => Rho0Spec::Constant(self.initial.rho0),
        }
    }

    pub fn settings(&self, workers: usize) -> Settings {
        let mut s = RunSettings::new(self.grid.d, self.grid.n, self.time.t_end, self.rho0());
        s.snapshots = self.time.snapshots;
        s.dt = self.time.dt;
        s.nonneg_policy = self.run.nonneg_policy;
        s.sigma_floor = self.run.sigma_floor;
        s.seed = self.run.seed;
        s.paths = self.run.paths;
        s.workers = workers;
        s.nv = self.run.nv;
        s.rejection_limit = self.run.rejection_limit;
        Settings(s)
    }
}

/// Run settings with a validity check that reports config keys.
pub struct Settings(pub RunSettings);

impl Settings {
    fn solver_check(&self) -> Result<()> {
        let s = &self.0;
        if s.paths == 0 {
            bail!("run.paths must be at least 1");
        }
        if s.snapshots == 0 {
            bail!("time.snapshots must be at least 1");
        }
        if !(s.t_end > 0.0) {
            bail!("time.t_end must be positive");
        }
        if !(0.0..=1.0).contains(&s.rejection_limit) {
            bail!("run.rejection_limit must lie in [0, 1]");
        }
        fluctuon::Grid::new(s.d, s.n).context("grid")?;
        Ok(())
    }
}
