use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fluctuon::analysis::dft;
use fluctuon::coefficients::{validate_assumptions, CheckStatus};
use fluctuon::experiments::{clt_experiment, moment_experiment, moser_experiment, CltSpec, MoserSpec};
use fluctuon::noise::build_basis;
use fluctuon::report::{
    clt_table, moment_table, moser_table, read_consistent, report_stem, write_csv, write_json, write_spectral,
    write_trajectory, CsvTable, ReportKind, TrajectorySidecar,
};
use fluctuon::solver::{cfl_dt, simulate_path_indexed};
use fluctuon::{Error, SolverConfig};

mod config;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "fluctuon", version, about = "Dean-Kawasaki fluctuation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; every key has a default.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set run.paths=200` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(short, long, env = "FLUCTUON_OUT_DIR", default_value = "fluctuon-out")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(short, long, default_value_t = 1)]
    workers: usize,
    /// Master seed (shorthand for `--set run.seed=...`).
    #[arg(long)]
    seed: Option<u64>,
    /// Paths per row (shorthand for `--set run.paths=...`).
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One finite-difference path; writes binary snapshots and diagnostics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Noise strength (shorthand for `--set simulate.epsilon=...`).
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Coupling error against the limit equation over the schedule.
    Clt {
        #[command(flatten)]
        common: Common,
    },
    /// L^h moments of the fluctuation field over the schedule.
    Moments {
        #[command(flatten)]
        common: Common,
    },
    /// Lower-bound tail probabilities over the schedule.
    Moser {
        #[command(flatten)]
        common: Common,
    },
    /// Checks the structural assumptions on the coefficients.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Prints CSV reports; refuses files from different configurations.
    Summarize {
        files: Vec<PathBuf>,
    },
    /// Prints the resolved configuration and its hash.
    ShowConfig {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, extra: &[String]) -> Result<RunConfig> {
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("run.seed={s}"));
    }
    if let Some(p) = common.paths {
        overrides.push(format!("run.paths={p}"));
    }
    overrides.extend_from_slice(extra);
    RunConfig::load(common.config.as_deref(), &overrides)
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(common.out.clone())
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.4e}")
    }
}

fn print_table(t: &CsvTable, columns: &[&str]) {
    let header: Vec<String> = columns.iter().map(|c| format!("{c:>12}")).collect();
    println!("{}", header.join(" "));
    let cols: Vec<Vec<f64>> = columns.iter().map(|c| t.column(c).unwrap_or_default()).collect();
    for i in 0..t.rows.len() {
        let cells: Vec<String> = cols.iter().map(|c| format!("{:>12}", c.get(i).map_or("-".into(), |v| fmt(*v)))).collect();
        println!("{}", cells.join(" "));
    }
}

fn save(dir: &Path, table: &CsvTable, report: &impl serde::Serialize, cfg: &RunConfig) -> Result<()> {
    let stem = report_stem(table.kind, cfg.run.seed, &table.config_hash);
    write_csv(&dir.join(format!("{stem}.csv")), table)?;
    write_json(&dir.join(format!("{stem}.json")), &table.config_hash, report)?;
    std::fs::write(dir.join(format!("{stem}.config.toml")), cfg.to_toml())?;
    println!("wrote {}", dir.join(format!("{stem}.csv")).display());
    Ok(())
}

fn simulate(common: &Common, epsilon: Option<f64>) -> Result<()> {
    let extra: Vec<String> = epsilon.map(|e| format!("simulate.epsilon={e:e}")).into_iter().collect();
    let cfg = load(common, &extra)?;
    let dir = out_dir(common)?;
    let c = cfg.coefficients()?;
    let sim = &cfg.simulate;
    let model = build_basis(cfg.grid.d, sim.cutoff, cfg.grid.n)?;
    let mut sc = SolverConfig::new(cfg.grid.d, cfg.grid.n, cfg.time.t_end, 1.0, sim.epsilon, cfg.rho0())
        .with_uniform_snapshots(cfg.time.snapshots);
    sc.nonneg_policy = cfg.run.nonneg_policy;
    sc.sigma_floor = cfg.run.sigma_floor;
    let limit = cfl_dt(&sc, &c, model.norms().f1, sc.rho0.sup())?;
    let dt = cfg.time.dt.unwrap_or(limit);
    if dt > limit {
        anyhow::bail!("time.dt = {dt:e} exceeds the stability limit {limit:e}");
    }
    sc.dt = sc.t_end / (sc.t_end / dt * (1.0 - 1e-12)).ceil().max(1.0);
    let traj = simulate_path_indexed(&sc, &c, &model, cfg.run.seed, sim.path)?;
    let hash = cfg.hash();
    let stem = format!("simulate_seed{}_{}", cfg.run.seed, &hash[..12]);
    write_trajectory(&dir.join(format!("{stem}.bin")), &traj.times, &traj.snapshots)?;
    write_json(&dir.join(format!("{stem}.json")), &hash, &TrajectorySidecar::new(&traj, &hash))?;
    if sim.spectral {
        let spec: Vec<_> = traj.snapshots.iter().map(dft).collect();
        write_spectral(&dir.join(format!("{stem}.spectral.bin")), &traj.times, &spec)?;
    }
    let last = traj.snapshots.last().context("no snapshots")?;
    println!("coefficients      {}", c.name);
    println!("epsilon, M        {:e}, {}", sim.epsilon, sim.cutoff);
    println!("dt, steps         {:e}, {}", traj.dt, traj.steps);
    println!("snapshots         {}", traj.times.len());
    println!("final min / max   {:.15} / {:.15}", last.min(), last.max());
    println!("min over path     {:.6e}", traj.min_rho);
    println!("mass drift        {:.3e}", traj.max_mass_drift);
    println!("negativity events {}", traj.negativity_events);
    if let Some(r) = &traj.rejection {
        println!("rejected at step {} (t = {}): {}", r.step, r.time, r.reason);
    }
    println!("wrote {}", dir.join(format!("{stem}.bin")).display());
    if traj.rejection.is_some() {
        anyhow::bail!("path rejected");
    }
    Ok(())
}

fn clt(common: &Common) -> Result<()> {
    let cfg = load(common, &[])?;
    let dir = out_dir(common)?;
    let spec = CltSpec { norm: cfg.norm_spec()?, thresholds: cfg.norm.thresholds.clone() };
    let r = clt_experiment(&cfg.coefficients()?, &cfg.schedule()?, &cfg.settings(common.workers).0, &spec)?;
    let t = clt_table(&r, &cfg.hash());
    println!("dt = {:e}, steps = {}, fitted C = {:.4e}", r.meta.dt, r.meta.steps, r.rate_constant);
    print_table(&t, &["epsilon", "M", "F3", "mean_sq_err", "ci_lo", "ci_hi", "bound", "ratio", "rejected"]);
    save(&dir, &t, &r, &cfg)
}

fn moments(common: &Common) -> Result<()> {
    let cfg = load(common, &[])?;
    let dir = out_dir(common)?;
    let r = moment_experiment(&cfg.coefficients()?, &cfg.schedule()?, &cfg.settings(common.workers).0, cfg.moments.h)?;
    let t = moment_table(&r, &cfg.hash());
    print_table(&t, &["epsilon", "M", "F3", "mean_lh", "ci_lo", "ci_hi", "scale", "ratio", "rejected"]);
    save(&dir, &t, &r, &cfg)
}

fn moser(common: &Common) -> Result<()> {
    let cfg = load(common, &[])?;
    let dir = out_dir(common)?;
    let spec = MoserSpec { low: cfg.moser.low, delta: cfg.moser.delta, inf_dphi: None };
    let r = moser_experiment(&cfg.coefficients()?, &cfg.schedule()?, &cfg.settings(common.workers).0, spec)?;
    let t = moser_table(&r, &cfg.hash());
    println!("inf dphi = {:e}, ln C0 = {:.6e}", r.inf_dphi, r.ln_c0);
    print_table(&t, &["epsilon", "M", "tail_prob", "ci_lo", "ci_hi", "R_eps", "bound", "rejected"]);
    save(&dir, &t, &r, &cfg)
}

/// Exit status 0 unless some condition is violated.
fn validate(common: &Common) -> Result<bool> {
    let cfg = load(common, &[])?;
    let c = cfg.coefficients()?;
    let rep = validate_assumptions(&c, cfg.validate.z_max, cfg.validate.samples);
    println!("{} on [{:e}, {:e}], {} samples", rep.name, rep.z_min, rep.z_max, rep.samples);
    println!("{:<12} {:<10} {:>12} {:>12}  note", "condition", "status", "constant", "witness");
    for r in &rep.results {
        let status = match r.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Boundary => "boundary",
            CheckStatus::Violation => "VIOLATION",
        };
        let opt = |v: Option<f64>| v.map_or("-".to_string(), fmt);
        println!("{:<12} {:<10} {:>12} {:>12}  {}", r.id, status, opt(r.constant), opt(r.witness), r.note);
    }
    let dir = out_dir(common)?;
    let hash = cfg.hash();
    write_json(&dir.join(format!("validate_{}.json", &hash[..12])), &hash, &rep)?;
    println!("{}", if rep.all_pass() { "all conditions pass" } else { "some conditions do not pass" });
    Ok(rep.results.iter().all(|r| r.status != CheckStatus::Violation))
}

fn summarize(files: &[PathBuf]) -> Result<()> {
    if files.is_empty() {
        anyhow::bail!("no files given");
    }
    let paths: Vec<&Path> = files.iter().map(|p| p.as_path()).collect();
    let tables = read_consistent(&paths)?;
    for (t, p) in tables.iter().zip(&paths) {
        println!("{} ({}, config {})", p.display(), t.kind.as_str(), &t.config_hash);
        let cols: Vec<&str> = match t.kind {
            ReportKind::Clt => vec!["epsilon", "M", "mean_sq_err", "ci_lo", "ci_hi", "bound", "ratio"],
            ReportKind::Moments => vec!["epsilon", "M", "mean_lh", "ci_lo", "ci_hi", "ratio"],
            ReportKind::Moser => vec!["epsilon", "M", "tail_prob", "ci_lo", "ci_hi", "bound"],
        };
        print_table(t, &cols);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common, epsilon } => simulate(&common, epsilon)?,
        Command::Clt { common } => clt(&common)?,
        Command::Moments { common } => moments(&common)?,
        Command::Moser { common } => moser(&common)?,
        Command::Validate { common } => return validate(&common),
        Command::Summarize { files } => summarize(&files)?,
        Command::ShowConfig { common } => {
            let cfg = load(&common, &[])?;
            print!("{}", cfg.to_toml());
            println!("# config_hash = {}", cfg.hash());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let rejected = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::TooManyRejections { .. })));
            ExitCode::from(if rejected { 3 } else { 2 })
        }
    }
}
