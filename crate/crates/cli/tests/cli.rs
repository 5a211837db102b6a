use std::path::Path;
use std::process::{Command, Output};

use fluctuon::report::{read_csv, read_trajectory};

fn fluctuon(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluctuon"))
        .args(args)
        .env("FLUCTUON_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

const SMALL: [&str; 8] = [
    "--set", "grid.n=32", "--set", "time.t_end=0.004", "--set", "time.snapshots=4", "--set", "run.paths=4",
];

fn files_with(dir: &Path, ext: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(ext))
        .collect();
    v.sort();
    v
}

#[test]
fn minimal_config_file_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[grid]\nd = 1\n").unwrap();
    let o = fluctuon(&["show-config", "-c", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("config_hash"));
}

#[test]
fn beta_below_half_dimension_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let o = fluctuon(&["clt", "--set", "norm.beta=0.4", "--set", "norm.tau=\"2\""], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("beta"), "{}", text(&o));
}

#[test]
fn half_power_schedule_is_refused_at_parse() {
    let dir = tempfile::tempdir().unwrap();
    let o = fluctuon(&["moments", "--set", "schedule.gamma=0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("scaling regime"), "{}", text(&o));
}

#[test]
fn unknown_keys_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[grid]\nresolution = 64\n").unwrap();
    let o = fluctuon(&["show-config", "-c", cfg.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    assert!(text(&o).contains("resolution"), "{}", text(&o));
}

#[test]
fn validate_model_case_two_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = fluctuon(&["validate", "--set", "coefficients.m=2"], dir.path());
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("all conditions pass"), "{}", text(&o));
    assert!(!text(&o).contains("VIOLATION"));
}

#[test]
fn validate_flags_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = fluctuon(&["validate", "--set", "coefficients.m=1.5"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
}

#[test]
fn zero_noise_simulation_stays_constant() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--epsilon", "0"];
    args.extend_from_slice(&SMALL);
    let o = fluctuon(&args, dir.path());
    assert!(o.status.success(), "{}", text(&o));
    let bin = files_with(dir.path(), ".bin");
    assert_eq!(bin.len(), 1);
    let (times, fields) = read_trajectory(&bin[0]).unwrap();
    assert_eq!(times.len(), 5);
    for f in &fields {
        assert!(f.as_slice().iter().all(|&v| v == 1.0));
    }
    assert_eq!(files_with(dir.path(), ".json").len(), 1);
}

#[test]
fn clt_writes_one_row_per_epsilon_independent_of_workers() {
    let mut csv = Vec::new();
    for workers in ["1", "4"] {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["clt", "--workers", workers, "--seed", "5"];
        args.extend_from_slice(&SMALL);
        let o = fluctuon(&args, dir.path());
        assert!(o.status.success(), "{}", text(&o));
        let files = files_with(dir.path(), ".csv");
        assert_eq!(files.len(), 1);
        let t = read_csv(&files[0]).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.column("M").unwrap(), vec![1.0, 2.0, 3.0]);
        for c in ["epsilon", "M", "F1", "F3", "mean_sq_err", "ci_lo", "ci_hi", "bound", "ratio"] {
            assert!(t.column(c).is_ok(), "missing {c}");
        }
        assert!(files[0].to_string_lossy().contains("seed5_"));
        csv.push(std::fs::read(&files[0]).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
}

#[test]
fn moments_and_moser_runs_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["moments"];
    args.extend_from_slice(&SMALL);
    let o = fluctuon(&args, dir.path());
    assert!(o.status.success(), "{}", text(&o));
    let mut args = vec!["moser", "--set", "coefficients.family=\"linear\"", "--set", "coefficients.kappa=0.05"];
    args.extend_from_slice(&SMALL);
    let o = fluctuon(&args, dir.path());
    assert!(o.status.success(), "{}", text(&o));
    let csv = files_with(dir.path(), ".csv");
    assert_eq!(csv.len(), 2);

    let a = csv[0].to_str().unwrap();
    let b = csv[1].to_str().unwrap();
    let o = fluctuon(&["summarize", a, a], dir.path());
    assert!(o.status.success(), "{}", text(&o));
    let o = fluctuon(&["summarize", a, b], dir.path());
    assert!(!o.status.success());
    assert!(text(&o).contains("config hash"), "{}", text(&o));
}

#[test]
fn excessive_rejections_fail_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "moser",
        "--set",
        "run.nonneg_policy=\"reject\"",
        "--set",
        "run.rejection_limit=0",
        "--set",
        "schedule.epsilon=[0.9]",
        "--set",
        "schedule.cutoffs=[6]",
        "--set",
        "coefficients.family=\"linear\"",
        "--set",
        "coefficients.kappa=0.01",
        "--set",
        "moser.low=0.05",
        "--set",
        "moser.delta=0.01",
        "--set",
        "initial.rho0=0.05",
    ];
    args.extend_from_slice(&SMALL);
    let o = fluctuon(&args, dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", text(&o));
    assert!(text(&o).contains("rejected path fraction"));
}
