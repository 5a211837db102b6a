//! Versioned CSV tables, JSON reports and the binary snapshot container.
//!
//! CSV layout:
//!
//! ```text
//! # fluctuon-csv v1
//! # kind=clt
//! # config_hash=<hex>
//! # seed=<u64>
//! epsilon,M,F1,F3,...
//! ```
//!
//! Floats are written in shortest round-trip form, so identical results give
//! identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::SpectralField;
use crate::error::{Error, Result};
use crate::experiments::{CltReport, MomentReport, MoserReport};
use crate::grid::{Grid, GridField};
use crate::solver::{Rejection, Trajectory};

pub const CSV_VERSION: &str = "fluctuon-csv v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Clt,
    Moments,
    Moser,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Clt => "clt",
            ReportKind::Moments => "moments",
            ReportKind::Moser => "moser",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "clt" => Ok(ReportKind::Clt),
            "moments" => Ok(ReportKind::Moments),
            "moser" => Ok(ReportKind::Moser),
            other => Err(Error::MalformedReport(format!("unknown report kind {other:?}"))),
        }
    }
}

/// File stem `<kind>_seed<seed>_<first 12 hash chars>`.
pub fn report_stem(kind: ReportKind, seed: u64, config_hash: &str) -> String {
    let short: String = config_hash.chars().take(12).collect();
    format!("{}_seed{seed}_{short}", kind.as_str())
}

/// A parsed report table; every cell is numeric.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub kind: ReportKind,
    pub config_hash: String,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    fn new(kind: ReportKind, config_hash: &str, seed: u64, columns: Vec<String>) -> Self {
        Self { kind, config_hash: config_hash.to_string(), seed, columns, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MalformedReport(format!("missing column {name:?}")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {CSV_VERSION}");
        let _ = writeln!(s, "# kind={}", self.kind.as_str());
        let _ = writeln!(s, "# config_hash={}", self.config_hash);
        let _ = writeln!(s, "# seed={}", self.seed);
        let mut w = csv::Writer::from_writer(Vec::new());
        // writing to memory cannot fail
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v}"))).expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory flush");
        s.push_str(&String::from_utf8(body).expect("ascii output"));
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let first = text.lines().next().unwrap_or("");
        if first.trim() != format!("# {CSV_VERSION}") {
            return Err(Error::MalformedReport(format!(
                "expected schema header `# {CSV_VERSION}`, found {first:?}"
            )));
        }
        let (mut kind, mut hash, mut seed) = (None, None, None);
        for meta in text.lines().skip(1).map_while(|l| l.strip_prefix('#')) {
            let Some((k, v)) = meta.split_once('=') else { continue };
            let v = v.trim();
            match k.trim() {
                "kind" => kind = Some(ReportKind::parse(v)?),
                "config_hash" => hash = Some(v.to_string()),
                "seed" => seed = Some(v.parse().map_err(|_| Error::MalformedReport(format!("bad seed {v:?}")))?),
                _ => {}
            }
        }
        let bad = |e: csv::Error| Error::MalformedReport(e.to_string());
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let columns: Vec<String> = r.headers().map_err(bad)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(bad)?;
            let row = rec
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedReport(format!("row {}: {e}", rows.len() + 1)))?;
            rows.push(row);
        }
        if columns.is_empty() || columns.iter().all(|c| c.is_empty()) {
            return Err(Error::MalformedReport("missing column line".into()));
        }
        Ok(Self {
            kind: kind.ok_or_else(|| Error::MalformedReport("missing `# kind=` header".into()))?,
            config_hash: hash.ok_or_else(|| Error::MalformedReport("missing `# config_hash=` header".into()))?,
            seed: seed.ok_or_else(|| Error::MalformedReport("missing `# seed=` header".into()))?,
            columns,
            rows,
        })
    }
}

/// Column name for the exceedance level `a`, e.g. `p_gt_0.5`.
pub fn exceed_column(a: f64) -> String {
    format!("p_gt_{a}")
}

pub fn clt_table(r: &CltReport, config_hash: &str) -> CsvTable {
    let mut cols: Vec<String> = [
        "epsilon", "M", "F1", "F3", "mean_sq_err", "ci_lo", "ci_hi", "bound", "ratio", "F2", "paths", "rejected",
        "std_error", "leading", "tail",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for &a in &r.thresholds {
        let c = exceed_column(a);
        cols.push(format!("{c}_lo"));
        cols.push(format!("{c}_hi"));
        cols.push(c);
    }
    let mut t = CsvTable::new(ReportKind::Clt, config_hash, r.meta.seed, cols);
    for row in &r.rows {
        let e = &row.mean_sq_err;
        let mut v = vec![
            row.epsilon,
            row.cutoff as f64,
            row.f1,
            row.f3,
            e.mean,
            e.ci_lo,
            e.ci_hi,
            row.bound,
            row.ratio,
            row.f2,
            row.paths as f64,
            row.rejected as f64,
            e.std_error,
            row.leading,
            row.tail,
        ];
        for p in &row.exceed {
            v.extend([p.ci_lo, p.ci_hi, p.estimate]);
        }
        t.rows.push(v);
    }
    t
}

pub fn moment_table(r: &MomentReport, config_hash: &str) -> CsvTable {
    let cols = [
        "epsilon", "M", "F1", "F3", "mean_lh", "ci_lo", "ci_hi", "scale", "ratio", "paths", "rejected", "std_error", "h",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut t = CsvTable::new(ReportKind::Moments, config_hash, r.meta.seed, cols);
    for row in &r.rows {
        let e = &row.mean_lh;
        t.rows.push(vec![
            row.epsilon,
            row.cutoff as f64,
            row.f1,
            row.f3,
            e.mean,
            e.ci_lo,
            e.ci_hi,
            row.scale,
            row.ratio,
            row.paths as f64,
            row.rejected as f64,
            e.std_error,
            r.h,
        ]);
    }
    t
}

pub fn moser_table(r: &MoserReport, config_hash: &str) -> CsvTable {
    let cols = [
        "epsilon", "M", "F1", "F3", "tail_prob", "ci_lo", "ci_hi", "bound", "ratio", "R_eps", "ln_R", "zeta",
        "series_terms", "paths", "rejected", "hits",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut t = CsvTable::new(ReportKind::Moser, config_hash, r.meta.seed, cols);
    for row in &r.rows {
        let p = &row.tail;
        let ratio = if row.bound > 0.0 { p.estimate / row.bound } else { f64::NAN };
        t.rows.push(vec![
            row.epsilon,
            row.cutoff as f64,
            row.f1,
            row.f3,
            p.estimate,
            p.ci_lo,
            p.ci_hi,
            row.bound,
            ratio,
            row.r_eps,
            row.ln_r,
            row.zeta,
            row.series_terms as f64,
            row.paths as f64,
            row.rejected as f64,
            p.successes as f64,
        ]);
    }
    t
}

pub fn write_csv(path: &Path, table: &CsvTable) -> Result<()> {
    fs::write(path, table.to_csv_string())?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    CsvTable::parse(&fs::read_to_string(path)?)
}

/// Reads several tables and refuses to mix kinds or configurations.
pub fn read_consistent(paths: &[&Path]) -> Result<Vec<CsvTable>> {
    let tables: Vec<CsvTable> = paths.iter().map(|p| read_csv(p)).collect::<Result<_>>()?;
    if let Some(first) = tables.first() {
        for (t, p) in tables.iter().zip(paths).skip(1) {
            if t.config_hash != first.config_hash {
                return Err(Error::ReportMismatch(format!(
                    "{} has config hash {} but {} has {}",
                    p.display(),
                    t.config_hash,
                    paths[0].display(),
                    first.config_hash
                )));
            }
            if t.kind != first.kind {
                return Err(Error::ReportMismatch(format!("{} is a {} report", p.display(), t.kind.as_str())));
            }
        }
    }
    Ok(tables)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    config_hash: &'a str,
    report: &'a T,
}

/// Pretty JSON `{schema, config_hash, report}`. Non-finite floats become null.
pub fn write_json<T: Serialize>(path: &Path, config_hash: &str, report: &T) -> Result<()> {
    let env = Envelope { schema: CSV_VERSION, config_hash, report };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Checks the hash of a JSON report written by [`write_json`].
pub fn read_json_hash(path: &Path) -> Result<String> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    v.get("config_hash")
        .and_then(|h| h.as_str())
        .map(str::to_string)
        .ok_or_else(|| Error::MalformedReport(format!("{} has no config_hash", path.display())))
}

/// Diagnostics written next to a binary trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub config_hash: String,
    pub dt: f64,
    pub steps: usize,
    pub mass0: f64,
    pub max_mass_drift: f64,
    pub min_rho: f64,
    pub negativity_events: usize,
    pub rejection: Option<Rejection>,
}

impl TrajectorySidecar {
    pub fn new(t: &Trajectory, config_hash: &str) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            dt: t.dt,
            steps: t.steps,
            mass0: t.mass0,
            max_mass_drift: t.max_mass_drift,
            min_rho: t.min_rho,
            negativity_events: t.negativity_events,
            rejection: t.rejection.clone(),
        }
    }
}

fn write_container(path: &Path, grid: Grid, times: &[f64], payload: impl Iterator<Item = f64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for h in [grid.dim() as f64, grid.n() as f64, times.len() as f64] {
        w.write_all(&h.to_le_bytes())?;
    }
    for t in times {
        w.write_all(&t.to_le_bytes())?;
    }
    for v in payload {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Header `d, N, count`, then `count` times, then the payload, all
/// little-endian f64. Returns the grid, times and raw payload.
fn read_container(path: &Path, values_per_cell: usize) -> Result<(Grid, Vec<f64>, Vec<f64>)> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 || bytes.len() < 24 {
        return Err(Error::MalformedReport(format!("{}: truncated container", path.display())));
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let as_count = |x: f64, what: &str| -> Result<usize> {
        if x >= 0.0 && x.fract() == 0.0 && x < 1e9 {
            Ok(x as usize)
        } else {
            Err(Error::MalformedReport(format!("{}: bad {what} {x}", path.display())))
        }
    };
    let d = as_count(vals[0], "dimension")?;
    let n = as_count(vals[1], "resolution")?;
    let count = as_count(vals[2], "snapshot count")?;
    let grid = Grid::new(d, n)?;
    let expected = 3 + count + count * grid.len() * values_per_cell;
    if vals.len() != expected {
        return Err(Error::MalformedReport(format!(
            "{}: {} values, expected {expected}",
            path.display(),
            vals.len()
        )));
    }
    let times = vals[3..3 + count].to_vec();
    Ok((grid, times, vals[3 + count..].to_vec()))
}

pub fn write_trajectory(path: &Path, times: &[f64], fields: &[GridField]) -> Result<()> {
    let grid = check_fields(times.len(), fields.iter().map(|f| f.grid()))?;
    write_container(path, grid, times, fields.iter().flat_map(|f| f.as_slice().iter().copied()))
}

pub fn read_trajectory(path: &Path) -> Result<(Vec<f64>, Vec<GridField>)> {
    let (grid, times, payload) = read_container(path, 1)?;
    let fields = payload
        .chunks_exact(grid.len().max(1))
        .take(times.len())
        .map(|c| GridField::from_vec(grid, c.to_vec()))
        .collect::<Result<_>>()?;
    Ok((times, fields))
}

/// Complex snapshots as `(re, im)` pairs in the same container.
pub fn write_spectral(path: &Path, times: &[f64], fields: &[SpectralField]) -> Result<()> {
    let grid = check_fields(times.len(), fields.iter().map(|f| f.grid()))?;
    write_container(path, grid, times, fields.iter().flat_map(|f| f.as_slice().iter().flat_map(|z| [z.re, z.im])))
}

pub fn read_spectral(path: &Path) -> Result<(Vec<f64>, Vec<SpectralField>)> {
    let (grid, times, payload) = read_container(path, 2)?;
    let fields = payload
        .chunks_exact(2 * grid.len().max(1))
        .take(times.len())
        .map(|c| {
            let mut s = SpectralField::zeros(grid);
            for (z, pair) in s.as_mut_slice().iter_mut().zip(c.chunks_exact(2)) {
                *z = Complex64::new(pair[0], pair[1]);
            }
            s
        })
        .collect();
    Ok((times, fields))
}

fn check_fields(count: usize, grids: impl Iterator<Item = Grid>) -> Result<Grid> {
    let grids: Vec<Grid> = grids.collect();
    if grids.len() != count {
        return Err(Error::invalid("snapshots", format!("{} fields for {count} times", grids.len())));
    }
    let first = *grids.first().ok_or_else(|| Error::invalid("snapshots", "nothing to write"))?;
    if grids.iter().any(|g| *g != first) {
        return Err(Error::GridMismatch("snapshots live on different grids".into()));
    }
    Ok(first)
}
