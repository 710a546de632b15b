//! `coreset` command-line interface.
//!
//! Exit codes: 0 success, 1 runtime or validation failure, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_pairs, RunConfig};
use crate::error::{Error, Result};
use crate::harness::stream::read_samples_csv;
use crate::harness::RunReport;
use crate::influence::{build_context, CriterionConfig};
use crate::models::{self, FitConfig, ModelSpec};
use crate::numkit::{CgConfig, DEFAULT_DAMPING};
use crate::selection::{select_greedy, SelectorKind};
use crate::validation::{run_suites, suite_names, Mutations};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Most grid points a sweep accepts.
pub const MAX_SWEEP_POINTS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "coreset", version, about = "Influence-based replay buffer selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one continual-learning experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override a config key, e.g. `--set criterion.mu=0.25`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the oracle suites and print a pass/fail table.
    Validate {
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, hide = true, value_parser = ["joint-sign"])]
        mutate: Option<String>,
    },
    /// Run one experiment per (mu, nu) grid point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-shot selection over a CSV dataset; prints the kept ids.
    Select {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = crate::influence::DEFAULT_MU)]
        mu: f64,
        #[arg(long, default_value_t = crate::influence::DEFAULT_NU)]
        nu: f64,
        #[arg(long, default_value = "ours")]
        selector: SelectorKind,
        #[arg(long, default_value_t = 0.1)]
        l2: f64,
        #[arg(long, default_value_t = DEFAULT_DAMPING)]
        damping: f64,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut out = std::io::stdout().lock();
    match run_command(cli.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

pub fn run_command(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Run {
            config,
            out: out_dir,
            seed,
            overrides,
        } => {
            let cfg = load_config(&config, seed, &overrides)?;
            let dir = output_dir(out_dir, &cfg);
            let report = cfg.execute()?;
            write_artifacts(&dir, &report)?;
            check_artifacts(&dir, &report)?;
            writeln!(out, "acc={:.6} bwt={:.6} artifacts={}", report.acc, report.bwt, dir.display())?;
            Ok(EXIT_OK)
        }
        Command::Validate { filter, mutate } => {
            let mutations = Mutations {
                joint_sign: mutate.as_deref() == Some("joint-sign"),
            };
            cmd_validate(filter.as_deref(), &mutations, out)
        }
        Command::Sweep { config, grid, out: out_dir } => {
            let cfg = load_config(&config, None, &[])?;
            let points = load_grid(&grid, &cfg)?;
            let dir = output_dir(out_dir, &cfg);
            std::fs::create_dir_all(&dir)?;
            let rows = cmd_sweep(&cfg, &points)?;
            let path = dir.join("sweep.csv");
            write_sweep(&path, &rows)?;
            writeln!(out, "{} grid points written to {}", rows.len(), path.display())?;
            Ok(EXIT_OK)
        }
        Command::Select {
            data,
            m,
            mu,
            nu,
            selector,
            l2,
            damping,
        } => {
            let ids = cmd_select(&data, m, mu, nu, selector, l2, damping)?;
            let line: Vec<String> = ids.iter().map(u64::to_string).collect();
            writeln!(out, "{}", line.join(" "))?;
            Ok(EXIT_OK)
        }
    }
}

/// Reads the config file, then applies `--seed` and `--set` overrides.
pub fn load_config(path: &Path, seed: Option<u64>, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("--config", format!("cannot read `{}`: {e}", path.display())))?;
    let mut pairs = parse_pairs(&text)?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::config("--set", format!("expected KEY=VALUE, got `{o}`")))?;
        pairs.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(seed) = seed {
        pairs.insert("seed".into(), seed.to_string());
    }
    RunConfig::from_pairs(&pairs)
}

fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub const ARTIFACTS: [&str; 4] = ["report.json", "acc_matrix.csv", "metrics.csv", "buffer_trace.csv"];

pub fn write_artifacts(dir: &Path, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json()? + "\n")?;

    let t = report.acc_matrix.num_tasks();
    let mut w = csv_writer(&dir.join("acc_matrix.csv"))?;
    let mut header = vec!["after_task".to_string()];
    header.extend((0..t).map(|j| format!("task_{j}")));
    w.write_record(&header).map_err(csv_io)?;
    for (i, row) in report.acc_matrix.rows().iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend((0..t).map(|j| row.get(j).map_or(String::new(), |v| v.to_string())));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("metrics.csv"))?;
    w.write_record(["step", "task", "tau", "buffer_size"]).map_err(csv_io)?;
    for r in &report.metrics {
        w.write_record([
            r.step.to_string(),
            r.task.to_string(),
            r.tau.map_or(String::new(), |v| v.to_string()),
            r.buffer_size.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("buffer_trace.csv"))?;
    w.write_record(["step", "ids"]).map_err(csv_io)?;
    for b in &report.buffer_trace {
        let ids: Vec<String> = b.ids.iter().map(u64::to_string).collect();
        w.write_record([b.step.to_string(), ids.join(" ")]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(csv_io)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_io)?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

fn schema_error(file: &str, message: impl Into<String>) -> Error {
    Error::invalid(format!("{file} violates its schema: {}", message.into()))
}

/// Re-reads the written artifacts and checks them against their schemas.
pub fn check_artifacts(dir: &Path, report: &RunReport) -> Result<()> {
    let json = std::fs::read_to_string(dir.join("report.json"))?;
    let parsed: RunReport = serde_json::from_str(&json).map_err(|e| schema_error("report.json", e.to_string()))?;
    if parsed.acc_matrix != report.acc_matrix || parsed.metrics.len() != report.metrics.len() {
        return Err(schema_error("report.json", "does not match the run"));
    }
    RunConfig::from_pairs(&parsed.config).map_err(|e| schema_error("report.json", format!("config echo: {e}")))?;

    let t = report.acc_matrix.num_tasks();
    let (header, rows) = read_csv(&dir.join("acc_matrix.csv"))?;
    if header.len() != t + 1 || header[0] != "after_task" || rows.len() != t {
        return Err(schema_error("acc_matrix.csv", "wrong shape"));
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, cell) in row.iter().skip(1).enumerate() {
            let ok = if j <= i {
                cell.parse::<f64>().is_ok_and(|v| (0.0..=1.0).contains(&v))
            } else {
                cell.is_empty()
            };
            if !ok {
                return Err(schema_error("acc_matrix.csv", format!("bad cell ({i}, {j}): `{cell}`")));
            }
        }
    }

    let (header, rows) = read_csv(&dir.join("metrics.csv"))?;
    if header != ["step", "task", "tau", "buffer_size"] || rows.len() != report.metrics.len() {
        return Err(schema_error("metrics.csv", "wrong header or row count"));
    }
    for row in &rows {
        let ints = row[0].parse::<usize>().is_ok() && row[1].parse::<usize>().is_ok() && row[3].parse::<usize>().is_ok();
        let tau = row[2].is_empty() || row[2].parse::<f64>().is_ok_and(|v| (-1.0..=1.0).contains(&v));
        if !ints || !tau {
            return Err(schema_error("metrics.csv", format!("bad row {row:?}")));
        }
    }

    let (header, rows) = read_csv(&dir.join("buffer_trace.csv"))?;
    if header != ["step", "ids"] || rows.len() != report.buffer_trace.len() {
        return Err(schema_error("buffer_trace.csv", "wrong header or row count"));
    }
    for row in &rows {
        if row[0].parse::<usize>().is_err() || row[1].split_whitespace().any(|id| id.parse::<u64>().is_err()) {
            return Err(schema_error("buffer_trace.csv", format!("bad row {row:?}")));
        }
    }
    Ok(())
}

pub fn cmd_validate(filter: Option<&str>, mutations: &Mutations, out: &mut dyn Write) -> Result<i32> {
    let reports = run_suites(filter, mutations);
    if reports.is_empty() {
        return Err(Error::config(
            "--filter",
            format!("no suite matches; known suites: {}", suite_names().join(", ")),
        ));
    }
    writeln!(out, "{:<3} {:<16} {:<6} {:>9}  detail", "#", "suite", "status", "seconds")?;
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        let detail: Vec<String> = r.checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        writeln!(
            out,
            "{:<3} {:<16} {:<6} {:>9.3}  {}",
            r.criterion,
            r.name,
            status,
            r.elapsed.as_secs_f64(),
            detail.join("; ")
        )?;
        failed.extend(r.failed_checks().into_iter().map(|c| c.name.clone()));
    }
    if failed.is_empty() {
        writeln!(out, "all {} suites passed", reports.len())?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "failed: {}", failed.join(", "))?;
        Ok(EXIT_FAILURE)
    }
}

/// Grid file: `criterion.mu=a,b,...` and/or `criterion.nu=a,b,...`.
pub fn load_grid(path: &Path, base: &RunConfig) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("--grid", format!("cannot read `{}`: {e}", path.display())))?;
    let pairs = parse_pairs(&text)?;
    let mut mus = vec![base.harness.criterion.mu];
    let mut nus = vec![base.harness.criterion.nu];
    for (key, raw) in &pairs {
        let values = raw
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::config(key.clone(), format!("`{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::config(key.clone(), "empty grid"));
        }
        match key.as_str() {
            "criterion.mu" | "mu" => mus = values,
            "criterion.nu" | "nu" => nus = values,
            _ => return Err(Error::config(key.clone(), "grid keys are criterion.mu and criterion.nu")),
        }
    }
    let points: Vec<(f64, f64)> = mus.iter().flat_map(|&mu| nus.iter().map(move |&nu| (mu, nu))).collect();
    if points.len() > MAX_SWEEP_POINTS {
        return Err(Error::config("--grid", format!("{} points exceed the limit of {MAX_SWEEP_POINTS}", points.len())));
    }
    for &(mu, nu) in &points {
        CriterionConfig::new(mu, nu, base.harness.criterion.budget).map_err(|e| Error::config("--grid", e.to_string()))?;
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub nu: f64,
    pub acc: f64,
    pub bwt: f64,
    pub mean_tau: Option<f64>,
}

/// One run per grid point; every point shares the base config's stream seed.
pub fn cmd_sweep(base: &RunConfig, points: &[(f64, f64)]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(points.len());
    for &(mu, nu) in points {
        let mut cfg = base.clone();
        cfg.harness.criterion.mu = mu;
        cfg.harness.criterion.nu = nu;
        let report = cfg.execute().map_err(|e| e.at(format!("sweep point mu={mu}, nu={nu}")))?;
        rows.push(SweepRow {
            mu,
            nu,
            acc: report.acc,
            bwt: report.bwt,
            mean_tau: report.mean_tau(),
        });
    }
    Ok(rows)
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["mu", "nu", "acc", "bwt", "mean_tau"]).map_err(csv_io)?;
    for r in rows {
        w.write_record([
            r.mu.to_string(),
            r.nu.to_string(),
            r.acc.to_string(),
            r.bwt.to_string(),
            r.mean_tau.map_or(String::new(), |v| v.to_string()),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Fits a logistic model to the whole file and runs one greedy round over it.
pub fn cmd_select(
    data: &Path,
    m: usize,
    mu: f64,
    nu: f64,
    selector: SelectorKind,
    l2: f64,
    damping: f64,
) -> Result<Vec<u64>> {
    let criterion = CriterionConfig::new(mu, nu, m).map_err(|e| Error::config("--m/--mu/--nu", e.to_string()))?;
    if !selector.is_influence_based() {
        return Err(Error::config("--selector", format!("`{selector}` is not an influence selector")));
    }
    let (samples, dim) = read_samples_csv(data)?;
    if samples.is_empty() {
        return Err(Error::invalid(format!("{} holds no samples", data.display())));
    }
    let num_classes = samples.iter().map(|s| s.label).max().unwrap_or(0) + 1;
    let spec = ModelSpec::logistic(num_classes.max(2), dim, l2).map_err(|e| Error::config("--l2", e.to_string()))?;
    let params = models::fit(&spec, &samples, &FitConfig::newton()).map_err(|e| e.at("fitting the data"))?;
    let ctx = build_context(&spec, &params, &samples, &samples, damping, &CgConfig::for_dim(spec.param_dim()))?;
    let (buffer, _) = select_greedy(&ctx, &criterion, selector)?;
    Ok(buffer.ids())
}
