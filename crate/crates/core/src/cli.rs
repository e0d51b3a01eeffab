//! Command-line front end: argument parsing, kernel loading, CSV/JSON output
//! and run manifests.
//!
//! Every command that writes files also writes `<command>.manifest.json`
//! holding the resolved configuration with the kernel inlined. Passing that
//! file back through `--manifest` reproduces the payload files byte for byte.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exact::{enumerate_pmf_with_budget, DEFAULT_STATE_BUDGET};
use crate::kernel::{ExcitingFunction, KernelSpec, TRUNCATION_TOLERANCE};
use crate::ldp::{
    bound_conjugates, gamma_exact, gamma_mc, uniform_grid, GammaBounds, McConfig, MgfGrid,
    DEFAULT_T_MAX, DEFAULT_T_MIN, DEFAULT_T_POINTS, DEFAULT_X_POINTS,
};
use crate::moments::{limit_arrival_prob, MomentTable};
use crate::risk::{monte_carlo_fan, RuinReport, SurplusConfig};
use crate::simulate::{simulate_batch, BatchConfig, PathBatch, Retain, DEFAULT_DRAW_BUDGET};
use crate::workers::with_workers;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DTHP_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Debug, Parser)]
#[command(
    name = "dthp",
    version,
    about = "Discrete-time Hawkes process toolkit",
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    /// Output directory (defaults to $DTHP_OUT_DIR, then the current directory)
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Worker threads (defaults to the available parallelism)
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Replay a run from its manifest file
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Check a kernel and print its summary
    Validate(KernelArg),
    /// b_n recursion and marginal arrival probabilities (CSV)
    Moments(MomentsArgs),
    /// Exact pmf of H_n by enumeration (JSON)
    Exact(ExactArgs),
    /// Monte Carlo paths (CSV or JSON)
    Simulate(SimulateArgs),
    /// Scaled log-MGF, bounds L/U and their conjugates (CSV)
    Ldp(LdpArgs),
    /// Surplus fan chart and ruin summary (CSV + JSON)
    Risk(RiskArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Moments(_) => "moments",
            Command::Exact(_) => "exact",
            Command::Simulate(_) => "simulate",
            Command::Ldp(_) => "ldp",
            Command::Risk(_) => "risk",
        }
    }

    fn kernel_path(&self) -> &Path {
        match self {
            Command::Validate(a) => &a.kernel,
            Command::Moments(a) => &a.kernel.kernel,
            Command::Exact(a) => &a.kernel.kernel,
            Command::Simulate(a) => &a.kernel.kernel,
            Command::Ldp(a) => &a.kernel.kernel,
            Command::Risk(a) => &a.kernel.kernel,
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Simulate(a) => Some(a.seed),
            Command::Ldp(a) if a.method == GammaMethod::Mc => Some(a.seed),
            Command::Risk(a) => Some(a.seed),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct KernelArg {
    /// Kernel config file, e.g. {"a0": 0.2, "form": "geometric", "alpha": 0.3, "rho": 0.5}
    #[arg(long)]
    pub kernel: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct MomentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArg,
    #[arg(long)]
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct BudgetArgs {
    /// Acknowledge budgets above the defaults
    #[arg(long)]
    pub allow_large_budget: bool,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ExactArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArg,
    #[arg(long)]
    pub n: usize,
    /// Maximum number of enumerated histories
    #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
    pub max_states: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetainArg {
    Terminal,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub paths: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = RetainArg::Terminal)]
    pub retain: RetainArg,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    pub out: OutFormat,
    /// Maximum number of Bernoulli draws (paths * n)
    #[arg(long, default_value_t = DEFAULT_DRAW_BUDGET)]
    pub max_draws: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMethod {
    Exact,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct LdpArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArg,
    /// Horizons for the gamma_n columns (comma separated)
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 12])]
    pub n: Vec<usize>,
    #[arg(long, value_enum, default_value_t = GammaMethod::Exact)]
    pub method: GammaMethod,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_T_MIN, allow_negative_numbers = true)]
    pub t_min: f64,
    #[arg(long, default_value_t = DEFAULT_T_MAX, allow_negative_numbers = true)]
    pub t_max: f64,
    #[arg(long, default_value_t = DEFAULT_T_POINTS)]
    pub t_points: usize,
    #[arg(long, default_value_t = DEFAULT_X_POINTS)]
    pub x_points: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct RiskArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArg,
    /// Initial surplus in (0, 1)
    #[arg(long)]
    pub u: f64,
    /// Premium per step in (0, 1)
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub paths: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_DRAW_BUDGET)]
    pub max_draws: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub budget: BudgetArgs,
}

/// Record written next to every set of output files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Command,
    pub kernel: KernelSpec,
    pub seed: Option<u64>,
    pub kernel_fingerprint: String,
    pub truncation_lag: Option<usize>,
    pub tool_version: String,
    pub duration_secs: f64,
}

/// Files produced by a run plus what it printed.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub stdout: String,
    pub validation_failed: bool,
}

/// Numbers are written in shortest round-trip form.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn csv_row(cells: &[String]) -> String {
    let mut line = cells.join(",");
    line.push('\n');
    line
}

pub fn moments_csv(table: &MomentTable) -> String {
    let mut out = String::from("n,b_n,marginal,limit_prob,clt_variance\n");
    for (n, b, m) in table.rows() {
        out.push_str(&csv_row(&[
            n.to_string(),
            fmt_num(b),
            fmt_num(m),
            fmt_num(table.limit_prob),
            fmt_num(table.clt_variance),
        ]));
    }
    out
}

pub fn batch_csv(batch: &PathBatch) -> String {
    match &batch.full {
        None => {
            let mut out = String::from("path_id,H\n");
            for (i, h) in batch.counts.iter().enumerate() {
                let _ = writeln!(out, "{i},{h}");
            }
            out
        }
        Some(paths) => {
            let mut out = String::from("step,path_id,xi,lambda,H\n");
            for (i, path) in paths.iter().enumerate() {
                let mut h = 0u32;
                for (k, (x, lambda)) in path.arrivals.iter().zip(&path.intensities).enumerate() {
                    h += u32::from(*x);
                    let _ = writeln!(out, "{},{i},{x},{},{h}", k + 1, fmt_num(*lambda));
                }
            }
            out
        }
    }
}

pub fn batch_json(batch: &PathBatch) -> Result<String> {
    let value = json!({
        "kernel_fingerprint": batch.kernel_fingerprint,
        "n": batch.horizon,
        "paths": batch.paths,
        "seed": batch.seed,
        "mean_fraction": batch.mean_fraction(),
        "histogram": batch.count_histogram(),
        "counts": batch.counts,
        "full": batch.full,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

pub fn ldp_bounds_csv(bounds: &GammaBounds, grids: &[MgfGrid], t: &[f64]) -> String {
    let mut header = vec!["t".to_string(), "L".into(), "U".into()];
    header.extend(grids.iter().map(|g| format!("gamma_{}", g.n)));
    let mut out = csv_row(&header);
    for (j, &tj) in t.iter().enumerate() {
        let mut row = vec![
            fmt_num(tj),
            fmt_num(bounds.lower(tj)),
            fmt_num(bounds.upper(tj)),
        ];
        row.extend(grids.iter().map(|g| fmt_num(g.values[j])));
        out.push_str(&csv_row(&row));
    }
    out
}

pub fn fan_csv(report: &RuinReport) -> String {
    let mut out = String::from("step,mean,p5,p95\n");
    for r in &report.rows {
        out.push_str(&csv_row(&[
            r.step.to_string(),
            fmt_num(r.mean),
            fmt_num(r.p5),
            fmt_num(r.p95),
        ]));
    }
    out
}

pub fn risk_summary_json(report: &RuinReport) -> Result<String> {
    let value = json!({
        "drift_est": report.drift_estimate,
        "drift_theory": report.drift_theory,
        "threshold": report.premium_threshold,
        "ruin_freq": report.ruin_frequency,
        "ruin_std_err": report.ruin_std_err,
        "ldp_band": report.ldp_band,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn check_ack(value: u64, default: u64, budget: &BudgetArgs, flag: &str) -> Result<()> {
    if value > default && !budget.allow_large_budget {
        return Err(Error::InvalidConfig(format!(
            "{flag} above the default {default} requires --allow-large-budget"
        )));
    }
    Ok(())
}

fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn load_kernel_spec(path: &Path) -> Result<KernelSpec> {
    let text = fs::read_to_string(path)?;
    KernelSpec::from_json(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// Result of running one subcommand, before anything touches the disk.
#[derive(Debug, Default)]
pub struct Execution {
    /// Output files as `(file name, contents)`.
    pub payloads: Vec<(String, String)>,
    pub stdout: String,
    pub validation_failed: bool,
}

/// Executes `command` against `spec` without writing any files.
pub fn execute(command: &Command, spec: &KernelSpec) -> Result<Execution> {
    if let Command::Validate(_) = command {
        let report = spec.validate();
        let mu = report
            .passed
            .then(|| ExcitingFunction::new(spec.clone()).map(|k| limit_arrival_prob(&k)))
            .transpose()?;
        let text = serde_json::to_string_pretty(&json!({
            "passed": report.passed,
            "checks": report.checks,
            "excitation_mass": report.excitation_mass,
            "total_mass": report.total_mass,
            "first_moment": report.first_moment,
            "limit_prob": mu,
        }))? + "\n";
        return Ok(Execution {
            payloads: Vec::new(),
            stdout: text,
            validation_failed: !report.passed,
        });
    }

    let kernel = ExcitingFunction::new(spec.clone())?;
    let mut files = Vec::new();
    let mut stdout = String::new();
    match command {
        Command::Validate(_) => unreachable!(),
        Command::Moments(a) => {
            let table = MomentTable::compute(&kernel, a.n)?;
            let _ = writeln!(
                stdout,
                "limit_prob={} clt_variance={} converged_at={:?}",
                fmt_num(table.limit_prob),
                fmt_num(table.clt_variance),
                table.converged_at
            );
            files.push(("moments.csv".into(), moments_csv(&table)));
        }
        Command::Exact(a) => {
            check_ack(
                a.max_states,
                DEFAULT_STATE_BUDGET,
                &a.budget,
                "--max-states",
            )?;
            let dist = enumerate_pmf_with_budget(&kernel, a.n, a.max_states)?;
            let checks = dist.checks(&kernel);
            let text = serde_json::to_string_pretty(&json!({
                "n": dist.horizon,
                "pmf": dist.pmf,
                "checks": checks,
                "truncation_lag": dist.truncation_lag,
            }))? + "\n";
            let _ = writeln!(stdout, "max identity error {}", fmt_num(checks.max_err()));
            files.push(("exact.json".into(), text));
        }
        Command::Simulate(a) => {
            check_ack(a.max_draws, DEFAULT_DRAW_BUDGET, &a.budget, "--max-draws")?;
            let mut cfg = BatchConfig::new(a.n, a.paths, a.seed).retain(match a.retain {
                RetainArg::Terminal => Retain::Terminal,
                RetainArg::Full => Retain::Full,
            });
            cfg.max_draws = a.max_draws;
            let batch = simulate_batch(&kernel, &cfg)?;
            let _ = writeln!(stdout, "mean H_n/n = {}", fmt_num(batch.mean_fraction()));
            match a.out {
                OutFormat::Csv => files.push(("simulate.csv".into(), batch_csv(&batch))),
                OutFormat::Json => files.push(("simulate.json".into(), batch_json(&batch)?)),
            }
        }
        Command::Ldp(a) => {
            let t = uniform_grid(a.t_min, a.t_max, a.t_points)?;
            let x = uniform_grid(0.0, 1.0, a.x_points)?;
            let grids = a
                .n
                .iter()
                .map(|&n| match a.method {
                    GammaMethod::Exact => gamma_exact(&kernel, n, &t),
                    GammaMethod::Mc => gamma_mc(&kernel, n, &t, &McConfig::new(a.paths, a.seed)),
                })
                .collect::<Result<Vec<_>>>()?;
            let (l_star, u_star) = bound_conjugates(&kernel, &t, &x)?;
            let bounds = GammaBounds::new(&kernel);
            files.push(("ldp_bounds.csv".into(), ldp_bounds_csv(&bounds, &grids, &t)));
            let mut conj = String::from("x,Lstar,Ustar\n");
            for ((xj, l), u) in x.iter().zip(&l_star.values).zip(&u_star.values) {
                conj.push_str(&csv_row(&[fmt_num(*xj), fmt_num(*l), fmt_num(*u)]));
            }
            files.push(("ldp_conjugates.csv".into(), conj));
        }
        Command::Risk(a) => {
            check_ack(a.max_draws, DEFAULT_DRAW_BUDGET, &a.budget, "--max-draws")?;
            let mut cfg = SurplusConfig::new(a.u, a.p, a.n, a.paths, a.seed);
            cfg.max_draws = a.max_draws;
            let report = monte_carlo_fan(&kernel, &cfg)?;
            let _ = writeln!(
                stdout,
                "threshold={} drift_est={} ruin_freq={}",
                fmt_num(report.premium_threshold),
                fmt_num(report.drift_estimate),
                fmt_num(report.ruin_frequency)
            );
            files.push(("risk_fan.csv".into(), fan_csv(&report)));
            files.push(("risk_summary.json".into(), risk_summary_json(&report)?));
        }
    }
    Ok(Execution {
        payloads: files,
        stdout,
        validation_failed: false,
    })
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<RunOutput> {
    let started = Instant::now();
    let (command, spec) = match (&cli.manifest, cli.command) {
        (Some(path), _) => {
            let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            (manifest.config, manifest.kernel)
        }
        (None, Some(command)) => {
            let spec = load_kernel_spec(command.kernel_path())?;
            (command, spec)
        }
        (None, None) => {
            return Err(Error::InvalidConfig(
                "a subcommand or --manifest is required".into(),
            ))
        }
    };

    let Execution {
        payloads,
        stdout,
        validation_failed,
    } = with_workers(cli.workers, || execute(&command, &spec))??;
    let mut output = RunOutput {
        stdout,
        validation_failed,
        ..Default::default()
    };
    if payloads.is_empty() {
        return Ok(output);
    }

    let out_dir = resolve_out_dir(cli.out_dir);
    fs::create_dir_all(&out_dir)?;
    for (name, contents) in &payloads {
        let path = out_dir.join(name);
        fs::write(&path, contents)?;
        output.files.push(path);
    }
    let kernel = ExcitingFunction::new(spec.clone())?;
    let manifest = RunManifest {
        subcommand: command.name().to_string(),
        seed: command.seed(),
        kernel_fingerprint: kernel.fingerprint(),
        truncation_lag: match command {
            Command::Exact(_) => kernel.truncate(TRUNCATION_TOLERANCE).lag,
            _ => None,
        },
        config: command.clone(),
        kernel: spec,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        duration_secs: started.elapsed().as_secs_f64(),
    };
    let path = out_dir.join(format!("{}.manifest.json", command.name()));
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    output.files.push(path);
    Ok(output)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidKernel(_) => EXIT_VALIDATION,
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        Error::InvalidConfig(_) | Error::Json(_) | Error::InvalidGrid(_) => EXIT_USAGE,
        Error::HorizonTooShort { .. } | Error::IndexOutOfRange(_) | Error::ZeroLag => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_INTERNAL,
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            for f in &out.files {
                eprintln!("wrote {}", f.display());
            }
            if out.validation_failed {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
