use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use soliton_forge::io::write_report_json;
use soliton_forge::pipeline::{self, RunOutput, SweepRow};
use soliton_forge::{Pipeline, RunConfig, SolitonError, Status, VerificationReport};

const EXIT_FAIL: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(
    name = "soliton-forge",
    version,
    about = "Construct and verify U(1)-invariant steady Ricci solitons"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Germ, forward flow and profile for one (d, q, Λ).
    Solve(RunArgs),
    /// Planar Kähler construction (q = -1 only).
    Kahler(RunArgs),
    /// Run two configs and compare their profiles.
    Compare(CompareArgs),
    /// Solve for several values of Λ and tabulate the outcomes.
    Sweep(SweepArgs),
    /// Re-verify a stored profile CSV.
    Check(CheckArgs),
}

#[derive(Args, Clone, Default)]
#[command(allow_negative_numbers = true)]
struct RunArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    q: Option<f64>,
    /// 𝒞λ², the scalar curvature at the zero section times λ².
    #[arg(long = "Lambda")]
    big_lambda: Option<f64>,
    /// g at the zero section.
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    picard_tol: Option<f64>,
    #[arg(long)]
    tmax_tilde: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Profile CSV (native samples go to `<stem>.native.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    config_a: PathBuf,
    config_b: PathBuf,
    /// Largest accepted sup-relative deviation.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated values of Λ.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct CheckArgs {
    profile: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

/// Failure with an exit code attached.
struct Exit(u8, anyhow::Error);

impl From<SolitonError> for Exit {
    fn from(e: SolitonError) -> Self {
        let code = match e {
            SolitonError::InvalidParams(_)
            | SolitonError::Comparison(_)
            | SolitonError::CorruptTrajectory(_)
            | SolitonError::Io(_)
            | SolitonError::Csv(_)
            | SolitonError::Json(_) => EXIT_INVALID,
            _ => EXIT_FAIL,
        };
        Exit(code, e.into())
    }
}

fn invalid(e: anyhow::Error) -> Exit {
    Exit(EXIT_INVALID, e)
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Exit> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => {
                let mut cfg = RunConfig::default();
                cfg.apply_env()?;
                cfg
            }
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$field = v; })*
            };
        }
        set!(d => d, q => q, lambda0 => lambda0, rtol => rtol, atol => atol,
             picard_tol => picard_tol, tmax_tilde => tmax_tilde, nodes => nodes);
        if self.big_lambda.is_some() {
            cfg.big_lambda = self.big_lambda;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.report.is_some() {
            cfg.report = self.report.clone();
        }
        Ok(cfg)
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Exit> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(invalid)?;
    let mut cfg = RunConfig::from_json(&text)?;
    cfg.apply_env()?;
    Ok(cfg)
}

fn print_report(report: &VerificationReport) {
    for e in &report.entries {
        let tag = match e.status {
            Status::Pass => "ok  ",
            Status::Fail => "FAIL",
            Status::ReportOnly => "info",
        };
        let measured: Vec<String> = e
            .measured
            .iter()
            .map(|(k, v)| format!("{k}={v:.6e}"))
            .collect();
        let detail = e
            .detail
            .as_deref()
            .map(|d| format!(" [{d}]"))
            .unwrap_or_default();
        println!("{tag} {:<32} {}{detail}", e.name, measured.join(" "));
    }
}

fn finish(out: &RunOutput) -> Result<u8, Exit> {
    let cfg = &out.config;
    pipeline::write_outputs(out, cfg.out.as_deref(), cfg.report.as_deref())?;
    print_report(&out.report);
    if let Some(v) = out.verdict {
        println!("verdict: {v:?}");
    }
    let failed = out.report.failures().count();
    println!("{} checks, {failed} failed", out.report.entries.len());
    Ok(if failed == 0 { 0 } else { EXIT_FAIL })
}

fn cmd_run(args: &RunArgs, pipe: Pipeline) -> Result<u8, Exit> {
    let cfg = RunConfig {
        pipeline: pipe,
        ..args.config()?
    };
    let out = pipeline::run(&cfg)?;
    finish(&out)
}

fn cmd_compare(args: &CompareArgs) -> Result<u8, Exit> {
    if !(args.tol > 0.0) {
        return Err(invalid(anyhow::anyhow!("--tol must be positive")));
    }
    let a = load_config(&args.config_a)?;
    let b = load_config(&args.config_b)?;
    let (_, report) = pipeline::compare_runs(&a, &b, args.tol)?;
    if let Some(path) = &args.report {
        write_report_json(path, &report)?;
    }
    print_report(&report);
    Ok(if report.all_pass() { 0 } else { EXIT_FAIL })
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, Exit> {
    if args.lambdas.is_empty() {
        return Err(invalid(anyhow::anyhow!(
            "--lambdas needs at least one value"
        )));
    }
    if args.workers == 0 {
        return Err(invalid(anyhow::anyhow!("--workers must be at least 1")));
    }
    let base = RunConfig {
        pipeline: Pipeline::General,
        ..args.run.config()?
    };
    let profile_out = base.out.clone();
    let base = RunConfig {
        out: None,
        report: None,
        ..base
    };
    // Reject invalid values before starting any run.
    for &l in &args.lambdas {
        base.with_lambda(l).validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .map_err(|e| invalid(e.into()))?;
    let results: Vec<Result<SweepRow, SolitonError>> = pool.install(|| {
        args.lambdas
            .par_iter()
            .map(|&l| {
                let out = pipeline::run(&base.with_lambda(l))?;
                if let Some(path) = &profile_out {
                    pipeline::write_outputs(&out, Some(&per_run_path(path, l)), None)?;
                }
                Ok(SweepRow::from_output(&out))
            })
            .collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.big_lambda.total_cmp(&b.big_lambda));
    println!(
        "{:>12} {:>18} {:>15} {:>22} {:>16} {:>16} {:>6}",
        "Lambda", "outcome", "verdict", "L_final*sqrt(C)", "min_wy2_margin", "class", "pass"
    );
    let name = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    for r in &rows {
        println!(
            "{:>12} {:>18} {:>15} {:>22.15e} {:>16.6e} {:>16} {:>6}",
            r.big_lambda,
            name(r.outcome.map(|o| format!("{o:?}"))),
            name(r.verdict.map(|v| format!("{v:?}"))),
            r.final_l_sqrt_c,
            r.min_wy2_margin,
            name(r.class.map(|c| format!("{c:?}"))),
            r.passed
        );
    }
    if let Some(path) = &args.run.report {
        let text = serde_json::to_string_pretty(&rows).map_err(|e| Exit(EXIT_FAIL, e.into()))?;
        std::fs::write(path, text + "\n").map_err(|e| invalid(e.into()))?;
    }
    Ok(if rows.iter().all(|r| r.passed) {
        0
    } else {
        EXIT_FAIL
    })
}

/// `<stem>.Lambda<value>.csv` beside the requested path.
fn per_run_path(path: &Path, big_lambda: f64) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("profile");
    path.with_file_name(format!("{stem}.Lambda{big_lambda}.csv"))
}

fn cmd_check(args: &CheckArgs) -> Result<u8, Exit> {
    let cfg = args.run.config()?;
    let report = pipeline::check_stored(&cfg, &args.profile)?;
    if let Some(path) = &cfg.report {
        write_report_json(path, &report)?;
    }
    print_report(&report);
    Ok(if report.all_pass() { 0 } else { EXIT_FAIL })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    let result = match &cli.cmd {
        Cmd::Solve(a) => cmd_run(a, Pipeline::General),
        Cmd::Kahler(a) => cmd_run(a, Pipeline::Kahler),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Check(a) => cmd_check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
