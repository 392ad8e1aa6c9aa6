//! `mfglab`: configuration-driven runs of the torus MFG solvers and studies.

pub mod cache;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use torus_mfg::report::{Outcome, StudyReport};

use crate::cache::Cache;
use crate::commands::RunContext;
use crate::config::RunConfig;

/// Exit status of a run that completed and passed every verdict.
pub const EXIT_OK: i32 = 0;
/// Exit status of a run that raised an error.
pub const EXIT_ERROR: i32 = 1;
/// Exit status of a run with a failed verdict.
pub const EXIT_VERDICT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mfglab", version, about = "Spectral solvers and studies for mean field games on the torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML sections of key = value pairs).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a setting, e.g. `--set picard.tol=1e-12`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Artifact cache directory (default `<out>/cache`).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads for independent solves (0 uses every core).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the forward-backward system and write the trajectory.
    SolveMfg,
    /// Solve the linearized system for the configured datum.
    SolveLinearized,
    /// Extract the measure-derivative kernel from Dirac probes.
    ExtractKernel,
    /// Evaluate the master equation residual at two time steps.
    CheckMaster,
    /// Fit the first-order expansion remainder rate.
    TaylorRate,
    /// Stability quotients along a shrinking perturbation family.
    Stability,
    /// Negative-norm bound across a datum family.
    HminusBound,
    /// Lipschitz quotients of the kernel and its derivatives.
    KernelRegularity,
    /// Audit the Hamiltonian remainder and derivative assumptions.
    AuditAssumptions,
    /// Sobolev norms of a reference field.
    Norms,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::SolveMfg => "solve-mfg",
            Self::SolveLinearized => "solve-linearized",
            Self::ExtractKernel => "extract-kernel",
            Self::CheckMaster => "check-master",
            Self::TaylorRate => "taylor-rate",
            Self::Stability => "stability",
            Self::HminusBound => "hminus-bound",
            Self::KernelRegularity => "kernel-regularity",
            Self::AuditAssumptions => "audit-assumptions",
            Self::Norms => "norms",
        }
    }
}

fn dispatch(cmd: Command, ctx: &mut RunContext) -> Result<Vec<StudyReport>> {
    use commands::*;
    match cmd {
        Command::SolveMfg => solve_mfg_cmd(ctx),
        Command::SolveLinearized => solve_linearized_cmd(ctx),
        Command::ExtractKernel => extract_kernel_cmd(ctx),
        Command::CheckMaster => check_master_cmd(ctx),
        Command::TaylorRate => taylor_cmd(ctx),
        Command::Stability => stability_cmd(ctx),
        Command::HminusBound => hminus_cmd(ctx),
        Command::KernelRegularity => regularity_cmd(ctx),
        Command::AuditAssumptions => audit_cmd(ctx),
        Command::Norms => norms_cmd(ctx),
    }
}

/// Everything a finished run reports back.
#[derive(Debug)]
pub struct RunOutcome {
    pub status: i32,
    pub reports: Vec<StudyReport>,
    pub cache: cache::CacheStats,
}

fn append_log(out: &PathBuf, lines: &[String]) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out.join("run.log"))
        .context("opening run.log")?;
    for l in lines {
        writeln!(f, "{l}")?;
    }
    Ok(())
}

/// Runs a parsed command line. Errors are returned only when the run could not
/// start or finish; verdict failures are reported through the status.
pub fn execute(cli: &Cli) -> Result<RunOutcome> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.run.out = Some(o.display().to_string());
    }
    if let Some(c) = &cli.cache_dir {
        cfg.run.cache_dir = Some(c.display().to_string());
    }
    let out = PathBuf::from(cfg.run.out.clone().unwrap_or_else(|| "mfglab-out".into()));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let cache_dir = cfg
        .run
        .cache_dir
        .clone()
        .map(PathBuf::from)
        .unwrap_or_else(|| out.join("cache"));
    let name = cli.command.name();
    let mut header = vec![format!("== {name}"), format!("config_hash: {}", cfg.hash())];
    if let Err(e) = cfg.validate() {
        header.push(format!("error: {e:#}"));
        append_log(&out, &header)?;
        return Err(e);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .context("building worker pool")?;
    let mut ctx = RunContext {
        hash: cfg.hash(),
        cfg,
        out: out.clone(),
        cache: Cache::new(Some(&cache_dir))?,
        log: header,
    };
    let start = Instant::now();
    let result = pool.install(|| dispatch(cli.command, &mut ctx));
    let mut lines = std::mem::take(&mut ctx.log);
    lines.extend(ctx.cache.log().iter().cloned());
    let stats = ctx.cache.stats;
    lines.push(format!(
        "cache: hits={} computes={} evictions={}",
        stats.hits, stats.computes, stats.evictions
    ));
    lines.push(format!("elapsed: {:.3}s", start.elapsed().as_secs_f64()));
    match result {
        Ok(reports) => {
            let failed = reports
                .iter()
                .flat_map(|r| &r.verdicts)
                .any(|v| v.outcome == Outcome::Fail);
            for r in &reports {
                lines.push(r.summary());
            }
            let status = if failed { EXIT_VERDICT } else { EXIT_OK };
            lines.push(format!("status: {status}"));
            append_log(&out, &lines)?;
            Ok(RunOutcome { status, reports, cache: stats })
        }
        Err(e) => {
            lines.push(format!("error: {e:#}"));
            append_log(&out, &lines)?;
            Err(e)
        }
    }
}

/// Parses arguments, runs and maps the result to an exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for r in &outcome.reports {
                println!("{}", r.summary());
            }
            outcome.status
        }
        Err(e) => {
            eprintln!("mfglab {}: error: {e:#}", cli.command.name());
            EXIT_ERROR
        }
    }
}
