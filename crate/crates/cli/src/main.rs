//! `bstable`: experiment runner for branching stable processes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod fail;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bstable::Streams;
use clap::{Parser, Subcommand};

use crate::commands::{Ctx, Outcome};
use crate::config::RunConfig;
use crate::fail::CliError;
use crate::output::{config_hash, OutDir, RunEntry};

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(
    name = "bstable",
    version,
    about = "Tails of the maximum of branching stable processes"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Exit with code 4 when the verdict fails.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Regime and predicted tail shape, without simulation.
    Predict,
    /// Monte Carlo tail of the maximum, fit and verdict.
    Tail,
    /// Survival probability of the critical population.
    Survival,
    /// Fixed point of the integral equation for the tail.
    SolveIntegral,
    /// Limit profile of the critical spectrally negative case.
    SolvePhi,
    /// Small-λ limits of the Laplace functionals.
    VerifyLimits,
    /// Feynman–Kac representation check.
    FkCheck,
    /// Summary of all reports in the output directory.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Predict => "predict",
            Command::Tail => "tail",
            Command::Survival => "survival",
            Command::SolveIntegral => "solve-integral",
            Command::SolvePhi => "solve-phi",
            Command::VerifyLimits => "verify-limits",
            Command::FkCheck => "fk-check",
            Command::Report => "report",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    if cfg.workers == Some(0) {
        return Err(CliError::config("workers must be at least 1".into()));
    }
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let workers = cfg.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    cfg.seed = Some(seed);
    cfg.workers = Some(workers);
    let model = cfg.model()?;
    let canonical = cfg.canonical();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    let out = OutDir::create(&cli.out)?;
    let mut ctx = Ctx {
        cfg,
        model,
        streams: Streams::new(seed),
        out,
    };
    let command = cli.command;
    let outcome: Outcome = pool.install(|| match command {
        Command::Predict => commands::cmd_predict(&mut ctx),
        Command::Tail => commands::cmd_tail(&mut ctx),
        Command::Survival => commands::cmd_survival(&mut ctx),
        Command::SolveIntegral => commands::cmd_solve_integral(&mut ctx),
        Command::SolvePhi => commands::cmd_solve_phi(&mut ctx),
        Command::VerifyLimits => commands::cmd_verify_limits(&mut ctx),
        Command::FkCheck => commands::cmd_fk_check(&mut ctx),
        Command::Report => commands::cmd_report(&mut ctx),
    })?;

    let entry = RunEntry {
        config_hash: config_hash(&canonical),
        config: canonical,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        workers,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs: ctx.out.written().to_vec(),
        verdict: outcome.verdict.summary(),
    };
    ctx.out.record_run(command.name(), entry)?;
    if command != Command::Predict && command != Command::Report {
        for c in &outcome.verdict.checks {
            let status = if c.pass {
                "pass"
            } else if c.informational {
                "info"
            } else {
                "FAIL"
            };
            eprintln!("{:<5} {} = {}", status, c.name, c.value);
        }
    }
    if let Some(e) = outcome.deferred {
        return Err(e);
    }
    if cli.check && !outcome.verdict.pass {
        return Err(CliError::verdict(format!(
            "failed checks: {}",
            outcome.verdict.summary().failed.join(", ")
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code as u8)
        }
    }
}
