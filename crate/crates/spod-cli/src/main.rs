//! `spod`: train, sweep, ablate, check, and eval entry points around the
//! core library. Exit codes: 0 success, 1 usage error, 2 numeric failure
//! (after writing a diagnostic checkpoint), 3 check failure.

mod checkpoint;
mod config;
mod csvio;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Check(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<spod_core::Error> for CliError {
    fn from(e: spod_core::Error) -> Self {
        match e {
            spod_core::Error::Numeric(m) => CliError::Numeric(m),
            spod_core::Error::Config(m) | spod_core::Error::Usage(m) => CliError::Usage(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "spod",
    version,
    about = "On-policy actor-critic training with a dual-track advantage estimator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value config file; missing keys fall back to defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Single seed to run.
    #[arg(long, value_name = "N", conflicts_with = "seeds")]
    seed: Option<u64>,

    /// Seed range, N..M (half-open) or N..=M (inclusive).
    #[arg(long, value_name = "N..M")]
    seeds: Option<String>,

    /// Output directory root.
    #[arg(long, value_name = "DIR", default_value = "runs")]
    out: PathBuf,

    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train over one or more seeds and write per-seed plus aggregate CSVs.
    Train(RunArgs),
    /// Run one training per axis value, shared seeds across values.
    Sweep {
        /// Config key to vary.
        axis: String,
        /// Values the axis takes, one training run each.
        values: Vec<String>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Four paired runs: full algorithm, single-track estimator, zero
    /// entropy temperature, and unclipped surrogate.
    Ablate(RunArgs),
    /// Run the numerical identity and bound checks and report each.
    Check {
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
    },
    /// Roll out a checkpoint's mean action greedily and report returns.
    Eval {
        /// Checkpoint file written by a training run.
        checkpoint: PathBuf,
        #[arg(long, value_name = "N", default_value_t = 10)]
        episodes: usize,
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
    },
}

fn parse_seed_range(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |msg: &str| CliError::Usage(format!("--seeds {text:?}: {msg}"));
    let parse = |part: &str| -> Result<u64, CliError> {
        part.trim()
            .parse()
            .map_err(|_| bad(&format!("cannot parse {:?} as a seed", part.trim())))
    };
    let (lo, hi) = if let Some((a, b)) = text.split_once("..=") {
        (parse(a)?, parse(b)?.checked_add(1).ok_or_else(|| bad("range end overflows"))?)
    } else if let Some((a, b)) = text.split_once("..") {
        (parse(a)?, parse(b)?)
    } else {
        let n = parse(text)?;
        (n, n + 1)
    };
    if lo >= hi {
        return Err(bad("range is empty"));
    }
    Ok((lo..hi).collect())
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for kv in &args.set {
        cfg.apply_override(kv)?;
    }
    Ok(cfg)
}

fn resolve_seeds(args: &RunArgs, cfg: &RunConfig) -> Result<Vec<u64>, CliError> {
    if let Some(range) = &args.seeds {
        parse_seed_range(range)
    } else if let Some(seed) = args.seed {
        Ok(vec![seed])
    } else {
        Ok(vec![cfg.seed])
    }
}

fn real_main(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Train(args) => {
            let cfg = load_config(&args)?;
            let seeds = resolve_seeds(&args, &cfg)?;
            let manifest = runner::run_train(&cfg, &seeds, &args.out.join("train"), "train")?;
            runner::print_summary(&manifest);
            Ok(())
        }
        Cmd::Sweep { axis, values, args } => {
            let cfg = load_config(&args)?;
            let seeds = resolve_seeds(&args, &cfg)?;
            let manifests = runner::run_sweep(&cfg, &axis, &values, &seeds, &args.out)?;
            for m in &manifests {
                runner::print_summary(m);
            }
            Ok(())
        }
        Cmd::Ablate(args) => {
            let cfg = load_config(&args)?;
            let seeds = resolve_seeds(&args, &cfg)?;
            let manifests = runner::run_ablate(&cfg, &seeds, &args.out.join("ablate"))?;
            for m in &manifests {
                runner::print_summary(m);
            }
            Ok(())
        }
        Cmd::Check { seed } => run_check(seed),
        Cmd::Eval { checkpoint, episodes, seed } => run_eval(&checkpoint, episodes, seed),
    }
}

fn run_check(seed: u64) -> Result<(), CliError> {
    let reports = spod_core::theory::standard_checks(seed)?;
    let mut failures = 0usize;
    for report in &reports {
        println!("{}", report.summary());
        if !report.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(CliError::Check(format!(
            "{failures} of {} checks failed",
            reports.len()
        )));
    }
    println!("all {} checks passed", reports.len());
    Ok(())
}

fn run_eval(path: &std::path::Path, episodes: usize, seed: u64) -> Result<(), CliError> {
    if episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let ckpt = checkpoint::load(path)?;
    let mut env = spod_core::envs::make_env(&ckpt.env)?;
    if env.spec().state_dim != ckpt.policy.state_dim()
        || env.spec().action_dim != ckpt.policy.action_dim()
    {
        return Err(CliError::Usage(format!(
            "checkpoint dimensions do not match environment {}",
            ckpt.env
        )));
    }
    let mut returns = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut state = env.reset(seed.wrapping_add(ep as u64));
        let mut total = 0.0;
        loop {
            let action = ckpt.policy.mean_action(&state)?;
            let step = env.step(&action)?;
            total += step.reward;
            state = step.state;
            if step.terminated || step.truncated {
                break;
            }
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let min = returns.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "eval {} on {}: episodes={episodes} mean_return={mean} min_return={min} max_return={max}",
        path.display(),
        ckpt.env
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
