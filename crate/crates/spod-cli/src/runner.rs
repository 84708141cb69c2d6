//! Orchestration: run each seed to completion (in parallel waves capped by
//! DTAE_RL_THREADS), then write per-seed CSVs, the aggregate CSV, final
//! checkpoints, and a manifest tying them together. Everything a run needs
//! to be reproduced is embedded in the manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use spod_core::trainer::{IterationMetrics, Trainer};

use crate::config::{RunConfig, SWEEPABLE_KEYS};
use crate::{checkpoint, csvio, CliError};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub label: String,
    /// Canonical key=value snapshot; parsing it reproduces the run.
    pub config: String,
    pub seeds: Vec<u64>,
    /// Relative to the manifest's own directory.
    pub seed_csvs: Vec<String>,
    pub seed_checkpoints: Vec<String>,
    pub aggregate_csv: String,
    pub csv_schema_version: u32,
    /// Mean over seeds of the last iteration's mean return; absent when
    /// total_steps was too small for a single iteration.
    pub final_mean_return: Option<f64>,
}

/// Worker cap: DTAE_RL_THREADS when set and sane, else the machine's
/// available parallelism.
fn worker_cap() -> usize {
    if let Ok(raw) = std::env::var("DTAE_RL_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => return n,
            _ => eprintln!(
                "warning: ignoring DTAE_RL_THREADS={raw:?} (expected a positive integer)"
            ),
        }
    }
    std::thread::available_parallelism().map(usize::from).unwrap_or(1)
}

/// Train one seed to completion. On a numeric failure the current network
/// state is dumped next to the CSVs before the error propagates.
fn run_one_seed(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Vec<IterationMetrics>, CliError> {
    let tcfg = cfg.to_train_config(seed)?;
    let mut trainer = Trainer::new(tcfg)?;
    let mut rows = Vec::new();
    while !trainer.is_done() {
        match trainer.run_iteration() {
            Ok(m) => rows.push(m),
            Err(e @ spod_core::Error::Numeric(_)) => {
                let diag = dir.join(format!("seed_{seed}_diagnostic.ckpt"));
                checkpoint::save(&diag, &cfg.env, trainer.policy(), trainer.value())?;
                return Err(CliError::Numeric(format!(
                    "seed {seed}: {e}; network state saved to {}",
                    diag.display()
                )));
            }
            Err(e) => return Err(e.into()),
        }
    }
    csvio::write_seed_csv(&dir.join(format!("seed_{seed}.csv")), &rows)?;
    checkpoint::save(
        &dir.join(format!("seed_{seed}.ckpt")),
        &cfg.env,
        trainer.policy(),
        trainer.value(),
    )?;
    Ok(rows)
}

/// Run every seed, capped waves at a time. Results come back in seed order
/// regardless of scheduling, so downstream output is deterministic.
fn run_all_seeds(
    cfg: &RunConfig,
    seeds: &[u64],
    dir: &Path,
) -> Result<Vec<Vec<IterationMetrics>>, CliError> {
    let cap = worker_cap();
    let mut all = Vec::with_capacity(seeds.len());
    for wave in seeds.chunks(cap.max(1)) {
        let mut results: Vec<Option<Result<Vec<IterationMetrics>, CliError>>> =
            (0..wave.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|&seed| scope.spawn(move || run_one_seed(cfg, seed, dir)))
                .collect();
            for (slot, handle) in results.iter_mut().zip(handles) {
                *slot = Some(handle.join().unwrap_or_else(|_| {
                    Err(CliError::Numeric("training worker panicked".into()))
                }));
            }
        });
        for r in results {
            all.push(r.expect("every wave slot is filled")?);
        }
    }
    Ok(all)
}

pub fn run_train(
    cfg: &RunConfig,
    seeds: &[u64],
    dir: &Path,
    label: &str,
) -> Result<RunManifest, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Usage("no seeds to run".into()));
    }
    std::fs::create_dir_all(dir)?;
    let per_seed = run_all_seeds(cfg, seeds, dir)?;
    csvio::write_aggregate_csv(&dir.join("aggregate.csv"), &per_seed)?;

    let finals: Vec<f64> = per_seed
        .iter()
        .filter_map(|rows| rows.last().map(|m| m.mean_return))
        .collect();
    let final_mean_return = if finals.len() == seeds.len() && !finals.is_empty() {
        Some(finals.iter().sum::<f64>() / finals.len() as f64)
    } else {
        None
    };

    let mut snapshot = cfg.clone();
    snapshot.seed = seeds[0];
    let manifest = RunManifest {
        version: MANIFEST_VERSION,
        label: label.to_string(),
        config: snapshot.canonical_text(),
        seeds: seeds.to_vec(),
        seed_csvs: seeds.iter().map(|s| format!("seed_{s}.csv")).collect(),
        seed_checkpoints: seeds.iter().map(|s| format!("seed_{s}.ckpt")).collect(),
        aggregate_csv: "aggregate.csv".into(),
        csv_schema_version: csvio::CSV_SCHEMA_VERSION,
        final_mean_return,
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Usage(format!("manifest serialization: {e}")))?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(manifest)
}

pub fn print_summary(m: &RunManifest) {
    match m.final_mean_return {
        Some(r) => println!("{}: final mean return over {} seeds: {r}", m.label, m.seeds.len()),
        None => println!("{}: no completed iterations ({} seeds)", m.label, m.seeds.len()),
    }
}

pub fn run_sweep(
    cfg: &RunConfig,
    axis: &str,
    values: &[String],
    seeds: &[u64],
    out: &Path,
) -> Result<Vec<RunManifest>, CliError> {
    if !SWEEPABLE_KEYS.contains(&axis) {
        return Err(CliError::Usage(format!(
            "unknown sweep axis {axis:?}; sweepable keys: {}",
            SWEEPABLE_KEYS.join(", ")
        )));
    }
    if values.is_empty() {
        eprintln!("warning: sweep over {axis} given no values, nothing to run");
        return Ok(Vec::new());
    }
    let root = out.join(format!("sweep_{axis}"));
    let mut manifests = Vec::with_capacity(values.len());
    for value in values {
        let mut var = cfg.clone();
        var.set(axis, value)?;
        let label = format!("{axis}={value}");
        let dir = root.join(&label);
        manifests.push(run_train(&var, seeds, &dir, &label)?);
    }
    Ok(manifests)
}

/// The four ablation arms, full algorithm first.
pub fn ablation_variants(cfg: &RunConfig) -> Vec<(&'static str, RunConfig)> {
    let mut gae_only = cfg.clone();
    gae_only.use_dtae = false;
    let mut eta_zero = cfg.clone();
    eta_zero.eta_0 = 0.0;
    let mut no_clip = cfg.clone();
    no_clip.use_clip = false;
    vec![
        ("spod", cfg.clone()),
        ("gae_only", gae_only),
        ("eta_zero", eta_zero),
        ("no_clip", no_clip),
    ]
}

pub fn run_ablate(cfg: &RunConfig, seeds: &[u64], dir: &Path) -> Result<Vec<RunManifest>, CliError> {
    let mut manifests = Vec::with_capacity(4);
    for (label, variant) in ablation_variants(cfg) {
        let sub: PathBuf = dir.join(label);
        manifests.push(run_train(&variant, seeds, &sub, label)?);
    }
    Ok(manifests)
}
