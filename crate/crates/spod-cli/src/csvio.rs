//! CSV emission. The schema is fixed; the first line names it and its
//! version, the second is the header row. Floats go through `Display`,
//! which prints the shortest string that parses back to the same f64, so
//! identical runs produce identical bytes.

use std::io::Write;
use std::path::Path;

use spod_core::trainer::IterationMetrics;

use crate::CliError;

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const SEED_HEADER: &str = "step,mean_return,min_return,max_return,policy_loss,value_loss,\
     mean_entropy,mean_kl,clip_fraction,lr,clip_eps,eta,skipped_minibatches";

pub const AGGREGATE_HEADER: &str = "step,return_mean,return_min,return_max,policy_loss_mean,\
     value_loss_mean,entropy_mean,kl_mean,clip_fraction_mean";

fn schema_line(kind: &str) -> String {
    format!("# spod-csv v{CSV_SCHEMA_VERSION} {kind}")
}

pub fn write_seed_csv(path: &Path, rows: &[IterationMetrics]) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&schema_line("per-seed"));
    out.push('\n');
    out.push_str(SEED_HEADER);
    out.push('\n');
    for m in rows {
        let line = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            m.step,
            m.mean_return,
            m.min_return,
            m.max_return,
            m.policy_loss,
            m.value_loss,
            m.mean_entropy,
            m.mean_kl,
            m.clip_fraction,
            m.lr,
            m.clip_eps,
            m.eta,
            m.skipped_minibatches
        );
        out.push_str(&line);
    }
    write_atomically(path, out.as_bytes())
}

/// One aggregate row per step index that every seed completed: mean/min/max
/// of the per-seed mean returns, plus plain means of the loss diagnostics.
pub fn write_aggregate_csv(path: &Path, per_seed: &[Vec<IterationMetrics>]) -> Result<(), CliError> {
    let n_rows = per_seed.iter().map(Vec::len).min().unwrap_or(0);
    let mut out = String::new();
    out.push_str(&schema_line("aggregate"));
    out.push('\n');
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for i in 0..n_rows {
        let step = per_seed[0][i].step;
        for rows in per_seed {
            if rows[i].step != step {
                return Err(CliError::Usage(format!(
                    "per-seed step grids disagree at row {i}: {} vs {}",
                    step, rows[i].step
                )));
            }
        }
        let n = per_seed.len() as f64;
        let mean = |f: fn(&IterationMetrics) -> f64| -> f64 {
            per_seed.iter().map(|rows| f(&rows[i])).sum::<f64>() / n
        };
        let ret_min = per_seed
            .iter()
            .map(|rows| rows[i].mean_return)
            .fold(f64::INFINITY, f64::min);
        let ret_max = per_seed
            .iter()
            .map(|rows| rows[i].mean_return)
            .fold(f64::NEG_INFINITY, f64::max);
        let line = format!(
            "{},{},{},{},{},{},{},{},{}\n",
            step,
            mean(|m| m.mean_return),
            ret_min,
            ret_max,
            mean(|m| m.policy_loss),
            mean(|m| m.value_loss),
            mean(|m| m.mean_entropy),
            mean(|m| m.mean_kl),
            mean(|m| m.clip_fraction)
        );
        out.push_str(&line);
    }
    write_atomically(path, out.as_bytes())
}

/// Write via a temp file + rename so a crash never leaves a truncated CSV
/// next to a manifest that claims it is complete.
fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
