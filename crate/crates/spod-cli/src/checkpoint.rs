//! Checkpoints: JSON with layer shapes and row-major values. Every f64 is
//! stored as the 16-hex-digit bit pattern of its IEEE representation, so a
//! save/load cycle is bit-exact regardless of decimal formatting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use spod_core::nn::{Activation, Matrix, Mlp};
use spod_core::policy::{GaussianPolicy, ValueNet};

use crate::CliError;

pub const CHECKPOINT_VERSION: u32 = 1;

fn encode(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{:016x}", v.to_bits())).collect()
}

fn decode(values: &[String], what: &str) -> Result<Vec<f64>, CliError> {
    values
        .iter()
        .map(|s| {
            u64::from_str_radix(s, 16)
                .map(f64::from_bits)
                .map_err(|_| CliError::Usage(format!("checkpoint {what}: bad hex value {s:?}")))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct LayerDump {
    rows: usize,
    cols: usize,
    w: Vec<String>,
    b: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NetDump {
    activation: String,
    layers: Vec<LayerDump>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    env: String,
    policy: NetDump,
    log_std: Vec<String>,
    value: NetDump,
}

#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub env: String,
    pub policy: GaussianPolicy,
    /// Reconstructed and validated on load even though greedy eval never
    /// queries it; a checkpoint with a broken value net should fail loudly.
    #[allow(dead_code)]
    pub value: ValueNet,
}

fn dump_net(net: &Mlp) -> NetDump {
    let layers = net
        .weights()
        .iter()
        .zip(net.biases())
        .map(|(w, b)| LayerDump {
            rows: w.rows(),
            cols: w.cols(),
            w: encode(w.as_slice()),
            b: encode(b),
        })
        .collect();
    NetDump { activation: "relu".into(), layers }
}

fn rebuild_net(dump: &NetDump, what: &str) -> Result<Mlp, CliError> {
    let activation = match dump.activation.as_str() {
        "relu" => Activation::Relu,
        other => {
            return Err(CliError::Usage(format!(
                "checkpoint {what}: unknown activation {other:?}"
            )))
        }
    };
    let mut weights = Vec::with_capacity(dump.layers.len());
    let mut biases = Vec::with_capacity(dump.layers.len());
    for (i, layer) in dump.layers.iter().enumerate() {
        let w = decode(&layer.w, what)?;
        let b = decode(&layer.b, what)?;
        if b.len() != layer.rows {
            return Err(CliError::Usage(format!(
                "checkpoint {what}: layer {i} bias length {} does not match {} rows",
                b.len(),
                layer.rows
            )));
        }
        weights.push(Matrix::from_vec(layer.rows, layer.cols, w)?);
        biases.push(b);
    }
    Ok(Mlp::new(weights, biases, activation)?)
}

pub fn save(
    path: &Path,
    env: &str,
    policy: &GaussianPolicy,
    value: &ValueNet,
) -> Result<(), CliError> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        env: env.to_string(),
        policy: dump_net(policy.mean_net()),
        log_std: encode(policy.log_std()),
        value: dump_net(value.net()),
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Usage(format!("checkpoint serialization: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<LoadedCheckpoint, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("checkpoint {}: {e}", path.display())))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CliError::Usage(format!(
            "checkpoint {}: version {} unsupported (expected {CHECKPOINT_VERSION})",
            path.display(),
            file.version
        )));
    }
    let policy_net = rebuild_net(&file.policy, "policy")?;
    let log_std = decode(&file.log_std, "log_std")?;
    let policy = GaussianPolicy::new(policy_net, log_std)?;
    let value = ValueNet::new(rebuild_net(&file.value, "value")?)?;
    Ok(LoadedCheckpoint { env: file.env, policy, value })
}
