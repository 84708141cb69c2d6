//! Flat key=value run configuration: one key per line, `#` comments, every
//! knob named. A partial file (or none) falls back to the stock defaults;
//! unknown keys are rejected by name. `canonical_text` always emits the full
//! key set in a fixed order so embedded snapshots diff cleanly and round-trip
//! exactly.

use std::fmt::Write as _;
use std::path::Path;

use spod_core::advantage::CombineMode;
use spod_core::trainer::{EntropyState, TrainConfig, ValueTarget};

use crate::CliError;

/// Every accepted key, in emission order.
pub const CANONICAL_KEYS: [&str; 23] = [
    "env",
    "seed",
    "total_steps",
    "steps_per_batch",
    "epochs_per_batch",
    "minibatch_size",
    "hidden",
    "gamma",
    "lambda",
    "alpha",
    "combine",
    "beta",
    "lr_0",
    "clip_eps_0",
    "eta_0",
    "entropy_loss_coef",
    "value_loss_coef",
    "grad_clip_norm",
    "normalize_advantages",
    "use_dtae",
    "use_clip",
    "entropy_state",
    "value_target",
];

/// Keys it makes sense to sweep over (everything except the run identity).
pub const SWEEPABLE_KEYS: [&str; 20] = [
    "total_steps",
    "steps_per_batch",
    "epochs_per_batch",
    "minibatch_size",
    "hidden",
    "gamma",
    "lambda",
    "alpha",
    "combine",
    "beta",
    "lr_0",
    "clip_eps_0",
    "eta_0",
    "entropy_loss_coef",
    "value_loss_coef",
    "grad_clip_norm",
    "normalize_advantages",
    "use_dtae",
    "use_clip",
    "entropy_state",
];

/// A full run configuration in file-level terms. `combine` and `beta` stay
/// separate so either can be set in any order; they merge into one
/// [`CombineMode`] when the trainer config is built.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: String,
    pub seed: u64,
    pub total_steps: usize,
    pub steps_per_batch: usize,
    pub epochs_per_batch: usize,
    pub minibatch_size: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub combine: String,
    pub beta: f64,
    pub lr_0: f64,
    pub clip_eps_0: f64,
    pub eta_0: f64,
    pub entropy_loss_coef: f64,
    pub value_loss_coef: f64,
    pub grad_clip_norm: f64,
    pub normalize_advantages: bool,
    pub use_dtae: bool,
    pub use_clip: bool,
    pub entropy_state: String,
    pub value_target: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::new("point_mass", 0, 150_000);
        RunConfig {
            env: t.env,
            seed: t.seed,
            total_steps: t.total_steps,
            steps_per_batch: t.steps_per_batch,
            epochs_per_batch: t.epochs_per_batch,
            minibatch_size: t.minibatch_size,
            hidden: t.hidden,
            gamma: t.gamma,
            lambda: t.lam,
            alpha: t.alpha,
            combine: "mean".into(),
            beta: 0.99,
            lr_0: t.lr_0,
            clip_eps_0: t.clip_eps_0,
            eta_0: t.eta_0,
            entropy_loss_coef: t.entropy_loss_coef,
            value_loss_coef: t.value_loss_coef,
            grad_clip_norm: t.grad_clip_norm,
            normalize_advantages: t.normalize_advantages,
            use_dtae: t.use_dtae,
            use_clip: t.use_clip,
            entropy_state: "next".into(),
            value_target: "monte_carlo".into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse value {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::Usage(format!(
            "config key {key}: expected true or false, got {v:?}"
        ))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "env" => self.env = v.to_string(),
            "seed" => self.seed = parse_num(key, v)?,
            "total_steps" => self.total_steps = parse_num(key, v)?,
            "steps_per_batch" => self.steps_per_batch = parse_num(key, v)?,
            "epochs_per_batch" => self.epochs_per_batch = parse_num(key, v)?,
            "minibatch_size" => self.minibatch_size = parse_num(key, v)?,
            "hidden" => {
                self.hidden = v
                    .split(',')
                    .map(|p| parse_num::<usize>(key, p.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "gamma" => self.gamma = parse_num(key, v)?,
            "lambda" => self.lambda = parse_num(key, v)?,
            "alpha" => self.alpha = parse_num(key, v)?,
            "combine" => match v {
                "mean" | "max" | "min" | "beta" => self.combine = v.to_string(),
                _ => {
                    return Err(CliError::Usage(format!(
                        "config key combine: expected mean, max, min, or beta, got {v:?}"
                    )))
                }
            },
            "beta" => self.beta = parse_num(key, v)?,
            "lr_0" => self.lr_0 = parse_num(key, v)?,
            "clip_eps_0" => self.clip_eps_0 = parse_num(key, v)?,
            "eta_0" => self.eta_0 = parse_num(key, v)?,
            "entropy_loss_coef" => self.entropy_loss_coef = parse_num(key, v)?,
            "value_loss_coef" => self.value_loss_coef = parse_num(key, v)?,
            "grad_clip_norm" => self.grad_clip_norm = parse_num(key, v)?,
            "normalize_advantages" => self.normalize_advantages = parse_bool(key, v)?,
            "use_dtae" => self.use_dtae = parse_bool(key, v)?,
            "use_clip" => self.use_clip = parse_bool(key, v)?,
            "entropy_state" => match v {
                "next" | "current" => self.entropy_state = v.to_string(),
                _ => {
                    return Err(CliError::Usage(format!(
                        "config key entropy_state: expected next or current, got {v:?}"
                    )))
                }
            },
            "value_target" => match v {
                "monte_carlo" | "lambda_return" => self.value_target = v.to_string(),
                _ => {
                    return Err(CliError::Usage(format!(
                        "config key value_target: expected monte_carlo or lambda_return, got {v:?}"
                    )))
                }
            },
            _ => {
                return Err(CliError::Usage(format!("unknown config key: {key}")));
            }
        }
        Ok(())
    }

    /// Parse `key=value` lines; blank lines and `#` comments skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// One `--set key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {kv:?}")))?;
        self.set(key.trim(), value)
    }

    pub fn value_of(&self, key: &str) -> String {
        match key {
            "env" => self.env.clone(),
            "seed" => self.seed.to_string(),
            "total_steps" => self.total_steps.to_string(),
            "steps_per_batch" => self.steps_per_batch.to_string(),
            "epochs_per_batch" => self.epochs_per_batch.to_string(),
            "minibatch_size" => self.minibatch_size.to_string(),
            "hidden" => {
                let parts: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
                parts.join(",")
            }
            "gamma" => self.gamma.to_string(),
            "lambda" => self.lambda.to_string(),
            "alpha" => self.alpha.to_string(),
            "combine" => self.combine.clone(),
            "beta" => self.beta.to_string(),
            "lr_0" => self.lr_0.to_string(),
            "clip_eps_0" => self.clip_eps_0.to_string(),
            "eta_0" => self.eta_0.to_string(),
            "entropy_loss_coef" => self.entropy_loss_coef.to_string(),
            "value_loss_coef" => self.value_loss_coef.to_string(),
            "grad_clip_norm" => self.grad_clip_norm.to_string(),
            "normalize_advantages" => self.normalize_advantages.to_string(),
            "use_dtae" => self.use_dtae.to_string(),
            "use_clip" => self.use_clip.to_string(),
            "entropy_state" => self.entropy_state.clone(),
            "value_target" => self.value_target.clone(),
            _ => unreachable!("value_of called with non-canonical key {key}"),
        }
    }

    /// The full key set in canonical order, `key=value` per line.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for key in CANONICAL_KEYS {
            let _ = writeln!(out, "{key}={}", self.value_of(key));
        }
        out
    }

    /// Trainer-level config for one seed.
    pub fn to_train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let combine = match self.combine.as_str() {
            "mean" => CombineMode::Mean,
            "max" => CombineMode::Max,
            "min" => CombineMode::Min,
            "beta" => CombineMode::Beta(self.beta),
            _ => unreachable!("combine validated on set"),
        };
        let mut t = TrainConfig::new(&self.env, seed, self.total_steps);
        t.steps_per_batch = self.steps_per_batch;
        t.epochs_per_batch = self.epochs_per_batch;
        t.minibatch_size = self.minibatch_size;
        t.hidden = self.hidden.clone();
        t.gamma = self.gamma;
        t.lam = self.lambda;
        t.alpha = self.alpha;
        t.combine = combine;
        t.lr_0 = self.lr_0;
        t.clip_eps_0 = self.clip_eps_0;
        t.eta_0 = self.eta_0;
        t.entropy_loss_coef = self.entropy_loss_coef;
        t.value_loss_coef = self.value_loss_coef;
        t.grad_clip_norm = self.grad_clip_norm;
        t.normalize_advantages = self.normalize_advantages;
        t.use_dtae = self.use_dtae;
        t.use_clip = self.use_clip;
        t.entropy_state = match self.entropy_state.as_str() {
            "next" => EntropyState::NextState,
            "current" => EntropyState::CurrentState,
            _ => unreachable!("entropy_state validated on set"),
        };
        t.value_target = match self.value_target.as_str() {
            "monte_carlo" => ValueTarget::MonteCarlo,
            "lambda_return" => ValueTarget::LambdaReturn,
            _ => unreachable!("value_target validated on set"),
        };
        t.validate().map_err(CliError::from)?;
        Ok(t)
    }
}
