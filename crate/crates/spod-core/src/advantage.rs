//! The TD(λ) estimator family over single trajectories: one-step TD errors,
//! λ-returns, generalized advantage estimation (GAE), a TD-error-weighted
//! variant (TDAE) that trades tail weight for the leading error, and the
//! dual-track combination (DTAE) that evaluates GAE on the current value
//! function and TDAE on a lagged snapshot before merging elementwise.
//!
//! All estimators run one backward pass over the trajectory.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{ensure_finite, Error, Result};

/// Rewards `r_1..r_T` paired with values `V(s_0)..V(s_T)`.
///
/// `terminal` marks a true environment termination: the value at the final
/// state is forced to zero. A truncated trajectory keeps its final value as
/// the bootstrap.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryValues {
    rewards: Vec<f64>,
    values: Vec<f64>,
    terminal: bool,
}

impl TrajectoryValues {
    pub fn new(rewards: Vec<f64>, mut values: Vec<f64>, terminal: bool) -> Result<Self> {
        if rewards.is_empty() {
            return Err(Error::Config("trajectory must contain at least one step".into()));
        }
        if values.len() != rewards.len() + 1 {
            return Err(Error::Config(format!(
                "need {} values for {} rewards, got {}",
                rewards.len() + 1,
                rewards.len(),
                values.len()
            )));
        }
        ensure_finite(&rewards, "rewards")?;
        ensure_finite(&values, "values")?;
        if terminal {
            *values.last_mut().expect("nonempty") = 0.0;
        }
        Ok(TrajectoryValues { rewards, values, terminal })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> bool {
        self.terminal
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// One-step TD errors: δ_t = r_{t+1} + γ V(s_{t+1}) − V(s_t).
pub fn td_errors(tv: &TrajectoryValues, gamma: f64) -> Result<Vec<f64>> {
    check_unit("gamma", gamma)?;
    let (r, v) = (tv.rewards(), tv.values());
    Ok((0..tv.len()).map(|t| r[t] + gamma * v[t + 1] - v[t]).collect())
}

fn discounted_delta_sums(deltas: &[f64], gamma: f64, lam: f64) -> Vec<f64> {
    // S_t = Σ_k (γλ)^k δ_{t+k}, by the backward recursion S_t = δ_t + γλ S_{t+1}
    let gl = gamma * lam;
    let mut out = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for t in (0..deltas.len()).rev() {
        acc = deltas[t] + gl * acc;
        out[t] = acc;
    }
    out
}

/// Generalized advantage estimation: A_t = Σ_k (γλ)^k δ_{t+k}.
pub fn gae(tv: &TrajectoryValues, gamma: f64, lam: f64) -> Result<Vec<f64>> {
    check_unit("lambda", lam)?;
    let deltas = td_errors(tv, gamma)?;
    Ok(discounted_delta_sums(&deltas, gamma, lam))
}

/// λ-returns: G^λ_t = V(s_t) + Σ_k (γλ)^k δ_{t+k}.
pub fn lambda_returns(tv: &TrajectoryValues, gamma: f64, lam: f64) -> Result<Vec<f64>> {
    let adv = gae(tv, gamma, lam)?;
    Ok(adv.iter().zip(tv.values()).map(|(a, v)| a + v).collect())
}

/// TD-error-weighted advantage:
/// A_t = (1−α) δ_t + α (1/λ − 1) Σ_k (γλ)^{k+1} δ_{t+k+1}.
///
/// λ = 0 together with α > 0 is rejected: the 1/λ reweighting is undefined
/// there. (With α = 0 the tail vanishes and the estimator is plain δ_t.)
pub fn tdae(tv: &TrajectoryValues, gamma: f64, lam: f64, alpha: f64) -> Result<Vec<f64>> {
    check_unit("lambda", lam)?;
    check_unit("alpha", alpha)?;
    if lam == 0.0 && alpha > 0.0 {
        return Err(Error::Config(
            "tdae is undefined at lambda = 0 with alpha > 0 (the 1/lambda weight diverges)".into(),
        ));
    }
    let deltas = td_errors(tv, gamma)?;
    let sums = discounted_delta_sums(&deltas, gamma, lam);
    let tail_coef = alpha * (1.0 - lam) * gamma;
    let t_last = deltas.len() - 1;
    Ok((0..deltas.len())
        .map(|t| {
            let tail = if t < t_last { sums[t + 1] } else { 0.0 };
            (1.0 - alpha) * deltas[t] + tail_coef * tail
        })
        .collect())
}

/// Elementwise combination rule for the two advantage tracks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombineMode {
    Mean,
    Max,
    Min,
    /// β·A_gae + (1−β)·A_tdae
    Beta(f64),
}

impl CombineMode {
    pub fn validate(&self) -> Result<()> {
        if let CombineMode::Beta(b) = self {
            check_unit("beta", *b)?;
        }
        Ok(())
    }
}

/// Merge per-step GAE and TDAE tracks.
pub fn dtae_combine(gae_track: &[f64], tdae_track: &[f64], mode: CombineMode) -> Result<Vec<f64>> {
    mode.validate()?;
    if gae_track.len() != tdae_track.len() {
        return Err(Error::Config(format!(
            "combine: track lengths differ ({} vs {})",
            gae_track.len(),
            tdae_track.len()
        )));
    }
    Ok(gae_track
        .iter()
        .zip(tdae_track)
        .map(|(&g, &t)| match mode {
            CombineMode::Mean => 0.5 * (g + t),
            CombineMode::Max => g.max(t),
            CombineMode::Min => g.min(t),
            CombineMode::Beta(b) => b * g + (1.0 - b) * t,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvantageConfig {
    pub gamma: f64,
    pub lam: f64,
    pub alpha: f64,
    pub combine: CombineMode,
}

impl AdvantageConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit("gamma", self.gamma)?;
        check_unit("lambda", self.lam)?;
        check_unit("alpha", self.alpha)?;
        self.combine.validate()
    }
}

/// The dual-track estimator: GAE evaluated on the current value function,
/// TDAE on the lagged snapshot, merged elementwise.
pub fn dual_track_advantage(
    rewards: &[f64],
    current_values: &[f64],
    shadow_values: &[f64],
    terminal: bool,
    cfg: &AdvantageConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let current = TrajectoryValues::new(rewards.to_vec(), current_values.to_vec(), terminal)?;
    let shadow = TrajectoryValues::new(rewards.to_vec(), shadow_values.to_vec(), terminal)?;
    let g = gae(&current, cfg.gamma, cfg.lam)?;
    let t = tdae(&shadow, cfg.gamma, cfg.lam, cfg.alpha)?;
    dtae_combine(&g, &t, cfg.combine)
}

/// In-place shift to zero mean and unit standard deviation
/// ((x − mean) / (std + 1e-8), population std). No-op on empty input.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let denom = crate::num::sqrt(var) + 1e-8;
    for a in adv.iter_mut() {
        *a = (*a - mean) / denom;
    }
}
