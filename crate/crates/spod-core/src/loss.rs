//! Minibatch losses and their exact parameter gradients: the clipped
//! probability-ratio surrogate (with the temperature-weighted entropy
//! difference folded into each sample's weight) and mean-squared-error value
//! regression.
//!
//! Sign convention: both functions return a LOSS to minimize; the surrogate
//! is the negated objective.

use alloc::vec;
use alloc::vec::Vec;

use crate::nn::Mlp;
use crate::num;
use crate::policy::{gaussian_log_prob, GaussianPolicy, ValueNet};
use crate::{Error, Result};

/// Flattened training data for one iteration: one row per environment step,
/// fixed at collection time.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    /// Entropy of the collecting policy at each sample's reference state
    /// (the next state by default), the constant side of the entropy
    /// difference term.
    pub old_entropies: Vec<f64>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n == 0 {
            return Err(Error::Config("sample set is empty".into()));
        }
        if self.actions.len() != n
            || self.old_log_probs.len() != n
            || self.advantages.len() != n
            || self.value_targets.len() != n
            || self.old_entropies.len() != n
        {
            return Err(Error::Config("sample set column lengths disagree".into()));
        }
        crate::ensure_finite(&self.old_log_probs, "old log probs")?;
        crate::ensure_finite(&self.advantages, "advantages")?;
        crate::ensure_finite(&self.value_targets, "value targets")?;
        crate::ensure_finite(&self.old_entropies, "old entropies")?;
        Ok(())
    }
}

/// Knobs of the surrogate for one gradient step (schedules already applied).
#[derive(Debug, Clone, Copy)]
pub struct SurrogateSettings {
    pub clip_eps: f64,
    pub eta: f64,
    pub entropy_loss_coef: f64,
    /// false: plain ratio objective with no clipping (ablation).
    pub use_clip: bool,
}

/// Loss value and gradients for one minibatch of the surrogate.
#[derive(Debug, Clone)]
pub struct SurrogateReport {
    pub loss: f64,
    pub net_grads: Mlp,
    pub log_std_grads: Vec<f64>,
    /// Fraction of samples whose ratio left the clip interval.
    pub clip_fraction: f64,
}

/// Negated clipped-ratio objective over the minibatch `idx`:
///
///   loss = -mean_i min(rho_i * T_i, clip(rho_i, 1 -/+ eps) * T_i)
///   rho_i = exp(log pi(a_i|s_i) - old_log_prob_i)
///   T_i   = advantage_i + coef * eta * (H(pi) - old_entropy_i)
///
/// H(pi) is recomputed here because the policy moves between gradient steps;
/// gradients flow through both rho and H. Returns Ok(None), touching nothing,
/// when any ratio is non-finite so the caller can skip the minibatch.
pub fn clipped_surrogate_loss(
    policy: &GaussianPolicy,
    set: &SampleSet,
    idx: &[usize],
    s: &SurrogateSettings,
) -> Result<Option<SurrogateReport>> {
    if idx.is_empty() {
        return Err(Error::Config("empty minibatch".into()));
    }
    if s.clip_eps < 0.0 || !s.clip_eps.is_finite() {
        return Err(Error::Config("clip_eps must be finite and nonnegative".into()));
    }
    let inv_b = 1.0 / idx.len() as f64;
    let action_dim = policy.action_dim();
    let ls = policy.clamped_log_std();
    let sigma: Vec<f64> = ls.iter().map(|&v| num::exp(v)).collect();
    let mask = policy.clamp_mask();
    let h_new = policy.entropy_closed();

    let mut loss = 0.0;
    let mut net_grads = policy.mean_net().zeros_like();
    let mut log_std_grads = vec![0.0; action_dim];
    let mut left_clip_interval = 0usize;
    let mut d_mean = vec![0.0; action_dim];

    for &i in idx {
        let cache = policy.mean_net().forward_cached(&set.states[i])?;
        let mean = cache.output();
        let log_prob = gaussian_log_prob(mean, &ls, &sigma, &set.actions[i]);
        let ratio = num::exp(log_prob - set.old_log_probs[i]);
        if !ratio.is_finite() {
            return Ok(None);
        }
        let mut t = set.advantages[i];
        if s.eta != 0.0 {
            t += s.entropy_loss_coef * s.eta * (h_new - set.old_entropies[i]);
        }

        // branch selection: unclipped objective rho*T vs clipped-ratio one
        let (objective, ratio_weight, t_weight) = if s.use_clip {
            let clipped_ratio = ratio.clamp(1.0 - s.clip_eps, 1.0 + s.clip_eps);
            if (ratio - 1.0).abs() > s.clip_eps {
                left_clip_interval += 1;
            }
            let unclipped = ratio * t;
            let clipped = clipped_ratio * t;
            if unclipped <= clipped {
                (unclipped, ratio * t, ratio)
            } else {
                // constant ratio: no gradient through log-prob
                (clipped, 0.0, clipped_ratio)
            }
        } else {
            (ratio * t, ratio * t, ratio)
        };
        loss -= inv_b * objective;

        // d loss / d log pi = -(1/B) * ratio_weight, pushed through the
        // gaussian's mean and log-std
        if ratio_weight != 0.0 {
            let scale = -inv_b * ratio_weight;
            for j in 0..action_dim {
                let z = (set.actions[i][j] - mean[j]) / sigma[j];
                d_mean[j] = z / sigma[j];
                log_std_grads[j] += scale * (z * z - 1.0) * mask[j];
            }
            policy.mean_net().backward_into(&cache, &d_mean, scale, &mut net_grads)?;
        }
        // d loss / d log_std through H(pi) inside T, live in both branches
        if s.eta != 0.0 {
            let scale = -inv_b * t_weight * s.entropy_loss_coef * s.eta;
            for j in 0..action_dim {
                log_std_grads[j] += scale * mask[j];
            }
        }
    }
    Ok(Some(SurrogateReport {
        loss,
        net_grads,
        log_std_grads,
        clip_fraction: left_clip_interval as f64 * inv_b,
    }))
}

/// coef * mean squared error of the value net against fixed targets, with
/// gradients.
pub fn value_regression_loss(
    value: &ValueNet,
    set: &SampleSet,
    idx: &[usize],
    coef: f64,
) -> Result<(f64, Mlp)> {
    if idx.is_empty() {
        return Err(Error::Config("empty minibatch".into()));
    }
    let inv_b = 1.0 / idx.len() as f64;
    let mut loss = 0.0;
    let mut grads = value.net().zeros_like();
    for &i in idx {
        let cache = value.net().forward_cached(&set.states[i])?;
        let err = cache.output()[0] - set.value_targets[i];
        loss += coef * err * err * inv_b;
        value.net().backward_into(&cache, &[1.0], coef * 2.0 * err * inv_b, &mut grads)?;
    }
    Ok((loss, grads))
}
