//! End-to-end training loops.
//!
//! [`Trainer`] runs the full method: collect with the current policy, soften
//! rewards with the decaying entropy temperature, estimate advantages on two
//! value tracks (current and shadow), snapshot the shadow parameters, then
//! run minibatch Adam on the clipped surrogate and value regression under
//! linearly decaying schedules.
//!
//! [`PpoTrainer`] is the clipped-PPO baseline as its own loop over the same
//! primitives. With the temperature at zero and the dual track disabled the
//! two paths consume identical rng draws and produce bit-identical metrics
//! under a shared seed.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::advantage::{self, AdvantageConfig, CombineMode, TrajectoryValues};
use crate::envs::{make_env, Environment};
use crate::loss::{clipped_surrogate_loss, value_regression_loss, SampleSet, SurrogateSettings};
use crate::nn::{clip_global_norm, AdamState, VecAdamState};
use crate::policy::{GaussianPolicy, ValueNet};
use crate::rollout::{augment_rewards, collect_batch, rewards_to_go, Batch};
use crate::{Error, Result};

/// Which state the entropy-difference term reads. The next state is the
/// default; with a state-independent log-std both give the same numbers, but
/// the code paths differ and both are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyState {
    NextState,
    CurrentState,
}

/// Value-regression target: Monte-Carlo rewards-to-go (default) or the
/// lambda-return from the current value function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueTarget {
    MonteCarlo,
    LambdaReturn,
}

/// `initial * (1 - progress)`: full value at the start, zero at the end.
pub fn linear_schedule(initial: f64, progress: f64) -> f64 {
    initial * (1.0 - progress.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: String,
    pub seed: u64,
    pub total_steps: usize,
    pub steps_per_batch: usize,
    pub epochs_per_batch: usize,
    pub minibatch_size: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub lam: f64,
    pub alpha: f64,
    pub combine: CombineMode,
    pub lr_0: f64,
    pub clip_eps_0: f64,
    pub eta_0: f64,
    pub entropy_loss_coef: f64,
    pub value_loss_coef: f64,
    pub grad_clip_norm: f64,
    pub normalize_advantages: bool,
    /// false: single-track GAE from the current value function (ablation).
    pub use_dtae: bool,
    /// false: unclipped ratio objective (ablation).
    pub use_clip: bool,
    pub entropy_state: EntropyState,
    pub value_target: ValueTarget,
}

impl TrainConfig {
    /// Default hyperparameters on the given environment.
    pub fn new(env: &str, seed: u64, total_steps: usize) -> Self {
        TrainConfig {
            env: String::from(env),
            seed,
            total_steps,
            steps_per_batch: 2048,
            epochs_per_batch: 10,
            minibatch_size: 64,
            hidden: vec![64, 64],
            gamma: 0.99,
            lam: 0.95,
            alpha: 0.1,
            combine: CombineMode::Mean,
            lr_0: 3e-4,
            clip_eps_0: 0.2,
            eta_0: 1e-3,
            entropy_loss_coef: 1.0,
            value_loss_coef: 0.5,
            grad_clip_norm: 0.5,
            normalize_advantages: true,
            use_dtae: true,
            use_clip: true,
            entropy_state: EntropyState::NextState,
            value_target: ValueTarget::MonteCarlo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_batch == 0 {
            return Err(Error::Config("steps_per_batch must be at least 1".into()));
        }
        if self.epochs_per_batch == 0 {
            return Err(Error::Config("epochs_per_batch must be at least 1".into()));
        }
        if self.minibatch_size == 0 {
            return Err(Error::Config("minibatch_size must be at least 1".into()));
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lam), ("alpha", self.alpha)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        self.combine.validate()?;
        if self.use_dtae && self.lam == 0.0 && self.alpha > 0.0 {
            return Err(Error::Config(
                "lambda = 0 with alpha > 0 leaves the TD-update track undefined".into(),
            ));
        }
        if !(self.lr_0 > 0.0 && self.lr_0.is_finite()) {
            return Err(Error::Config(format!("lr_0 must be positive, got {}", self.lr_0)));
        }
        for (name, v) in [
            ("clip_eps_0", self.clip_eps_0),
            ("eta_0", self.eta_0),
            ("entropy_loss_coef", self.entropy_loss_coef),
            ("value_loss_coef", self.value_loss_coef),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.grad_clip_norm > 0.0 && self.grad_clip_norm.is_finite()) {
            return Err(Error::Config(format!(
                "grad_clip_norm must be positive, got {}",
                self.grad_clip_norm
            )));
        }
        Ok(())
    }
}

/// One CSV row worth of per-iteration diagnostics. `step` counts cumulative
/// environment steps after the iteration finished.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub step: usize,
    pub mean_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_entropy: f64,
    /// KL(pi_old || pi_new) averaged over the batch states, after the update.
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub lr: f64,
    pub clip_eps: f64,
    pub eta: f64,
    /// Minibatches skipped because a probability ratio was non-finite.
    pub skipped_minibatches: usize,
}

fn state_values(value: &ValueNet, states: &[Vec<f64>]) -> Result<Vec<f64>> {
    states.iter().map(|s| value.value(s)).collect()
}

fn flatten_batch(
    batch: &Batch,
    advantages: &[Vec<f64>],
    targets: &[Vec<f64>],
    old_policy: &GaussianPolicy,
    entropy_state: EntropyState,
) -> Result<SampleSet> {
    let n = batch.total_steps();
    let mut set = SampleSet {
        states: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
        old_log_probs: Vec::with_capacity(n),
        advantages: Vec::with_capacity(n),
        value_targets: Vec::with_capacity(n),
        old_entropies: Vec::with_capacity(n),
    };
    for (k, traj) in batch.trajectories.iter().enumerate() {
        for t in 0..traj.len() {
            set.states.push(traj.states[t].clone());
            set.actions.push(traj.actions[t].clone());
            set.old_log_probs.push(traj.old_log_probs[t]);
            set.advantages.push(advantages[k][t]);
            set.value_targets.push(targets[k][t]);
            set.old_entropies.push(match entropy_state {
                EntropyState::NextState => traj.next_state_entropies[t],
                EntropyState::CurrentState => old_policy.entropy(&traj.states[t])?,
            });
        }
    }
    set.validate()?;
    Ok(set)
}

struct OptimizeOutcome {
    policy_loss: f64,
    value_loss: f64,
    clip_fraction: f64,
    skipped_minibatches: usize,
}

/// Epochs of shuffled minibatch Adam over the sample set: a surrogate step
/// on the policy, then a regression step on the value net, per minibatch.
#[allow(clippy::too_many_arguments)]
fn optimize(
    policy: &mut GaussianPolicy,
    value: &mut ValueNet,
    policy_opt: &mut AdamState,
    log_std_opt: &mut VecAdamState,
    value_opt: &mut AdamState,
    set: &SampleSet,
    cfg: &TrainConfig,
    settings: &SurrogateSettings,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<OptimizeOutcome> {
    let mut indices: Vec<usize> = (0..set.len()).collect();
    let mut policy_loss_sum = 0.0;
    let mut value_loss_sum = 0.0;
    let mut clip_fraction_sum = 0.0;
    let mut policy_batches = 0usize;
    let mut value_batches = 0usize;
    let mut skipped = 0usize;
    for _ in 0..cfg.epochs_per_batch {
        indices.shuffle(rng);
        for chunk in indices.chunks(cfg.minibatch_size) {
            match clipped_surrogate_loss(policy, set, chunk, settings)? {
                None => {
                    skipped += 1;
                    continue;
                }
                Some(mut rep) => {
                    {
                        let mut parts: Vec<&mut [f64]> =
                            rep.net_grads.flat_parts_mut().collect();
                        parts.push(&mut rep.log_std_grads);
                        clip_global_norm(&mut parts, cfg.grad_clip_norm);
                    }
                    policy_opt.step(policy.mean_net_mut(), &rep.net_grads, lr)?;
                    log_std_opt.step(policy.log_std_mut(), &rep.log_std_grads, lr)?;
                    policy_loss_sum += rep.loss;
                    clip_fraction_sum += rep.clip_fraction;
                    policy_batches += 1;
                }
            }
            let (vloss, mut vgrads) =
                value_regression_loss(value, set, chunk, cfg.value_loss_coef)?;
            {
                let mut parts: Vec<&mut [f64]> = vgrads.flat_parts_mut().collect();
                clip_global_norm(&mut parts, cfg.grad_clip_norm);
            }
            value_opt.step(value.net_mut(), &vgrads, lr)?;
            value_loss_sum += vloss;
            value_batches += 1;
        }
    }
    Ok(OptimizeOutcome {
        policy_loss: if policy_batches > 0 { policy_loss_sum / policy_batches as f64 } else { 0.0 },
        value_loss: if value_batches > 0 { value_loss_sum / value_batches as f64 } else { 0.0 },
        clip_fraction: if policy_batches > 0 {
            clip_fraction_sum / policy_batches as f64
        } else {
            0.0
        },
        skipped_minibatches: skipped,
    })
}

fn return_stats(batch: &Batch) -> (f64, f64, f64) {
    let returns = batch.episode_returns();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let min = returns.iter().copied().fold(f64::INFINITY, f64::min);
    let max = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

fn mean_kl_over_states(
    old_policy: &GaussianPolicy,
    new_policy: &GaussianPolicy,
    states: &[Vec<f64>],
) -> Result<f64> {
    let mut total = 0.0;
    for s in states {
        total += old_policy.kl(new_policy, s)?;
    }
    Ok(total / states.len() as f64)
}

/// The full training loop with shadow snapshots and dual-track advantages.
pub struct Trainer {
    cfg: TrainConfig,
    env: Box<dyn Environment>,
    policy: GaussianPolicy,
    value: ValueNet,
    shadow_policy: GaussianPolicy,
    shadow_value: ValueNet,
    policy_opt: AdamState,
    log_std_opt: VecAdamState,
    value_opt: AdamState,
    rng: ChaCha8Rng,
    steps_done: usize,
    iterations_done: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let env = make_env(&cfg.env)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let spec = env.spec();
        let policy =
            GaussianPolicy::init(spec.state_dim, &cfg.hidden, spec.action_dim, &mut rng)?;
        let value = ValueNet::init(spec.state_dim, &cfg.hidden, &mut rng)?;
        let policy_opt = AdamState::new(policy.mean_net());
        let log_std_opt = VecAdamState::new(policy.log_std().len());
        let value_opt = AdamState::new(value.net());
        Ok(Trainer {
            shadow_policy: policy.clone(),
            shadow_value: value.clone(),
            cfg,
            env,
            policy,
            value,
            policy_opt,
            log_std_opt,
            value_opt,
            rng,
            steps_done: 0,
            iterations_done: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn value(&self) -> &ValueNet {
        &self.value
    }

    pub fn shadow_policy(&self) -> &GaussianPolicy {
        &self.shadow_policy
    }

    pub fn shadow_value(&self) -> &ValueNet {
        &self.shadow_value
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn iterations_done(&self) -> usize {
        self.iterations_done
    }

    pub fn is_done(&self) -> bool {
        self.steps_done >= self.cfg.total_steps
    }

    fn progress(&self) -> f64 {
        if self.cfg.total_steps == 0 {
            0.0
        } else {
            (self.steps_done as f64 / self.cfg.total_steps as f64).min(1.0)
        }
    }

    /// One full iteration: collect, soften, estimate, snapshot, optimize.
    pub fn run_iteration(&mut self) -> Result<IterationMetrics> {
        let progress = self.progress();
        let lr = linear_schedule(self.cfg.lr_0, progress);
        let clip_eps = linear_schedule(self.cfg.clip_eps_0, progress);
        let eta = linear_schedule(self.cfg.eta_0, progress);

        let mut batch =
            collect_batch(&self.policy, self.env.as_mut(), self.cfg.steps_per_batch, &mut self.rng)?;
        for traj in &mut batch.trajectories {
            augment_rewards(traj, eta);
        }

        let adv_cfg = AdvantageConfig {
            gamma: self.cfg.gamma,
            lam: self.cfg.lam,
            alpha: self.cfg.alpha,
            combine: self.cfg.combine,
        };
        let mut advantages = Vec::with_capacity(batch.trajectories.len());
        let mut targets = Vec::with_capacity(batch.trajectories.len());
        for traj in &batch.trajectories {
            let cur_vals = state_values(&self.value, &traj.states)?;
            let adv = if self.cfg.use_dtae {
                let shadow_vals = state_values(&self.shadow_value, &traj.states)?;
                advantage::dual_track_advantage(
                    &traj.soft_rewards,
                    &cur_vals,
                    &shadow_vals,
                    traj.terminated,
                    &adv_cfg,
                )?
            } else {
                let tv = TrajectoryValues::new(
                    traj.soft_rewards.clone(),
                    cur_vals.clone(),
                    traj.terminated,
                )?;
                advantage::gae(&tv, self.cfg.gamma, self.cfg.lam)?
            };
            let tgt = match self.cfg.value_target {
                ValueTarget::MonteCarlo => rewards_to_go(traj, self.cfg.gamma, &self.value)?,
                ValueTarget::LambdaReturn => {
                    let tv = TrajectoryValues::new(
                        traj.soft_rewards.clone(),
                        cur_vals,
                        traj.terminated,
                    )?;
                    advantage::lambda_returns(&tv, self.cfg.gamma, self.cfg.lam)?
                }
            };
            advantages.push(adv);
            targets.push(tgt);
        }

        // the shadow snapshot happens after advantages were computed from the
        // previous snapshot and before any parameter moves
        self.shadow_policy = self.policy.clone();
        self.shadow_value = self.value.clone();
        let old_policy = self.policy.clone();

        let mut set =
            flatten_batch(&batch, &advantages, &targets, &old_policy, self.cfg.entropy_state)?;
        if self.cfg.normalize_advantages {
            advantage::normalize_advantages(&mut set.advantages);
        }
        let settings = SurrogateSettings {
            clip_eps,
            eta,
            entropy_loss_coef: self.cfg.entropy_loss_coef,
            use_clip: self.cfg.use_clip,
        };
        let outcome = optimize(
            &mut self.policy,
            &mut self.value,
            &mut self.policy_opt,
            &mut self.log_std_opt,
            &mut self.value_opt,
            &set,
            &self.cfg,
            &settings,
            lr,
            &mut self.rng,
        )?;

        self.steps_done += batch.total_steps();
        self.iterations_done += 1;
        let (mean_return, min_return, max_return) = return_stats(&batch);
        Ok(IterationMetrics {
            step: self.steps_done,
            mean_return,
            min_return,
            max_return,
            policy_loss: outcome.policy_loss,
            value_loss: outcome.value_loss,
            mean_entropy: self.policy.entropy_closed(),
            mean_kl: mean_kl_over_states(&old_policy, &self.policy, &set.states)?,
            clip_fraction: outcome.clip_fraction,
            lr,
            clip_eps,
            eta,
            skipped_minibatches: outcome.skipped_minibatches,
        })
    }

    /// Iterate until `total_steps` environment steps are consumed.
    pub fn train(&mut self) -> Result<Vec<IterationMetrics>> {
        let mut all = Vec::new();
        while !self.is_done() {
            all.push(self.run_iteration()?);
        }
        Ok(all)
    }
}

/// Clipped-PPO baseline: single-track GAE from the current value function,
/// no reward softening, no entropy-difference term, no shadow state.
pub struct PpoTrainer {
    cfg: TrainConfig,
    env: Box<dyn Environment>,
    policy: GaussianPolicy,
    value: ValueNet,
    policy_opt: AdamState,
    log_std_opt: VecAdamState,
    value_opt: AdamState,
    rng: ChaCha8Rng,
    steps_done: usize,
    iterations_done: usize,
}

impl PpoTrainer {
    /// `eta_0`, `use_dtae`, `alpha`, and `combine` in the config are ignored;
    /// this loop never softens rewards or touches a second value track.
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let env = make_env(&cfg.env)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let spec = env.spec();
        let policy =
            GaussianPolicy::init(spec.state_dim, &cfg.hidden, spec.action_dim, &mut rng)?;
        let value = ValueNet::init(spec.state_dim, &cfg.hidden, &mut rng)?;
        let policy_opt = AdamState::new(policy.mean_net());
        let log_std_opt = VecAdamState::new(policy.log_std().len());
        let value_opt = AdamState::new(value.net());
        Ok(PpoTrainer {
            cfg,
            env,
            policy,
            value,
            policy_opt,
            log_std_opt,
            value_opt,
            rng,
            steps_done: 0,
            iterations_done: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn value(&self) -> &ValueNet {
        &self.value
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn is_done(&self) -> bool {
        self.steps_done >= self.cfg.total_steps
    }

    pub fn run_iteration(&mut self) -> Result<IterationMetrics> {
        let progress = if self.cfg.total_steps == 0 {
            0.0
        } else {
            (self.steps_done as f64 / self.cfg.total_steps as f64).min(1.0)
        };
        let lr = linear_schedule(self.cfg.lr_0, progress);
        let clip_eps = linear_schedule(self.cfg.clip_eps_0, progress);

        let mut batch =
            collect_batch(&self.policy, self.env.as_mut(), self.cfg.steps_per_batch, &mut self.rng)?;
        for traj in &mut batch.trajectories {
            augment_rewards(traj, 0.0);
        }
        let mut advantages = Vec::with_capacity(batch.trajectories.len());
        let mut targets = Vec::with_capacity(batch.trajectories.len());
        for traj in &batch.trajectories {
            let cur_vals = state_values(&self.value, &traj.states)?;
            let tv = TrajectoryValues::new(
                traj.soft_rewards.clone(),
                cur_vals.clone(),
                traj.terminated,
            )?;
            advantages.push(advantage::gae(&tv, self.cfg.gamma, self.cfg.lam)?);
            let tgt = match self.cfg.value_target {
                ValueTarget::MonteCarlo => rewards_to_go(traj, self.cfg.gamma, &self.value)?,
                ValueTarget::LambdaReturn => {
                    let tv2 = TrajectoryValues::new(
                        traj.soft_rewards.clone(),
                        cur_vals,
                        traj.terminated,
                    )?;
                    advantage::lambda_returns(&tv2, self.cfg.gamma, self.cfg.lam)?
                }
            };
            targets.push(tgt);
        }
        let old_policy = self.policy.clone();
        let mut set =
            flatten_batch(&batch, &advantages, &targets, &old_policy, EntropyState::NextState)?;
        if self.cfg.normalize_advantages {
            advantage::normalize_advantages(&mut set.advantages);
        }
        let settings = SurrogateSettings {
            clip_eps,
            eta: 0.0,
            entropy_loss_coef: self.cfg.entropy_loss_coef,
            use_clip: self.cfg.use_clip,
        };
        let outcome = optimize(
            &mut self.policy,
            &mut self.value,
            &mut self.policy_opt,
            &mut self.log_std_opt,
            &mut self.value_opt,
            &set,
            &self.cfg,
            &settings,
            lr,
            &mut self.rng,
        )?;

        self.steps_done += batch.total_steps();
        self.iterations_done += 1;
        let (mean_return, min_return, max_return) = return_stats(&batch);
        Ok(IterationMetrics {
            step: self.steps_done,
            mean_return,
            min_return,
            max_return,
            policy_loss: outcome.policy_loss,
            value_loss: outcome.value_loss,
            mean_entropy: self.policy.entropy_closed(),
            mean_kl: mean_kl_over_states(&old_policy, &self.policy, &set.states)?,
            clip_fraction: outcome.clip_fraction,
            lr,
            clip_eps,
            eta: 0.0,
            skipped_minibatches: outcome.skipped_minibatches,
        })
    }

    pub fn train(&mut self) -> Result<Vec<IterationMetrics>> {
        let mut all = Vec::new();
        while !self.is_done() {
            all.push(self.run_iteration()?);
        }
        Ok(all)
    }
}
