//! On-policy trajectory collection, entropy-augmented ("soft") rewards, and
//! discounted rewards-to-go targets.
//!
//! Batches are exact-size: collection stops at `steps_per_batch` steps and
//! the episode cut at the boundary is kept, marked truncated so downstream
//! estimators bootstrap from the value function.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::envs::Environment;
use crate::policy::{GaussianPolicy, ValueNet};
use crate::{Error, Result};

/// One episode (or episode fragment at a batch boundary) sampled by a single
/// policy snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// s_0 .. s_T (one more than the number of steps).
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub raw_rewards: Vec<f64>,
    /// raw_rewards plus the entropy bonus; equals raw_rewards until
    /// `augment_rewards` runs (and stays equal at eta = 0).
    pub soft_rewards: Vec<f64>,
    /// log pi(a_t | s_t) recorded at sampling time.
    pub old_log_probs: Vec<f64>,
    /// H(pi(s_{t+1})) under the collecting policy, one per step.
    pub next_state_entropies: Vec<f64>,
    /// True environment termination (final value is zero, no bootstrap).
    pub terminated: bool,
    /// Episode cut off by the step limit or the batch boundary.
    pub truncated: bool,
    /// True when `truncated` came from the batch boundary, not the env's own
    /// step limit. Metrics exclude these partial returns.
    pub batch_cut: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.raw_rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_rewards.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.len();
        if t == 0 {
            return Err(Error::Config("trajectory has no steps".into()));
        }
        if self.states.len() != t + 1 {
            return Err(Error::Config(format!(
                "trajectory has {} states for {t} steps, expected {}",
                self.states.len(),
                t + 1
            )));
        }
        if self.actions.len() != t
            || self.soft_rewards.len() != t
            || self.old_log_probs.len() != t
            || self.next_state_entropies.len() != t
        {
            return Err(Error::Config("trajectory sequence lengths disagree".into()));
        }
        if self.terminated == self.truncated {
            return Err(Error::Config(
                "trajectory must end in exactly one of terminated or truncated".into(),
            ));
        }
        if self.batch_cut && !self.truncated {
            return Err(Error::Config("batch-cut trajectory must be truncated".into()));
        }
        Ok(())
    }

    /// Undiscounted sum of environment rewards.
    pub fn raw_return(&self) -> f64 {
        self.raw_rewards.iter().sum()
    }
}

/// Trajectories totaling an exact number of environment steps, all sampled by
/// the same policy snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub trajectories: Vec<Trajectory>,
}

impl Batch {
    pub fn total_steps(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    /// Returns of the episodes that ended on their own (termination or the
    /// env step limit); falls back to all trajectories when every episode
    /// was cut by the batch boundary.
    pub fn episode_returns(&self) -> Vec<f64> {
        let complete: Vec<f64> = self
            .trajectories
            .iter()
            .filter(|t| !t.batch_cut)
            .map(|t| t.raw_return())
            .collect();
        if complete.is_empty() {
            self.trajectories.iter().map(|t| t.raw_return()).collect()
        } else {
            complete
        }
    }
}

/// Run the policy in the environment for exactly `steps_per_batch` steps.
/// Each episode's reset seed and every action draw come from `rng`, so the
/// batch is a pure function of the rng state.
pub fn collect_batch<R: Rng + ?Sized>(
    policy: &GaussianPolicy,
    env: &mut dyn Environment,
    steps_per_batch: usize,
    rng: &mut R,
) -> Result<Batch> {
    if steps_per_batch == 0 {
        return Err(Error::Config("steps_per_batch must be at least 1".into()));
    }
    let spec = env.spec();
    if policy.state_dim() != spec.state_dim || policy.action_dim() != spec.action_dim {
        return Err(Error::Config(format!(
            "policy dims ({}, {}) do not match env dims ({}, {})",
            policy.state_dim(),
            policy.action_dim(),
            spec.state_dim,
            spec.action_dim
        )));
    }
    let mut trajectories = Vec::new();
    let mut total = 0usize;
    while total < steps_per_batch {
        let reset_seed: u64 = rng.random();
        let mut states = vec![env.reset(reset_seed)];
        let mut actions = Vec::new();
        let mut raw_rewards = Vec::new();
        let mut old_log_probs = Vec::new();
        let mut next_state_entropies = Vec::new();
        loop {
            let (action, log_prob) = policy.sample(states.last().expect("nonempty"), rng)?;
            let step = env.step(&action)?;
            next_state_entropies.push(policy.entropy(&step.state)?);
            states.push(step.state);
            actions.push(action);
            raw_rewards.push(step.reward);
            old_log_probs.push(log_prob);
            total += 1;
            let ended = step.terminated || step.truncated;
            let cut = !ended && total >= steps_per_batch;
            if ended || cut {
                let traj = Trajectory {
                    states,
                    actions,
                    soft_rewards: raw_rewards.clone(),
                    raw_rewards,
                    old_log_probs,
                    next_state_entropies,
                    terminated: step.terminated,
                    truncated: step.truncated || cut,
                    batch_cut: cut,
                };
                debug_assert!(traj.validate().is_ok());
                trajectories.push(traj);
                break;
            }
        }
    }
    Ok(Batch { trajectories })
}

/// Fill in soft rewards r^H_t = r_t + eta * H(pi(s_{t+1})), using the
/// entropies recorded at sampling time. At a true terminal the final step
/// keeps its raw reward (there is no successor to be uncertain about), and
/// eta = 0 copies the raw rewards bit for bit.
pub fn augment_rewards(traj: &mut Trajectory, eta: f64) {
    if eta == 0.0 {
        traj.soft_rewards = traj.raw_rewards.clone();
        return;
    }
    let last = traj.len() - 1;
    traj.soft_rewards = traj
        .raw_rewards
        .iter()
        .zip(&traj.next_state_entropies)
        .enumerate()
        .map(|(t, (&r, &h))| {
            if traj.terminated && t == last {
                r
            } else {
                r + eta * h
            }
        })
        .collect();
}

/// Discounted sums of soft rewards, G_t = sum_l gamma^l r^H_{t+l+1}, with a
/// value bootstrap gamma^{T-t} V(s_T) when the episode was truncated.
pub fn rewards_to_go(traj: &Trajectory, gamma: f64, value_fn: &ValueNet) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let t_len = traj.len();
    let mut acc = if traj.truncated {
        value_fn.value(traj.states.last().expect("nonempty"))?
    } else {
        0.0
    };
    let mut out = vec![0.0; t_len];
    for t in (0..t_len).rev() {
        acc = traj.soft_rewards[t] + gamma * acc;
        out[t] = acc;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_env, PointMass};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_policy(state_dim: usize, action_dim: usize, seed: u64) -> GaussianPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GaussianPolicy::init(state_dim, &[8], action_dim, &mut rng).unwrap()
    }

    fn test_value(state_dim: usize, seed: u64) -> ValueNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ValueNet::init(state_dim, &[8], &mut rng).unwrap()
    }

    fn hand_trajectory(terminated: bool) -> Trajectory {
        Trajectory {
            states: vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            actions: vec![vec![0.1], vec![0.2], vec![0.3]],
            raw_rewards: vec![1.0, -0.5, 2.0],
            soft_rewards: vec![1.0, -0.5, 2.0],
            old_log_probs: vec![-1.0, -1.1, -1.2],
            next_state_entropies: vec![1.5, 1.6, 1.7],
            terminated,
            truncated: !terminated,
            batch_cut: false,
        }
    }

    #[test]
    fn one_step_batch() {
        let mut env = PointMass::new();
        let policy = test_policy(4, 2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = collect_batch(&policy, &mut env, 1, &mut rng).unwrap();
        assert_eq!(batch.trajectories.len(), 1);
        assert_eq!(batch.total_steps(), 1);
        let t = &batch.trajectories[0];
        assert!(t.truncated && t.batch_cut && !t.terminated);
        t.validate().unwrap();
    }

    #[test]
    fn batch_is_exact_size_and_episodes_partition_it() {
        let mut env = PointMass::new();
        let policy = test_policy(4, 2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = collect_batch(&policy, &mut env, 512, &mut rng).unwrap();
        assert_eq!(batch.total_steps(), 512);
        // point-mass episodes are exactly 200 steps: 2 full + one 112-step cut
        assert_eq!(batch.trajectories.len(), 3);
        assert_eq!(batch.trajectories[2].len(), 112);
        assert!(batch.trajectories[2].batch_cut);
        assert!(!batch.trajectories[0].batch_cut);
        assert_eq!(batch.episode_returns().len(), 2);
        for t in &batch.trajectories {
            t.validate().unwrap();
        }
    }

    #[test]
    fn collection_is_deterministic() {
        let policy = test_policy(4, 2, 3);
        let run = || {
            let mut env = PointMass::new();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            collect_batch(&policy, &mut env, 256, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn recorded_log_probs_match_recomputation() {
        let mut env = PointMass::new();
        let policy = test_policy(4, 2, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let batch = collect_batch(&policy, &mut env, 64, &mut rng).unwrap();
        for traj in &batch.trajectories {
            for t in 0..traj.len() {
                let lp = policy.log_prob(&traj.states[t], &traj.actions[t]).unwrap();
                assert_eq!(lp, traj.old_log_probs[t]);
            }
        }
    }

    #[test]
    fn recorded_entropies_match_recomputation() {
        let mut env = PointMass::new();
        let policy = test_policy(4, 2, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch = collect_batch(&policy, &mut env, 32, &mut rng).unwrap();
        for traj in &batch.trajectories {
            for t in 0..traj.len() {
                let h = policy.entropy(&traj.states[t + 1]).unwrap();
                assert_eq!(h, traj.next_state_entropies[t]);
            }
        }
    }

    #[test]
    fn dim_mismatch_rejected() {
        let mut env = PointMass::new();
        let policy = test_policy(3, 2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(collect_batch(&policy, &mut env, 8, &mut rng).is_err());
        let policy = test_policy(4, 2, 0);
        assert!(collect_batch(&policy, &mut env, 0, &mut rng).is_err());
    }

    #[test]
    fn augment_zero_eta_copies_raw_exactly() {
        let mut traj = hand_trajectory(false);
        traj.soft_rewards = vec![9.0, 9.0, 9.0];
        augment_rewards(&mut traj, 0.0);
        assert_eq!(traj.soft_rewards, traj.raw_rewards);
    }

    #[test]
    fn augment_adds_scaled_entropy_and_is_linear_in_eta() {
        let mut traj = hand_trajectory(false);
        augment_rewards(&mut traj, 1e-3);
        for t in 0..3 {
            let bonus = traj.soft_rewards[t] - traj.raw_rewards[t];
            assert!((bonus - 1e-3 * traj.next_state_entropies[t]).abs() < 1e-15);
        }
        let mut traj2 = hand_trajectory(false);
        augment_rewards(&mut traj2, 2e-3);
        for t in 0..3 {
            let b1 = traj.soft_rewards[t] - traj.raw_rewards[t];
            let b2 = traj2.soft_rewards[t] - traj2.raw_rewards[t];
            assert!((b2 - 2.0 * b1).abs() < 1e-15);
        }
    }

    #[test]
    fn augment_omits_bonus_at_true_terminal() {
        let mut traj = hand_trajectory(true);
        augment_rewards(&mut traj, 0.5);
        assert!((traj.soft_rewards[0] - (1.0 + 0.5 * 1.5)).abs() < 1e-15);
        assert!((traj.soft_rewards[1] - (-0.5 + 0.5 * 1.6)).abs() < 1e-15);
        assert_eq!(traj.soft_rewards[2], 2.0);
    }

    #[test]
    fn rewards_to_go_terminal_geometric() {
        let mut traj = hand_trajectory(true);
        traj.soft_rewards = vec![1.0, 1.0, 1.0];
        let value = test_value(1, 0);
        let g = rewards_to_go(&traj, 0.99, &value).unwrap();
        assert!((g[0] - 2.9701).abs() < 1e-12);
        assert!((g[1] - 1.99).abs() < 1e-12);
        assert!((g[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rewards_to_go_truncated_bootstraps_from_value() {
        let traj = hand_trajectory(false);
        let value = test_value(1, 0);
        let v_last = value.value(&traj.states[3]).unwrap();
        let g = rewards_to_go(&traj, 0.9, &value).unwrap();
        assert!((g[2] - (2.0 + 0.9 * v_last)).abs() < 1e-12);
        // backward Bellman consistency at interior steps
        assert!((g[0] - (traj.soft_rewards[0] + 0.9 * g[1])).abs() < 1e-15);
        assert!((g[1] - (traj.soft_rewards[1] + 0.9 * g[2])).abs() < 1e-15);
    }

    #[test]
    fn single_terminal_step_returns_its_reward() {
        let traj = Trajectory {
            states: vec![vec![0.0], vec![1.0]],
            actions: vec![vec![0.0]],
            raw_rewards: vec![1.0],
            soft_rewards: vec![1.0],
            old_log_probs: vec![-1.0],
            next_state_entropies: vec![1.4],
            terminated: true,
            truncated: false,
            batch_cut: false,
        };
        let value = test_value(1, 0);
        let g = rewards_to_go(&traj, 0.99, &value).unwrap();
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn env_truncation_is_not_a_batch_cut() {
        // batch large enough to span a full 200-step episode exactly
        let mut env = make_env("point_mass").unwrap();
        let policy = test_policy(4, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = collect_batch(&policy, env.as_mut(), 200, &mut rng).unwrap();
        assert_eq!(batch.trajectories.len(), 1);
        let t = &batch.trajectories[0];
        assert!(t.truncated && !t.batch_cut);
        assert_eq!(batch.episode_returns().len(), 1);
    }
}
