//! Deterministic, seedable control environments with hand-checkable dynamics,
//! plus an exact tabular MDP used by the identity and bound checks.
//!
//! Determinism contract: (reset seed, action sequence) fully determines every
//! rollout. Actions outside the declared bounds are clipped and counted.

mod cart_pole;
mod pendulum;
mod point_mass;
pub mod tabular;

pub use cart_pole::CartPoleContinuous;
pub use pendulum::PendulumSwingup;
pub use point_mass::PointMass;
pub use tabular::{
    exact_policy_return, exact_soft_policy_return, Horizon, StochasticPolicy, TabularMdp,
};

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Static description of an environment's interface.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Per-dimension [low, high], low < high.
    pub action_bounds: Vec<[f64; 2]>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        action_bounds: Vec<[f64; 2]>,
        max_episode_steps: usize,
    ) -> Result<Self> {
        if action_bounds.len() != action_dim {
            return Err(Error::Config(format!(
                "need {action_dim} action bounds, got {}",
                action_bounds.len()
            )));
        }
        for (i, b) in action_bounds.iter().enumerate() {
            // negated form also rejects NaN bounds
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(b[0] < b[1]) {
                return Err(Error::Config(format!(
                    "action bound {i} must satisfy low < high, got [{}, {}]",
                    b[0], b[1]
                )));
            }
        }
        if max_episode_steps == 0 {
            return Err(Error::Config("max_episode_steps must be at least 1".into()));
        }
        Ok(EnvSpec { state_dim, action_dim, action_bounds, max_episode_steps })
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub reward: f64,
    /// True environment termination (no bootstrap at this state).
    pub terminated: bool,
    /// Episode cut off by the step limit (bootstrap allowed).
    pub truncated: bool,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Start a new episode. The initial state is a pure function of the seed.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Advance one step. Calling after terminated/truncated (or before any
    /// reset) is a usage error.
    fn step(&mut self, action: &[f64]) -> Result<Step>;

    /// Number of action components clipped to bounds so far.
    fn clipped_action_count(&self) -> u64;

    fn name(&self) -> &'static str;
}

pub const ENV_NAMES: [&str; 3] = ["point_mass", "pendulum", "cart_pole"];

pub fn make_env(name: &str) -> Result<Box<dyn Environment>> {
    match name {
        "point_mass" => Ok(Box::new(PointMass::new())),
        "pendulum" => Ok(Box::new(PendulumSwingup::new())),
        "cart_pole" => Ok(Box::new(CartPoleContinuous::new())),
        other => Err(Error::Config(format!(
            "unknown environment '{other}', expected one of: {}",
            ENV_NAMES.join(", ")
        ))),
    }
}

/// Shared per-episode bookkeeping: step limit, done latch, clip counter.
#[derive(Debug, Clone)]
pub(crate) struct EpisodeState {
    steps_taken: usize,
    active: bool,
    clipped: u64,
}

impl EpisodeState {
    pub(crate) fn new() -> Self {
        EpisodeState { steps_taken: 0, active: false, clipped: 0 }
    }

    pub(crate) fn begin(&mut self) {
        self.steps_taken = 0;
        self.active = true;
    }

    pub(crate) fn clipped(&self) -> u64 {
        self.clipped
    }

    /// Validate and clip an action, and check the episode is live.
    pub(crate) fn prepare_action(&mut self, spec: &EnvSpec, action: &[f64]) -> Result<Vec<f64>> {
        if !self.active {
            return Err(Error::Usage(
                "step called on a finished or unstarted episode; call reset first".into(),
            ));
        }
        if action.len() != spec.action_dim {
            return Err(Error::Config(format!(
                "action has {} components, env expects {}",
                action.len(),
                spec.action_dim
            )));
        }
        crate::ensure_finite(action, "action")?;
        let mut out = Vec::with_capacity(action.len());
        for (a, b) in action.iter().zip(&spec.action_bounds) {
            let c = a.clamp(b[0], b[1]);
            if c != *a {
                self.clipped += 1;
            }
            out.push(c);
        }
        Ok(out)
    }

    /// Advance the step counter; returns truncated=true at the limit and
    /// latches the done state.
    pub(crate) fn finish_step(&mut self, spec: &EnvSpec, terminated: bool) -> bool {
        self.steps_taken += 1;
        let truncated = !terminated && self.steps_taken >= spec.max_episode_steps;
        if terminated || truncated {
            self.active = false;
        }
        truncated
    }
}
