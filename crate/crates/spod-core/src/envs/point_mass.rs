//! 2-D double integrator: the action is an acceleration, the goal is the
//! origin. Semi-implicit Euler at dt = 0.05:
//!
//!   v' = v + dt * a
//!   p' = p + dt * v'
//!
//! Reward is the negative quadratic cost -(|p|^2 + 0.01 |a|^2), evaluated at
//! the pre-step position: never positive, 0 at the goal with zero action, and
//! bounded over the 200-step horizon since |a| <= 1 caps speed and drift.
//! Episodes never terminate; they truncate at 200 steps.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvSpec, Environment, EpisodeState, Step};
use crate::Result;

const DT: f64 = 0.05;
const ACTION_COST: f64 = 0.01;
const HORIZON: usize = 200;

#[derive(Debug, Clone)]
pub struct PointMass {
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    episode: EpisodeState,
}

impl PointMass {
    pub fn new() -> Self {
        let spec = EnvSpec::new(4, 2, vec![[-1.0, 1.0], [-1.0, 1.0]], HORIZON)
            .expect("static spec is valid");
        PointMass { spec, pos: [0.0; 2], vel: [0.0; 2], episode: EpisodeState::new() }
    }

    fn state(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.pos = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        self.vel = [0.0, 0.0];
        self.episode.begin();
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let a = self.episode.prepare_action(&self.spec, action)?;
        let cost = self.pos[0] * self.pos[0]
            + self.pos[1] * self.pos[1]
            + ACTION_COST * (a[0] * a[0] + a[1] * a[1]);
        for (i, (v, p)) in self.vel.iter_mut().zip(&mut self.pos).enumerate() {
            *v += DT * a[i];
            *p += DT * *v;
        }
        let truncated = self.episode.finish_step(&self.spec, false);
        Ok(Step { state: self.state(), reward: -cost, terminated: false, truncated })
    }

    fn clipped_action_count(&self) -> u64 {
        self.episode.clipped()
    }

    fn name(&self) -> &'static str {
        "point_mass"
    }
}
