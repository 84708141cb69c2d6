//! Torque-limited pendulum swing-up with the usual constants
//! (g = 10, m = 1, l = 1, dt = 0.05, speed cap 8, torque in [-2, 2]):
//!
//!   thdot' = thdot + (3g/(2l) sin(th) + 3/(m l^2) u) * dt, clamped to +-8
//!   th'    = wrap(th + thdot' * dt)
//!
//! Reward -(wrap(th)^2 + 0.1 thdot^2 + 0.001 u^2) at the pre-step state, so
//! hanging still at the bottom costs about -pi^2 per step and balancing
//! upright costs ~0. The state is the raw pair (th, thdot) with th kept in
//! [-pi, pi); wrapping is sound because the dynamics depend on th only
//! through sin(th) and the reward only through the wrapped angle. Episodes
//! truncate at 200 steps and never terminate.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvSpec, Environment, EpisodeState, Step};
use crate::num;
use crate::Result;

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const HORIZON: usize = 200;
const PI: f64 = core::f64::consts::PI;

/// Map an angle to [-pi, pi).
fn wrap_angle(th: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = (th + PI) % two_pi;
    if r < 0.0 {
        r += two_pi;
    }
    r - PI
}

#[derive(Debug, Clone)]
pub struct PendulumSwingup {
    spec: EnvSpec,
    th: f64,
    thdot: f64,
    episode: EpisodeState,
}

impl PendulumSwingup {
    pub fn new() -> Self {
        let spec = EnvSpec::new(2, 1, vec![[-MAX_TORQUE, MAX_TORQUE]], HORIZON)
            .expect("static spec is valid");
        PendulumSwingup { spec, th: 0.0, thdot: 0.0, episode: EpisodeState::new() }
    }

    fn state(&self) -> Vec<f64> {
        vec![self.th, self.thdot]
    }
}

impl Default for PendulumSwingup {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PendulumSwingup {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.th = rng.random_range(-PI..PI);
        self.thdot = rng.random_range(-1.0..1.0);
        self.episode.begin();
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let u = self.episode.prepare_action(&self.spec, action)?[0];
        let cost =
            self.th * self.th + 0.1 * self.thdot * self.thdot + 0.001 * u * u;
        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * num::sin(self.th)
            + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.thdot = (self.thdot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.th = wrap_angle(self.th + self.thdot * DT);
        let truncated = self.episode.finish_step(&self.spec, false);
        Ok(Step { state: self.state(), reward: -cost, terminated: false, truncated })
    }

    fn clipped_action_count(&self) -> u64 {
        self.episode.clipped()
    }

    fn name(&self) -> &'static str {
        "pendulum"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Hand-integrated step from th = 2, thdot = 1, torque 1.5; no wrap or
    // speed clamp triggers on this instance.
    #[test]
    fn single_step_matches_hand_integration() {
        let mut env = PendulumSwingup::new();
        env.reset(0);
        env.th = 2.0;
        env.thdot = 1.0;
        let s = env.step(&[1.5]).unwrap();
        assert!((s.reward - -4.10225).abs() < 1e-12);
        assert!((s.state[0] - 2.095_348_653_505_963).abs() < 1e-12);
        assert!((s.state[1] - 1.9069730701192613).abs() < 1e-12);
    }

    #[test]
    fn angle_wraps_past_pi() {
        let mut env = PendulumSwingup::new();
        env.reset(0);
        env.th = PI - 0.01;
        env.thdot = 2.0;
        let s = env.step(&[0.0]).unwrap();
        // th moved forward past pi and must come back near -pi
        assert!(s.state[0] < 0.0, "got th = {}", s.state[0]);
        assert!(s.state[0] > -PI);
    }

    #[test]
    fn speed_clamped_to_cap() {
        let mut env = PendulumSwingup::new();
        env.reset(0);
        env.th = PI / 2.0;
        env.thdot = 7.9;
        let s = env.step(&[2.0]).unwrap();
        assert_eq!(s.state[1], MAX_SPEED);
    }

    #[test]
    fn upright_at_rest_with_zero_torque_costs_nothing() {
        let mut env = PendulumSwingup::new();
        env.reset(0);
        env.th = 0.0;
        env.thdot = 0.0;
        let s = env.step(&[0.0]).unwrap();
        assert_eq!(s.reward, 0.0);
        // unstable equilibrium: sin(0) = 0, so it stays put
        assert_eq!(s.state, vec![0.0, 0.0]);
    }

    #[test]
    fn initial_state_in_declared_ranges() {
        let mut env = PendulumSwingup::new();
        for seed in 0..100 {
            let s = env.reset(seed);
            assert!(s[0] >= -PI && s[0] < PI);
            assert!(s[1] >= -1.0 && s[1] < 1.0);
        }
    }

    #[test]
    fn wrap_angle_identity_inside_range() {
        assert_eq!(wrap_angle(1.0), 1.0);
        assert!((wrap_angle(PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_angle(-PI - 0.1) - (PI - 0.1)).abs() < 1e-12);
        assert!((wrap_angle(7.0 * PI + 0.3) - (-PI + 0.3)).abs() < 1e-10);
    }
}
