//! Cart-pole balance with a continuous force action in [-10, 10] and the
//! classic constants: gravity 9.8, cart mass 1.0, pole mass 0.1, half-pole
//! length 0.5, dt 0.02, explicit Euler. State is (x, xdot, th, thdot).
//!
//!   temp  = (F + m_p l thdot^2 sin th) / (m_c + m_p)
//!   thacc = (g sin th - cos th * temp) / (l (4/3 - m_p cos^2 th / (m_c + m_p)))
//!   xacc  = temp - m_p l thacc cos th / (m_c + m_p)
//!
//! Reward +1 per step, including the step that leaves the bounds. Terminates
//! when |th| > 12 degrees or |x| > 2.4, measured on the post-step state;
//! truncates at 500 steps.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvSpec, Environment, EpisodeState, Step};
use crate::num;
use crate::Result;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_POLE: f64 = 0.5;
const TAU: f64 = 0.02;
const MAX_FORCE: f64 = 10.0;
const X_LIMIT: f64 = 2.4;
// 12 degrees
const THETA_LIMIT: f64 = 12.0 * core::f64::consts::PI / 180.0;
const HORIZON: usize = 500;

#[derive(Debug, Clone)]
pub struct CartPoleContinuous {
    spec: EnvSpec,
    state: [f64; 4],
    episode: EpisodeState,
}

impl CartPoleContinuous {
    pub fn new() -> Self {
        let spec = EnvSpec::new(4, 1, vec![[-MAX_FORCE, MAX_FORCE]], HORIZON)
            .expect("static spec is valid");
        CartPoleContinuous { spec, state: [0.0; 4], episode: EpisodeState::new() }
    }
}

impl Default for CartPoleContinuous {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CartPoleContinuous {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in self.state.iter_mut() {
            *s = rng.random_range(-0.05..0.05);
        }
        self.episode.begin();
        self.state.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let force = self.episode.prepare_action(&self.spec, action)?[0];
        let [x, xdot, th, thdot] = self.state;
        let cos_th = num::cos(th);
        let sin_th = num::sin(th);
        let temp = (force + MASS_POLE * HALF_POLE * thdot * thdot * sin_th) / TOTAL_MASS;
        let thacc = (GRAVITY * sin_th - cos_th * temp)
            / (HALF_POLE * (4.0 / 3.0 - MASS_POLE * cos_th * cos_th / TOTAL_MASS));
        let xacc = temp - MASS_POLE * HALF_POLE * thacc * cos_th / TOTAL_MASS;
        self.state = [x + TAU * xdot, xdot + TAU * xacc, th + TAU * thdot, thdot + TAU * thacc];
        let terminated =
            self.state[0].abs() > X_LIMIT || self.state[2].abs() > THETA_LIMIT;
        let truncated = self.episode.finish_step(&self.spec, terminated);
        Ok(Step { state: self.state.to_vec(), reward: 1.0, terminated, truncated })
    }

    fn clipped_action_count(&self) -> u64 {
        self.episode.clipped()
    }

    fn name(&self) -> &'static str {
        "cart_pole"
    }
}
