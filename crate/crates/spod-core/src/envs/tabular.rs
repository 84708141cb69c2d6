//! Exact finite MDPs: dynamic-programming evaluation of plain and
//! entropy-augmented policy returns, soft value functions, and discounted
//! state-visit weights. Everything here is closed-form or a small linear
//! solve, so the identity checks can compare against it at 1e-8 tolerances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::num;
use crate::{Error, Result};

const DIST_TOL: f64 = 1e-12;

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    crate::ensure_finite(p, what)?;
    if p.iter().any(|&x| x < 0.0) {
        return Err(Error::Config(format!("{what} has a negative probability")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > DIST_TOL {
        return Err(Error::Config(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Entropy of a discrete distribution, -sum p ln p with 0 ln 0 = 0.
pub fn discrete_entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| if x > 0.0 { -x * num::ln(x) } else { 0.0 }).sum()
}

/// Draw a point on the probability simplex (uniformly, via normalized
/// exponentials; a tiny floor keeps every coordinate strictly positive).
fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| 1e-9 - num::ln(1.0 - rng.random::<f64>())).collect();
    let sum: f64 = w.iter().sum();
    for x in &mut w {
        *x /= sum;
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// transition[s][a][s'] = P(s' | s, a)
    transition: Vec<Vec<Vec<f64>>>,
    /// reward[s][a]
    reward: Vec<Vec<f64>>,
    gamma: f64,
    initial_dist: Vec<f64>,
}

impl TabularMdp {
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        gamma: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::Config("mdp needs at least one state".into()));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(Error::Config("mdp needs at least one action".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if reward.len() != n_states || initial_dist.len() != n_states {
            return Err(Error::Config("reward/initial_dist size mismatch".into()));
        }
        for (s, (row_p, row_r)) in transition.iter().zip(&reward).enumerate() {
            if row_p.len() != n_actions || row_r.len() != n_actions {
                return Err(Error::Config(format!("state {s} has a ragged action row")));
            }
            crate::ensure_finite(row_r, "reward")?;
            for (a, p) in row_p.iter().enumerate() {
                if p.len() != n_states {
                    return Err(Error::Config(format!(
                        "transition[{s}][{a}] has {} entries, expected {n_states}",
                        p.len()
                    )));
                }
                check_distribution(p, "transition row")?;
            }
        }
        check_distribution(&initial_dist, "initial distribution")?;
        Ok(TabularMdp { n_states, n_actions, transition, reward, gamma, initial_dist })
    }

    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let transition = (0..n_states)
            .map(|_| (0..n_actions).map(|_| random_simplex(n_states, rng)).collect())
            .collect();
        let reward = (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.random::<f64>()).collect())
            .collect();
        let initial_dist = random_simplex(n_states, rng);
        TabularMdp::new(transition, reward, gamma, initial_dist)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn transition(&self) -> &[Vec<Vec<f64>>] {
        &self.transition
    }

    pub fn reward(&self) -> &[Vec<f64>] {
        &self.reward
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    fn check_policy(&self, pi: &StochasticPolicy) -> Result<()> {
        if pi.n_states() != self.n_states || pi.n_actions() != self.n_actions {
            return Err(Error::Config(format!(
                "policy shape ({}, {}) does not match mdp ({}, {})",
                pi.n_states(),
                pi.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }

    /// State-to-state transition matrix under pi.
    fn policy_transition(&self, pi: &StochasticPolicy) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n_states]; self.n_states];
        for (s, row) in m.iter_mut().enumerate() {
            for a in 0..self.n_actions {
                let w = pi.probs()[s][a];
                for (sp, p) in self.transition[s][a].iter().enumerate() {
                    row[sp] += w * p;
                }
            }
        }
        m
    }
}

/// Explicit per-state action distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    probs: Vec<Vec<f64>>,
}

impl StochasticPolicy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(Error::Config("policy must be nonempty".into()));
        }
        let n_actions = probs[0].len();
        for row in &probs {
            if row.len() != n_actions {
                return Err(Error::Config("ragged policy rows".into()));
            }
            check_distribution(row, "policy row")?;
        }
        Ok(StochasticPolicy { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("policy must be nonempty".into()));
        }
        Ok(StochasticPolicy { probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states] })
    }

    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("policy must be nonempty".into()));
        }
        Ok(StochasticPolicy {
            probs: (0..n_states).map(|_| random_simplex(n_actions, rng)).collect(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// H(pi(. | s)) in nats.
    pub fn entropy(&self, s: usize) -> f64 {
        discrete_entropy(&self.probs[s])
    }
}

/// Evaluation horizon: truncated forward sum or exact linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

/// Solve a x = b by Gaussian elimination with partial pivoting. The systems
/// here are (I - gamma M) with M substochastic, always well conditioned.
// indexed elimination reads clearer than split_at_mut gymnastics
#[allow(clippy::needless_range_loop)]
pub(crate) fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))
            .expect("nonempty");
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::Numeric("singular linear system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Entropy-augmented reward table r^H(s,a) = r(s,a) + eta * E_{s'} H(pi(s')).
/// The bonus is the entropy of the NEXT state's action distribution; with
/// eta = 0 this is the plain reward table.
fn soft_reward_table(mdp: &TabularMdp, pi: &StochasticPolicy, eta: f64) -> Vec<Vec<f64>> {
    let next_h: Vec<f64> = (0..mdp.n_states()).map(|s| pi.entropy(s)).collect();
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| {
                    let bonus: f64 = mdp.transition()[s][a]
                        .iter()
                        .zip(&next_h)
                        .map(|(p, h)| p * h)
                        .sum();
                    mdp.reward()[s][a] + eta * bonus
                })
                .collect()
        })
        .collect()
}

/// Exact soft state values V^H(s) at infinite horizon:
/// solve (I - gamma P_pi) V = r^H_pi.
pub fn soft_state_values(mdp: &TabularMdp, pi: &StochasticPolicy, eta: f64) -> Result<Vec<f64>> {
    mdp.check_policy(pi)?;
    let r_soft = soft_reward_table(mdp, pi, eta);
    let p_pi = mdp.policy_transition(pi);
    let n = mdp.n_states();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        for sp in 0..n {
            a[s][sp] = if s == sp { 1.0 } else { 0.0 } - mdp.gamma() * p_pi[s][sp];
        }
        b[s] = (0..mdp.n_actions()).map(|ac| pi.probs()[s][ac] * r_soft[s][ac]).sum();
    }
    solve_linear(a, b)
}

/// Exact soft action values Q^H(s,a) = r^H(s,a) + gamma * E_{s'} V^H(s').
pub fn soft_q_values(mdp: &TabularMdp, pi: &StochasticPolicy, eta: f64) -> Result<Vec<Vec<f64>>> {
    let v = soft_state_values(mdp, pi, eta)?;
    let r_soft = soft_reward_table(mdp, pi, eta);
    Ok((0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| {
                    let exp_v: f64 =
                        mdp.transition()[s][a].iter().zip(&v).map(|(p, vv)| p * vv).sum();
                    r_soft[s][a] + mdp.gamma() * exp_v
                })
                .collect()
        })
        .collect())
}

/// Discounted state-visit weights d(s) = sum_t gamma^t P(s_t = s | pi), either
/// truncated at a finite horizon or solved exactly.
pub fn discounted_visit_weights(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    horizon: Horizon,
) -> Result<Vec<f64>> {
    mdp.check_policy(pi)?;
    let n = mdp.n_states();
    let p_pi = mdp.policy_transition(pi);
    match horizon {
        Horizon::Finite(t_max) => {
            let mut dist = mdp.initial_dist().to_vec();
            let mut weights = vec![0.0; n];
            let mut discount = 1.0;
            for _ in 0..t_max {
                for s in 0..n {
                    weights[s] += discount * dist[s];
                }
                let mut next = vec![0.0; n];
                for s in 0..n {
                    if dist[s] == 0.0 {
                        continue;
                    }
                    for sp in 0..n {
                        next[sp] += dist[s] * p_pi[s][sp];
                    }
                }
                dist = next;
                discount *= mdp.gamma();
            }
            Ok(weights)
        }
        Horizon::Infinite => {
            // (I - gamma P_pi^T) d = rho
            let mut a = vec![vec![0.0; n]; n];
            for s in 0..n {
                for sp in 0..n {
                    a[s][sp] = if s == sp { 1.0 } else { 0.0 } - mdp.gamma() * p_pi[sp][s];
                }
            }
            solve_linear(a, mdp.initial_dist().to_vec())
        }
    }
}

/// Exact J^H(pi) = E[sum gamma^t r^H] with entropy temperature eta.
pub fn exact_soft_policy_return(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    eta: f64,
    horizon: Horizon,
) -> Result<f64> {
    mdp.check_policy(pi)?;
    match horizon {
        Horizon::Infinite => {
            let v = soft_state_values(mdp, pi, eta)?;
            Ok(mdp.initial_dist().iter().zip(&v).map(|(p, vv)| p * vv).sum())
        }
        Horizon::Finite(_) => {
            let weights = discounted_visit_weights(mdp, pi, horizon)?;
            let r_soft = soft_reward_table(mdp, pi, eta);
            let mut total = 0.0;
            for s in 0..mdp.n_states() {
                let r_pi: f64 =
                    (0..mdp.n_actions()).map(|a| pi.probs()[s][a] * r_soft[s][a]).sum();
                total += weights[s] * r_pi;
            }
            Ok(total)
        }
    }
}

/// Exact plain return J(pi), the eta = 0 special case.
pub fn exact_policy_return(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    horizon: Horizon,
) -> Result<f64> {
    exact_soft_policy_return(mdp, pi, 0.0, horizon)
}
