//! Numerical verification of the method's provable claims at desk scale:
//! the exact performance-difference identity for the entropy-augmented
//! objective on finite MDPs, the entropy-difference bound under a KL budget,
//! and the total-variation/KL inequality for Gaussians. Each check returns a
//! [`CheckReport`] with the worst observed violation against a pinned
//! tolerance.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::tabular::{
    discounted_visit_weights, exact_soft_policy_return, soft_q_values, soft_state_values,
    Horizon, StochasticPolicy, TabularMdp,
};
use crate::num;
use crate::Result;

pub const IDENTITY_TOL: f64 = 1e-8;
pub const ENTROPY_BOUND_TOL: f64 = 0.0;
pub const BOUNDARY_TOL: f64 = 1e-9;
pub const TV_KL_TOL: f64 = 1e-9;

const HALF_LN_TWO_PI_E: f64 = 1.4189385332046727;

/// Outcome of one numerical check: worst violation over all instances,
/// judged against the check's tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    pub fn new(name: &str, instances: usize, max_violation: f64, tolerance: f64) -> Self {
        CheckReport {
            name: String::from(name),
            instances,
            max_violation,
            tolerance,
            passed: max_violation <= tolerance,
        }
    }

    /// One status line, stable format for the command-line `check` output.
    pub fn summary(&self) -> String {
        format!(
            "{}: {} over {} instances, max violation {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.max_violation,
            self.tolerance
        )
    }
}

/// Entropy of N(mu, sigma^2) in nats.
pub fn gaussian_entropy_1d(sigma: f64) -> f64 {
    HALF_LN_TWO_PI_E + num::ln(sigma)
}

/// KL(N(mu1, sigma1^2) || N(mu2, sigma2^2)).
pub fn gaussian_kl_1d(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> f64 {
    let dm = mu1 - mu2;
    num::ln(sigma2 / sigma1) + (sigma1 * sigma1 + dm * dm) / (2.0 * sigma2 * sigma2) - 0.5
}

/// Total variation distance between two 1-D Gaussians by trapezoid
/// quadrature of (1/2) integral |p - q| over +-12 sigma.
pub fn gaussian_tv_1d(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> f64 {
    let lo = (mu1 - 12.0 * sigma1).min(mu2 - 12.0 * sigma2);
    let hi = (mu1 + 12.0 * sigma1).max(mu2 + 12.0 * sigma2);
    let n = 16384usize;
    let h = (hi - lo) / n as f64;
    let pdf = |mu: f64, sigma: f64, x: f64| {
        let z = (x - mu) / sigma;
        num::exp(-0.5 * z * z) / (sigma * num::sqrt(2.0 * core::f64::consts::PI))
    };
    let f = |x: f64| (pdf(mu1, sigma1, x) - pdf(mu2, sigma2, x)).abs();
    let mut acc = 0.5 * (f(lo) + f(hi));
    for k in 1..n {
        acc += f(lo + h * k as f64);
    }
    0.5 * acc * h
}

/// Per-(state, action) improvement weights of `pi_hat` over `pi`:
/// the exact soft advantage of `pi` plus the temperature-weighted expected
/// next-state entropy difference.
fn improvement_weights(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    pi_hat: &StochasticPolicy,
    eta: f64,
) -> Result<Vec<Vec<f64>>> {
    let v = soft_state_values(mdp, pi, eta)?;
    let q = soft_q_values(mdp, pi, eta)?;
    let h_gap: Vec<f64> =
        (0..mdp.n_states()).map(|s| pi_hat.entropy(s) - pi.entropy(s)).collect();
    Ok((0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| {
                    let exp_gap: f64 = mdp.transition()[s][a]
                        .iter()
                        .zip(&h_gap)
                        .map(|(p, g)| p * g)
                        .sum();
                    (q[s][a] - v[s]) + eta * exp_gap
                })
                .collect()
        })
        .collect())
}

/// Check the exact identity: the difference of entropy-augmented returns
/// J(pi_hat) - J(pi) equals the expectation, under pi_hat's discounted
/// state-action occupancy, of the improvement weights of pi. The left side
/// is solved exactly; the right side is truncated at `horizon` (or solved
/// exactly at `Horizon::Infinite`), so the reported violation is the
/// truncation tail plus float noise.
pub fn verify_performance_identity(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    pi_hat: &StochasticPolicy,
    eta: f64,
    horizon: Horizon,
) -> Result<CheckReport> {
    let lhs = exact_soft_policy_return(mdp, pi_hat, eta, Horizon::Infinite)?
        - exact_soft_policy_return(mdp, pi, eta, Horizon::Infinite)?;
    let t = improvement_weights(mdp, pi, pi_hat, eta)?;
    let d = discounted_visit_weights(mdp, pi_hat, horizon)?;
    let mut rhs = 0.0;
    for ((ds, probs), weights) in d.iter().zip(pi_hat.probs()).zip(&t) {
        for (p, w) in probs.iter().zip(weights) {
            rhs += ds * p * w;
        }
    }
    Ok(CheckReport::new(
        "performance_identity",
        1,
        (lhs - rhs).abs(),
        IDENTITY_TOL,
    ))
}

/// Horizon long enough that the truncation tail of the identity's right side
/// is below `target`: gamma^T * max|weight| / (1 - gamma) < target.
fn horizon_for_tail(gamma: f64, max_weight: f64, target: f64) -> usize {
    if max_weight <= 0.0 {
        return 1;
    }
    let needed = target * (1.0 - gamma) / max_weight;
    if needed >= 1.0 {
        return 1;
    }
    let t = num::ln(needed) / num::ln(gamma);
    (t as usize + 2).min(5000)
}

/// The identity over freshly drawn random MDPs (2-6 states, 2-3 actions,
/// gamma 0.9) and random policy pairs, with per-instance horizons chosen so
/// the truncation tail sits a decade under the tolerance.
pub fn performance_identity_suite(n_mdps: usize, eta: f64, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = 0.9;
    let mut max_violation = 0.0f64;
    for _ in 0..n_mdps {
        let n_states = rng.random_range(2..=6);
        let n_actions = rng.random_range(2..=3);
        let mdp = TabularMdp::random(n_states, n_actions, gamma, &mut rng)?;
        let pi = StochasticPolicy::random(n_states, n_actions, &mut rng)?;
        let pi_hat = StochasticPolicy::random(n_states, n_actions, &mut rng)?;
        let t = improvement_weights(&mdp, &pi, &pi_hat, eta)?;
        let max_weight = t
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        let horizon = horizon_for_tail(gamma, max_weight, IDENTITY_TOL / 10.0);
        let rep =
            verify_performance_identity(&mdp, &pi, &pi_hat, eta, Horizon::Finite(horizon))?;
        max_violation = max_violation.max(rep.max_violation);
    }
    Ok(CheckReport::new(
        &format!("performance_identity(eta={eta})"),
        n_mdps,
        max_violation,
        IDENTITY_TOL,
    ))
}

/// Entropy gap of the widening construction sitting exactly at the bound:
/// sigma_hat = sigma * e^(delta + 1/2) gives H(pi_hat) - H(pi) = delta + 1/2.
/// Returns the measured gap minus the bound (0 up to float error).
pub fn entropy_bound_boundary_gap(delta: f64) -> f64 {
    let sigma = 1.3;
    let sigma_hat = sigma * num::exp(delta + 0.5);
    let diff = gaussian_entropy_1d(sigma_hat) - gaussian_entropy_1d(sigma);
    diff - (delta + 0.5)
}

/// Random 1-D Gaussian pairs filtered to KL(pi || pi_hat) <= delta must all
/// satisfy H(pi_hat) - H(pi) <= delta + 1/2 nats. `n_pairs` counts accepted
/// pairs; the violation is the worst bound excess, clamped at zero.
pub fn verify_entropy_kl_bound(n_pairs: usize, delta: f64, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = delta + 0.5;
    let mut accepted = 0usize;
    let mut max_excess = f64::NEG_INFINITY;
    while accepted < n_pairs {
        let mu = rng.random_range(-2.0..2.0);
        let sigma = num::exp(rng.random_range(-1.0..1.0));
        // perturbations scaled so roughly half the draws pass the KL filter
        let mu_hat = mu + sigma * rng.random_range(-1.0..1.0) * num::sqrt(2.0 * delta);
        let sigma_hat = sigma * num::exp(rng.random_range(-1.0..1.0) * num::sqrt(delta));
        if gaussian_kl_1d(mu, sigma, mu_hat, sigma_hat) > delta {
            continue;
        }
        accepted += 1;
        let gap = gaussian_entropy_1d(sigma_hat) - gaussian_entropy_1d(sigma);
        max_excess = max_excess.max(gap - bound);
    }
    CheckReport::new(
        &format!("entropy_kl_bound(delta={delta})"),
        n_pairs,
        max_excess.max(0.0),
        ENTROPY_BOUND_TOL,
    )
}

/// Random 1-D Gaussian pairs must satisfy D_TV^2 <= D_KL (total variation by
/// quadrature, KL in closed form).
pub fn verify_tv_kl_inequality(n_pairs: usize, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let mu1 = rng.random_range(-3.0..3.0);
        let mu2 = rng.random_range(-3.0..3.0);
        let s1 = num::exp(rng.random_range(-1.5..1.5));
        let s2 = num::exp(rng.random_range(-1.5..1.5));
        let tv = gaussian_tv_1d(mu1, s1, mu2, s2);
        let kl = gaussian_kl_1d(mu1, s1, mu2, s2);
        max_violation = max_violation.max(tv * tv - kl);
    }
    CheckReport::new("tv_squared_le_kl", n_pairs, max_violation.max(0.0), TV_KL_TOL)
}

/// The whole standard battery, as run by the `check` subcommand.
pub fn standard_checks(seed: u64) -> Result<Vec<CheckReport>> {
    let boundary = entropy_bound_boundary_gap(0.01)
        .abs()
        .max(entropy_bound_boundary_gap(0.1).abs());
    let mut out = vec![
        performance_identity_suite(50, 0.0, seed)?,
        performance_identity_suite(50, 0.1, seed ^ 0x9e3779b97f4a7c15)?,
        verify_entropy_kl_bound(10_000, 0.01, seed.wrapping_add(1)),
        verify_entropy_kl_bound(10_000, 0.1, seed.wrapping_add(2)),
        CheckReport::new("entropy_bound_boundary", 2, boundary, BOUNDARY_TOL),
        verify_tv_kl_inequality(10_000, seed.wrapping_add(3)),
    ];
    // spot instance with closed-form KL exactly one half
    let spot_kl = gaussian_kl_1d(0.0, 1.0, 1.0, 1.0);
    let spot_tv = gaussian_tv_1d(0.0, 1.0, 1.0, 1.0);
    let spot_violation = (spot_kl - 0.5).abs().max(spot_tv * spot_tv - spot_kl);
    out.push(CheckReport::new("tv_kl_spot_standard_normals", 1, spot_violation, TV_KL_TOL));
    Ok(out)
}
