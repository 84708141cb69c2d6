//! Diagonal Gaussian policy with a state-independent log-std, plus the
//! scalar value network. Log-density, entropy, and KL are closed forms;
//! their parameter gradients are exact (no likelihood-ratio estimators).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::Mlp;
use crate::{ensure_finite, Error, Result};

/// Clamp range for the learned log-std. Reads clamp, gradients are gated to
/// the interior, so a parameter stuck outside the range receives no pull.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

pub(crate) const LN_TWO_PI: f64 = 1.8378770664093453;
/// 0.5 * (1 + ln 2π), the per-dimension entropy at σ = 1.
pub(crate) const HALF_LN_TWO_PI_E: f64 = 1.4189385332046727;

fn clamp_log_std(v: f64) -> f64 {
    v.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// Sum of per-dimension Gaussian log-densities. One canonical
/// implementation so sampling, training, and checks agree bit for bit.
pub(crate) fn gaussian_log_prob(
    mean: &[f64],
    log_std_clamped: &[f64],
    sigma: &[f64],
    action: &[f64],
) -> f64 {
    let mut lp = -(mean.len() as f64) * 0.5 * LN_TWO_PI;
    for i in 0..mean.len() {
        let z = (action[i] - mean[i]) / sigma[i];
        lp += -0.5 * z * z - log_std_clamped[i];
    }
    lp
}

/// Gaussian policy: an MLP for the mean, one log-std parameter per action
/// dimension shared across states.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    mean_net: Mlp,
    log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean_net: Mlp, log_std: Vec<f64>) -> Result<Self> {
        if log_std.len() != mean_net.output_dim() {
            return Err(Error::Config(format!(
                "log_std length {} does not match action dim {}",
                log_std.len(),
                mean_net.output_dim()
            )));
        }
        ensure_finite(&log_std, "log_std")?;
        Ok(GaussianPolicy { mean_net, log_std })
    }

    /// Fresh policy: hidden layers gain sqrt(2), mean head gain 0.01 so the
    /// initial policy is near-zero-mean, log-std starts at 0 (σ = 1).
    pub fn init<R: Rng + ?Sized>(
        state_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(state_dim);
        dims.extend_from_slice(hidden);
        dims.push(action_dim);
        let mean_net = Mlp::init(&dims, 0.01, rng)?;
        Ok(GaussianPolicy { mean_net, log_std: vec![0.0; action_dim] })
    }

    pub fn state_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    pub fn mean_net(&self) -> &Mlp {
        &self.mean_net
    }

    pub(crate) fn mean_net_mut(&mut self) -> &mut Mlp {
        &mut self.mean_net
    }

    /// Raw (unclamped) log-std parameters.
    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub(crate) fn log_std_mut(&mut self) -> &mut [f64] {
        &mut self.log_std
    }

    pub fn clamped_log_std(&self) -> Vec<f64> {
        self.log_std.iter().map(|&v| clamp_log_std(v)).collect()
    }

    pub fn std_devs(&self) -> Vec<f64> {
        self.log_std.iter().map(|&v| crate::num::exp(clamp_log_std(v))).collect()
    }

    /// 1 where the log-std parameter is strictly inside the clamp range,
    /// 0 where the clamp is active (no gradient flows there).
    pub(crate) fn clamp_mask(&self) -> Vec<f64> {
        self.log_std
            .iter()
            .map(|&v| if v > LOG_STD_MIN && v < LOG_STD_MAX { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(state)
    }

    /// Draw an action and return its log-density under the current policy.
    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean_net.forward(state)?;
        let ls = self.clamped_log_std();
        let sigma: Vec<f64> = ls.iter().map(|&v| crate::num::exp(v)).collect();
        let mut action = Vec::with_capacity(mean.len());
        for i in 0..mean.len() {
            let z: f64 = rng.sample(StandardNormal);
            action.push(mean[i] + sigma[i] * z);
        }
        let lp = gaussian_log_prob(&mean, &ls, &sigma, &action);
        Ok((action, lp))
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim() {
            return Err(Error::Config(format!(
                "action length {} does not match action dim {}",
                action.len(),
                self.action_dim()
            )));
        }
        ensure_finite(action, "action")?;
        let mean = self.mean_net.forward(state)?;
        let ls = self.clamped_log_std();
        let sigma: Vec<f64> = ls.iter().map(|&v| crate::num::exp(v)).collect();
        Ok(gaussian_log_prob(&mean, &ls, &sigma, action))
    }

    /// Differential entropy. With a state-independent log-std this does not
    /// vary with the state, but the state is still validated so call sites
    /// stay honest about where the entropy is being evaluated.
    pub fn entropy(&self, state: &[f64]) -> Result<f64> {
        if state.len() != self.state_dim() {
            return Err(Error::Config(format!(
                "state length {} does not match state dim {}",
                state.len(),
                self.state_dim()
            )));
        }
        Ok(self.entropy_closed())
    }

    /// Closed-form entropy: sum_i (1/2) ln(2πe σ_i²).
    pub fn entropy_closed(&self) -> f64 {
        self.log_std
            .iter()
            .map(|&v| HALF_LN_TWO_PI_E + clamp_log_std(v))
            .sum()
    }

    /// d entropy / d log_std_i: 1 inside the clamp range, 0 outside.
    pub fn entropy_grad_log_std(&self) -> Vec<f64> {
        self.clamp_mask()
    }

    /// KL(self(state) || other(state)) for the two diagonal Gaussians the
    /// policies induce at `state`.
    pub fn kl(&self, other: &GaussianPolicy, state: &[f64]) -> Result<f64> {
        if other.action_dim() != self.action_dim() {
            return Err(Error::Config("kl: action dims differ".into()));
        }
        let mp = self.mean_net.forward(state)?;
        let mq = other.mean_net.forward(state)?;
        let lsp = self.clamped_log_std();
        let lsq = other.clamped_log_std();
        let mut kl = 0.0;
        for i in 0..mp.len() {
            let sp2 = crate::num::exp(2.0 * lsp[i]);
            let sq2 = crate::num::exp(2.0 * lsq[i]);
            let dm = mp[i] - mq[i];
            kl += lsq[i] - lsp[i] + (sp2 + dm * dm) / (2.0 * sq2) - 0.5;
        }
        Ok(kl)
    }

    /// Log-density and its exact parameter gradients (mean net and log-std).
    pub fn log_prob_grad(&self, state: &[f64], action: &[f64]) -> Result<LogProbGrad> {
        if action.len() != self.action_dim() {
            return Err(Error::Config("log_prob_grad: action length mismatch".into()));
        }
        ensure_finite(action, "action")?;
        let cache = self.mean_net.forward_cached(state)?;
        let mean = cache.output().to_vec();
        let ls = self.clamped_log_std();
        let sigma: Vec<f64> = ls.iter().map(|&v| crate::num::exp(v)).collect();
        let mask = self.clamp_mask();
        let log_prob = gaussian_log_prob(&mean, &ls, &sigma, action);
        let mut d_mean = vec![0.0; mean.len()];
        let mut d_log_std = vec![0.0; mean.len()];
        for i in 0..mean.len() {
            let z = (action[i] - mean[i]) / sigma[i];
            d_mean[i] = z / sigma[i];
            d_log_std[i] = (z * z - 1.0) * mask[i];
        }
        let net = self.mean_net.backward(&cache, &d_mean)?;
        Ok(LogProbGrad { log_prob, net, log_std: d_log_std })
    }
}

/// Gradient of a single log-density w.r.t. the policy parameters.
#[derive(Debug, Clone)]
pub struct LogProbGrad {
    pub log_prob: f64,
    pub net: Mlp,
    pub log_std: Vec<f64>,
}

/// Scalar state-value network (an MLP with a single output).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    net: Mlp,
}

impl ValueNet {
    pub fn new(net: Mlp) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Config(format!(
                "value net must have scalar output, got dim {}",
                net.output_dim()
            )));
        }
        Ok(ValueNet { net })
    }

    /// Fresh value net: hidden gain sqrt(2), head gain 1.
    pub fn init<R: Rng + ?Sized>(state_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(state_dim);
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(ValueNet { net: Mlp::init(&dims, 1.0, rng)? })
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub(crate) fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.net.forward(state)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Policy whose mean is a constant (zero weights, bias = mean), so the
    /// closed forms can be checked against frozen values.
    fn const_policy(mean: &[f64], log_std: &[f64]) -> GaussianPolicy {
        let a = mean.len();
        let w = Matrix::zeros(a, 1);
        let net = Mlp::new(vec![w], vec![mean.to_vec()], Activation::Relu).unwrap();
        GaussianPolicy::new(net, log_std.to_vec()).unwrap()
    }

    const STATE: [f64; 1] = [0.0];

    #[test]
    fn log_prob_matches_frozen_value() {
        let p = const_policy(&[0.5, -1.0], &[-0.2, 0.3]);
        let lp = p.log_prob(&STATE, &[0.1, 0.2]).unwrap();
        assert!((lp - (-2.452_367_420_208_346)).abs() < 1e-14, "got {lp}");
    }

    #[test]
    fn entropy_matches_frozen_value_and_ignores_mean() {
        let p = const_policy(&[0.5, -1.0], &[-0.2, 0.3]);
        let h = p.entropy(&STATE).unwrap();
        assert!((h - 2.9378770664093454).abs() < 1e-14, "got {h}");
        let q = const_policy(&[5.0, 7.0], &[-0.2, 0.3]);
        assert_eq!(h.to_bits(), q.entropy(&STATE).unwrap().to_bits());
    }

    #[test]
    fn kl_matches_frozen_value() {
        let p = const_policy(&[0.5, -1.0], &[-0.2, 0.3]);
        let q = const_policy(&[0.2, -0.5], &[0.1, -0.1]);
        let kl = p.kl(&q, &STATE).unwrap();
        assert!((kl - 0.476_694_510_951_777_5).abs() < 1e-14, "got {kl}");
    }

    #[test]
    fn kl_of_identical_policies_is_zero_and_asymmetric_otherwise() {
        let p = const_policy(&[0.5, -1.0], &[-0.2, 0.3]);
        assert_eq!(p.kl(&p, &STATE).unwrap(), 0.0);
        let q = const_policy(&[0.2, -0.5], &[0.1, -0.1]);
        let fwd = p.kl(&q, &STATE).unwrap();
        let bwd = q.kl(&p, &STATE).unwrap();
        assert!(fwd > 0.0 && bwd > 0.0);
        assert!((fwd - bwd).abs() > 1e-6);
    }

    #[test]
    fn kl_nonnegative_over_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let m1 = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let m2 = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let l1 = [rng.random_range(-1.5..1.0), rng.random_range(-1.5..1.0)];
            let l2 = [rng.random_range(-1.5..1.0), rng.random_range(-1.5..1.0)];
            let p = const_policy(&m1, &l1);
            let q = const_policy(&m2, &l2);
            assert!(p.kl(&q, &STATE).unwrap() >= 0.0);
        }
    }

    #[test]
    fn sample_log_prob_agrees_with_log_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = GaussianPolicy::init(3, &[8], 2, &mut rng).unwrap();
        let state = [0.4, -0.2, 1.0];
        let (a, lp) = p.sample(&state, &mut rng).unwrap();
        let lp2 = p.log_prob(&state, &a).unwrap();
        assert_eq!(lp.to_bits(), lp2.to_bits());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let p = const_policy(&[0.5, -1.0], &[-0.2, 0.3]);
        let (a1, _) = p.sample(&STATE, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let (a2, _) = p.sample(&STATE, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn mean_action_is_deterministic_mode() {
        let p = const_policy(&[0.5, -1.0], &[-0.2, 0.3]);
        assert_eq!(p.mean_action(&STATE).unwrap(), vec![0.5, -1.0]);
    }

    #[test]
    fn sample_moments_match_parameters() {
        let p = const_policy(&[0.5, -1.0], &[-0.2, 0.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 200_000;
        let mut sum = [0.0f64; 2];
        let mut sumsq = [0.0f64; 2];
        for _ in 0..n {
            let (a, _) = p.sample(&STATE, &mut rng).unwrap();
            for i in 0..2 {
                sum[i] += a[i];
                sumsq[i] += a[i] * a[i];
            }
        }
        let sigma = p.std_devs();
        let means = [0.5, -1.0];
        for i in 0..2 {
            let m = sum[i] / n as f64;
            let v = sumsq[i] / n as f64 - m * m;
            let mean_tol = 4.0 * sigma[i] / (n as f64).sqrt();
            assert!((m - means[i]).abs() < mean_tol, "dim {i}: mean {m}");
            let var = sigma[i] * sigma[i];
            assert!((v - var).abs() < 6.0 * var / (n as f64).sqrt() * 2.0, "dim {i}: var {v}");
        }
    }

    #[test]
    fn log_std_clamps_on_read() {
        let p = const_policy(&[0.0], &[5.0]);
        let sigma = p.std_devs();
        assert!((sigma[0] - LOG_STD_MAX.exp()).abs() < 1e-15);
        assert_eq!(p.entropy_grad_log_std(), vec![0.0], "clamped dim gets no gradient");
        let q = const_policy(&[0.0], &[-0.5]);
        assert_eq!(q.entropy_grad_log_std(), vec![1.0]);
    }

    #[test]
    fn value_net_requires_scalar_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = Mlp::init(&[3, 4, 2], 1.0, &mut rng).unwrap();
        assert!(ValueNet::new(bad).is_err());
        let v = ValueNet::init(3, &[4], &mut rng).unwrap();
        let out = v.value(&[0.1, 0.2, 0.3]).unwrap();
        assert!(out.is_finite());
    }

    #[test]
    fn log_prob_integrates_to_one() {
        // 1-d quadrature of exp(log_prob) over a wide grid
        let p = const_policy(&[0.7], &[-0.3]);
        let sigma = p.std_devs()[0];
        let (lo, hi) = (0.7 - 12.0 * sigma, 0.7 + 12.0 * sigma);
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * p.log_prob(&STATE, &[x]).unwrap().exp();
        }
        total *= h;
        assert!((total - 1.0).abs() < 1e-9, "integral {total}");
    }

    #[test]
    fn entropy_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let mu = rng.random_range(-2.0..2.0);
            let ls = rng.random_range(-1.5..1.2);
            let p = const_policy(&[mu], &[ls]);
            let sigma = p.std_devs()[0];
            let (lo, hi) = (mu - 14.0 * sigma, mu + 14.0 * sigma);
            let n = 40_000;
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let x = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let lp = p.log_prob(&STATE, &[x]).unwrap();
                acc += w * lp.exp() * lp;
            }
            let h_quad = -acc * h;
            assert!((h_quad - p.entropy_closed()).abs() < 1e-8, "mu {mu} ls {ls}");
        }
    }
}
