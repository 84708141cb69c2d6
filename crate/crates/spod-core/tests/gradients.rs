//! Central finite-difference validation of every analytic gradient: the
//! clipped surrogate (mean-net and log-std, entropy term included), value
//! regression, per-sample log-probability, and the closed-form entropy.
//!
//! Error metric: |analytic - numeric| / max(|analytic|, |numeric|, 1), so
//! large components are judged relatively and near-zero components on the
//! loss scale. All losses here are O(1).
//!
//! Two guards keep the probes on differentiable ground. Freshly initialized
//! nets have zero biases, so a state that kills a whole ReLU layer parks the
//! next pre-activation exactly on the kink, where central differences
//! measure the average of the two one-sided slopes no matter how small the
//! step; jittering every parameter after init moves the kinks to
//! measure-zero positions. A probe can still straddle a kink that sits
//! within one step of the evaluation point, so coordinates that disagree at
//! the first step size are retried with smaller steps: the disagreement
//! vanishes for a correct gradient and persists for a wrong one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spod_core::loss::{
    clipped_surrogate_loss, value_regression_loss, SampleSet, SurrogateSettings,
};
use spod_core::nn::{Matrix, Mlp};
use spod_core::policy::{GaussianPolicy, ValueNet};

const STEP_LADDER: [f64; 3] = [1e-5, 1e-6, 1e-7];
const MAX_REL_ERR: f64 = 1e-4;
const N_INSTANCES: usize = 100;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

fn flatten(net: &Mlp) -> Vec<f64> {
    let mut out = Vec::with_capacity(net.param_count());
    for (w, b) in net.weights().iter().zip(net.biases()) {
        out.extend_from_slice(w.as_slice());
        out.extend_from_slice(b);
    }
    out
}

fn rebuild(template: &Mlp, flat: &[f64]) -> Mlp {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut pos = 0;
    for (w, b) in template.weights().iter().zip(template.biases()) {
        let n = w.rows() * w.cols();
        weights.push(Matrix::from_vec(w.rows(), w.cols(), flat[pos..pos + n].to_vec()).unwrap());
        pos += n;
        biases.push(flat[pos..pos + b.len()].to_vec());
        pos += b.len();
    }
    assert_eq!(pos, flat.len());
    Mlp::new(weights, biases, template.activation()).unwrap()
}

/// Worst rel_err between `grads` and central differences of `f` over every
/// coordinate of `flat`, with the step-ladder retry described above.
fn check_against_fd(
    flat: &[f64],
    grads: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    assert_eq!(flat.len(), grads.len());
    let mut worst = 0.0f64;
    let mut probe = flat.to_vec();
    for i in 0..flat.len() {
        let mut best = f64::INFINITY;
        for &h in &STEP_LADDER {
            probe[i] = flat[i] + h;
            let up = f(&probe);
            probe[i] = flat[i] - h;
            let down = f(&probe);
            probe[i] = flat[i];
            best = best.min(rel_err(grads[i], (up - down) / (2.0 * h)));
            if best < MAX_REL_ERR {
                break;
            }
        }
        worst = worst.max(best);
    }
    worst
}

/// Uniform jitter on every weight and bias so no ReLU kink sits exactly at
/// the evaluation point (fresh inits have all-zero biases).
fn jitter(net: &Mlp, scale: f64, rng: &mut ChaCha8Rng) -> Mlp {
    let moved: Vec<f64> = flatten(net)
        .iter()
        .map(|w| w + rng.random_range(-scale..scale))
        .collect();
    rebuild(net, &moved)
}

fn random_policy(rng: &mut ChaCha8Rng) -> GaussianPolicy {
    let p = GaussianPolicy::init(3, &[6, 4], 2, rng).unwrap();
    let net = jitter(p.mean_net(), 0.1, rng);
    // move the log-std off its zero init, staying deep inside the clamp range
    let ls: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..0.5)).collect();
    GaussianPolicy::new(net, ls).unwrap()
}

fn random_value(rng: &mut ChaCha8Rng) -> ValueNet {
    let v = ValueNet::init(3, &[6, 4], rng).unwrap();
    ValueNet::new(jitter(v.net(), 0.1, rng)).unwrap()
}

/// Samples drawn from a slightly different policy so the probability ratios
/// spread around 1 and both clip branches appear across instances.
fn random_sample_set(policy: &GaussianPolicy, n: usize, rng: &mut ChaCha8Rng) -> SampleSet {
    let behind = {
        let flat: Vec<f64> = flatten(policy.mean_net())
            .iter()
            .map(|w| w + rng.random_range(-0.05..0.05))
            .collect();
        GaussianPolicy::new(rebuild(policy.mean_net(), &flat), policy.log_std().to_vec())
            .unwrap()
    };
    let mut set = SampleSet {
        states: Vec::new(),
        actions: Vec::new(),
        old_log_probs: Vec::new(),
        advantages: Vec::new(),
        value_targets: Vec::new(),
        old_entropies: Vec::new(),
    };
    for _ in 0..n {
        let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, lp) = behind.sample(&s, rng).unwrap();
        set.states.push(s);
        set.actions.push(a);
        set.old_log_probs.push(lp);
        set.advantages.push(rng.random_range(-2.0..2.0));
        set.value_targets.push(rng.random_range(-2.0..2.0));
        set.old_entropies.push(behind.entropy_closed());
    }
    set
}

#[test]
fn surrogate_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51ad);
    let mut worst = 0.0f64;
    for k in 0..N_INSTANCES {
        let policy = random_policy(&mut rng);
        let set = random_sample_set(&policy, 12, &mut rng);
        let idx: Vec<usize> = (0..set.len()).collect();
        let settings = SurrogateSettings {
            clip_eps: 0.2,
            eta: if k % 2 == 0 { 1e-3 } else { 0.0 },
            entropy_loss_coef: 1.0,
            use_clip: k % 3 != 2,
        };
        let report = clipped_surrogate_loss(&policy, &set, &idx, &settings)
            .unwrap()
            .expect("finite ratios");

        let flat_net = flatten(policy.mean_net());
        let e_net = check_against_fd(&flat_net, &flatten(&report.net_grads), |f| {
            let p =
                GaussianPolicy::new(rebuild(policy.mean_net(), f), policy.log_std().to_vec())
                    .unwrap();
            clipped_surrogate_loss(&p, &set, &idx, &settings).unwrap().unwrap().loss
        });

        let e_ls = check_against_fd(policy.log_std(), &report.log_std_grads, |f| {
            let p = GaussianPolicy::new(policy.mean_net().clone(), f.to_vec()).unwrap();
            clipped_surrogate_loss(&p, &set, &idx, &settings).unwrap().unwrap().loss
        });

        worst = worst.max(e_net).max(e_ls);
        assert!(
            e_net < MAX_REL_ERR && e_ls < MAX_REL_ERR,
            "instance {k}: net {e_net:.3e}, log_std {e_ls:.3e}"
        );
    }
    println!("surrogate worst rel err over {N_INSTANCES} instances: {worst:.3e}");
}

#[test]
fn value_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a1e);
    let mut worst = 0.0f64;
    for k in 0..N_INSTANCES {
        let value = random_value(&mut rng);
        let policy = random_policy(&mut rng);
        let set = random_sample_set(&policy, 12, &mut rng);
        let idx: Vec<usize> = (0..set.len()).collect();
        let (_, grads) = value_regression_loss(&value, &set, &idx, 0.5).unwrap();
        let flat = flatten(value.net());
        let e = check_against_fd(&flat, &flatten(&grads), |f| {
            let v = ValueNet::new(rebuild(value.net(), f)).unwrap();
            value_regression_loss(&v, &set, &idx, 0.5).unwrap().0
        });
        worst = worst.max(e);
        assert!(e < MAX_REL_ERR, "instance {k}: {e:.3e}");
    }
    println!("value worst rel err over {N_INSTANCES} instances: {worst:.3e}");
}

#[test]
fn log_prob_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x109b);
    let mut worst = 0.0f64;
    for k in 0..N_INSTANCES {
        let policy = random_policy(&mut rng);
        let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, _) = policy.sample(&s, &mut rng).unwrap();
        let g = policy.log_prob_grad(&s, &a).unwrap();

        let flat_net = flatten(policy.mean_net());
        let e_net = check_against_fd(&flat_net, &flatten(&g.net), |f| {
            GaussianPolicy::new(rebuild(policy.mean_net(), f), policy.log_std().to_vec())
                .unwrap()
                .log_prob(&s, &a)
                .unwrap()
        });
        let e_ls = check_against_fd(policy.log_std(), &g.log_std, |f| {
            GaussianPolicy::new(policy.mean_net().clone(), f.to_vec())
                .unwrap()
                .log_prob(&s, &a)
                .unwrap()
        });
        worst = worst.max(e_net).max(e_ls);
        assert!(
            e_net < MAX_REL_ERR && e_ls < MAX_REL_ERR,
            "instance {k}: net {e_net:.3e}, log_std {e_ls:.3e}"
        );
    }
    println!("log-prob worst rel err over {N_INSTANCES} instances: {worst:.3e}");
}

#[test]
fn entropy_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe07);
    let mut worst = 0.0f64;
    for k in 0..N_INSTANCES {
        let policy = random_policy(&mut rng);
        let analytic = policy.entropy_grad_log_std();
        let e = check_against_fd(policy.log_std(), &analytic, |f| {
            GaussianPolicy::new(policy.mean_net().clone(), f.to_vec())
                .unwrap()
                .entropy_closed()
        });
        worst = worst.max(e);
        assert!(e < MAX_REL_ERR, "instance {k}: {e:.3e}");
    }
    println!("entropy worst rel err over {N_INSTANCES} instances: {worst:.3e}");
}
