//! Dense feed-forward networks with hand-written gradients, plus Adam.
//!
//! Shapes are fixed at construction; every public operation validates its
//! inputs and refuses to produce non-finite output. Gradients come back in
//! a container with the exact shape of the parameters, so optimizer state
//! can mirror the network structurally.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{ensure_finite, Error, Result};

/// Row-major dense matrix. Entries are finite after any public operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        ensure_finite(&data, "matrix entries")?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// y = W x
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (yr, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            let mut acc = 0.0;
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *yr = acc;
        }
    }

    /// x_grad += W^T dz, written row-wise so the access pattern stays contiguous.
    fn matvec_t_add(&self, dz: &[f64], x_grad: &mut [f64]) {
        debug_assert_eq!(dz.len(), self.rows);
        debug_assert_eq!(x_grad.len(), self.cols);
        for (dzr, row) in dz.iter().zip(self.data.chunks_exact(self.cols)) {
            for (xg, w) in x_grad.iter_mut().zip(row) {
                *xg += dzr * w;
            }
        }
    }

    /// self += scale * dz x^T
    fn add_outer_scaled(&mut self, dz: &[f64], x: &[f64], scale: f64) {
        debug_assert_eq!(dz.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (dzr, row) in dz.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            let s = scale * dzr;
            for (w, xi) in row.iter_mut().zip(x) {
                *w += s * xi;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

/// Multi-layer perceptron: `weights[l]` maps layer `l` input to output,
/// hidden layers pass through the activation, the final layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

/// Everything `backward` needs: layer inputs and pre-activations.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// acts[0] is the network input, acts[l+1] the post-activation output
    /// of layer l (for the last layer: the network output).
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    pub fn new(weights: Vec<Matrix>, biases: Vec<Vec<f64>>, activation: Activation) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Config(format!(
                "need one bias vector per weight matrix, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.rows() != b.len() {
                return Err(Error::Config(format!(
                    "layer {l}: weight has {} rows but bias has length {}",
                    w.rows(),
                    b.len()
                )));
            }
            if l + 1 < weights.len() && weights[l + 1].cols() != w.rows() {
                return Err(Error::Config(format!(
                    "layer {} input dim {} does not match layer {l} output dim {}",
                    l + 1,
                    weights[l + 1].cols(),
                    w.rows()
                )));
            }
            ensure_finite(b, "bias entries")?;
        }
        Ok(Mlp { weights, biases, activation })
    }

    /// Scaled-uniform init: hidden layers use gain sqrt(2) (ReLU), the output
    /// layer uses `head_gain`. Limits are gain * sqrt(3 / fan_in) so each
    /// weight has variance gain^2 / fan_in. Biases start at zero.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], head_gain: f64, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("mlp needs at least input and output dims".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Config("mlp dims must be nonzero".into()));
        }
        let n_layers = dims.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let gain = if l + 1 == n_layers { head_gain } else { crate::num::sqrt(2.0) };
            let limit = gain * crate::num::sqrt(3.0 / fan_in as f64);
            let data: Vec<f64> =
                (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp { weights, biases, activation: Activation::Relu })
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().expect("nonempty").rows()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Same shapes, all parameters zero. Gradient and optimizer containers.
    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            weights: self.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            activation: self.activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub(crate) fn flat_parts_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        let Mlp { weights, biases, .. } = self;
        weights
            .iter_mut()
            .map(|w| w.as_mut_slice())
            .chain(biases.iter_mut().map(|b| b.as_mut_slice()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Config(format!(
                "input length {} does not match network input dim {}",
                x.len(),
                self.input_dim()
            )));
        }
        ensure_finite(x, "network input")
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            next.clear();
            next.resize(w.rows(), 0.0);
            w.matvec(&cur, &mut next);
            for (n, bi) in next.iter_mut().zip(b) {
                *n += bi;
                if l < last {
                    match self.activation {
                        Activation::Relu => {
                            if *n < 0.0 {
                                *n = 0.0;
                            }
                        }
                    }
                }
            }
            core::mem::swap(&mut cur, &mut next);
        }
        ensure_finite(&cur, "network output")?;
        Ok(cur)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        let mut pre = Vec::with_capacity(self.weights.len());
        acts.push(x.to_vec());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = vec![0.0; w.rows()];
            w.matvec(&acts[l], &mut z);
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
            let mut a = z.clone();
            if l < last {
                match self.activation {
                    Activation::Relu => {
                        for ai in &mut a {
                            if *ai < 0.0 {
                                *ai = 0.0;
                            }
                        }
                    }
                }
            }
            pre.push(z);
            acts.push(a);
        }
        ensure_finite(acts.last().expect("output"), "network output")?;
        Ok(ForwardCache { acts, pre })
    }

    /// Accumulate `scale` times the parameter gradient of `out_grad . output`
    /// into `acc` (which must be `zeros_like`-shaped). Used per-sample so a
    /// minibatch shares one gradient buffer.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        out_grad: &[f64],
        scale: f64,
        acc: &mut Mlp,
    ) -> Result<()> {
        if out_grad.len() != self.output_dim() {
            return Err(Error::Config(format!(
                "output grad length {} does not match output dim {}",
                out_grad.len(),
                self.output_dim()
            )));
        }
        if acc.weights.len() != self.weights.len() {
            return Err(Error::Config("gradient accumulator shape mismatch".into()));
        }
        ensure_finite(out_grad, "output gradient")?;
        let mut dz = out_grad.to_vec();
        for l in (0..self.weights.len()).rev() {
            acc.weights[l].add_outer_scaled(&dz, &cache.acts[l], scale);
            for (bg, d) in acc.biases[l].iter_mut().zip(&dz) {
                *bg += scale * d;
            }
            if l == 0 {
                break;
            }
            let mut da = vec![0.0; self.weights[l].cols()];
            self.weights[l].matvec_t_add(&dz, &mut da);
            // gate through the previous layer's activation
            match self.activation {
                Activation::Relu => {
                    for (d, z) in da.iter_mut().zip(&cache.pre[l - 1]) {
                        if *z <= 0.0 {
                            *d = 0.0;
                        }
                    }
                }
            }
            dz = da;
        }
        Ok(())
    }

    /// Parameter gradients of `out_grad . output` as a fresh container.
    pub fn backward(&self, cache: &ForwardCache, out_grad: &[f64]) -> Result<Mlp> {
        let mut acc = self.zeros_like();
        self.backward_into(cache, out_grad, 1.0, &mut acc)?;
        Ok(acc)
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// One Adam update on a flat parameter slice. Bias-corrected, eps outside
/// the square root, moment decay fixed at the crate constants.
fn adam_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] -= lr * m_hat / (crate::num::sqrt(v_hat) + ADAM_EPS);
    }
}

/// Adam state for an [`Mlp`]; `m` and `v` mirror the parameter shapes.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Mlp,
    v: Mlp,
    step_count: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl AdamState {
    pub fn new(template: &Mlp) -> Self {
        AdamState {
            m: template.zeros_like(),
            v: template.zeros_like(),
            step_count: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update. A non-finite gradient rejects the whole update and
    /// leaves both parameters and state untouched.
    pub fn step(&mut self, params: &mut Mlp, grads: &Mlp, lr: f64) -> Result<()> {
        if params.weights.len() != grads.weights.len() {
            return Err(Error::Config("adam: gradient shape mismatch".into()));
        }
        for w in &grads.weights {
            ensure_finite(w.as_slice(), "gradient")?;
        }
        for b in &grads.biases {
            ensure_finite(b, "gradient")?;
        }
        if !lr.is_finite() {
            return Err(Error::Numeric("non-finite learning rate".into()));
        }
        self.step_count += 1;
        self.beta1_pow *= ADAM_BETA1;
        self.beta2_pow *= ADAM_BETA2;
        let (bias1, bias2) = (1.0 - self.beta1_pow, 1.0 - self.beta2_pow);
        for l in 0..params.weights.len() {
            adam_slice(
                params.weights[l].as_mut_slice(),
                grads.weights[l].as_slice(),
                self.m.weights[l].as_mut_slice(),
                self.v.weights[l].as_mut_slice(),
                lr,
                bias1,
                bias2,
            );
            adam_slice(
                &mut params.biases[l],
                &grads.biases[l],
                &mut self.m.biases[l],
                &mut self.v.biases[l],
                lr,
                bias1,
                bias2,
            );
        }
        Ok(())
    }
}

/// Adam state for a flat vector parameter (the policy's log-std).
#[derive(Debug, Clone)]
pub struct VecAdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step_count: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl VecAdamState {
    pub fn new(len: usize) -> Self {
        VecAdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step_count: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::Config("adam: vector length mismatch".into()));
        }
        ensure_finite(grads, "gradient")?;
        if !lr.is_finite() {
            return Err(Error::Numeric("non-finite learning rate".into()));
        }
        self.step_count += 1;
        self.beta1_pow *= ADAM_BETA1;
        self.beta2_pow *= ADAM_BETA2;
        adam_slice(
            params,
            grads,
            &mut self.m,
            &mut self.v,
            lr,
            1.0 - self.beta1_pow,
            1.0 - self.beta2_pow,
        );
        Ok(())
    }
}

/// Scale `parts` so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(parts: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for part in parts.iter() {
        for &g in part.iter() {
            sq += g * g;
        }
    }
    let norm = crate::num::sqrt(sq);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for part in parts.iter_mut() {
            for g in part.iter_mut() {
                *g *= scale;
            }
        }
    }
    norm
}
