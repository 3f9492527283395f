//! Minimal feed-forward network: Leaky-ReLU/softplus layers, per-layer
//! dropout masks, exact backpropagation, L2 weight decay, and Adam.
//!
//! The network has a base trunk feeding a mandatory score head (final
//! activation identity, width 1) and an optional task head (final
//! activation softplus, width 2) that emits per-record Weibull `(lambda,
//! c)` estimates. Dropout follows the mask convention `W' = W M`: a
//! binary diagonal mask on each layer's *input*, sampled fresh per step.
//! The per-layer rate is the DROP probability (keep = 1 - rate). No
//! inverted-dropout rescaling happens anywhere: prediction keeps masks
//! active and averages, so rescaling would change the averaging target.
//! The maskless pass exists for deterministic scoring and tests.
//!
//! Everything is 64-bit; the gradient path is gated by central finite
//! differences in the tests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// Slope 0.01 on the negative side.
    LeakyRelu,
    Softplus,
    Identity,
}

const LEAKY_SLOPE: f64 = 0.01;

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if a > 0.0 {
                    a
                } else {
                    LEAKY_SLOPE * a
                }
            }
            Activation::Softplus => softplus(a),
            Activation::Identity => a,
        }
    }

    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if a > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Softplus => sigmoid(a),
            Activation::Identity => 1.0,
        }
    }
}

fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// One fully connected layer: output width, activation, and the dropout
/// rate applied to its input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation, dropout: f64) -> Self {
        Self {
            width,
            activation,
            dropout,
        }
    }
}

/// Network architecture: base trunk, score head, optional task head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arch {
    pub input_dim: usize,
    pub base: Vec<LayerSpec>,
    pub score: Vec<LayerSpec>,
    pub task: Option<Vec<LayerSpec>>,
}

/// Position of a flattened layer within the architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Base,
    Score,
    Task,
}

/// Flattened layer view with resolved input width.
#[derive(Debug, Clone, Copy)]
pub struct LayerLayout {
    pub segment: Segment,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl Arch {
    /// Score-only architecture used by the MCMC variants: hidden
    /// 50-25-25, Leaky ReLU except the last hidden layer, dropout 0.01
    /// before every layer.
    pub fn mcmc_cox(input_dim: usize) -> Self {
        let p = 0.01;
        Self {
            input_dim,
            base: vec![
                LayerSpec::new(50, Activation::LeakyRelu, p),
                LayerSpec::new(25, Activation::LeakyRelu, p),
                LayerSpec::new(25, Activation::Identity, p),
            ],
            score: vec![LayerSpec::new(1, Activation::Identity, p)],
            task: None,
        }
    }

    /// Multi-task architecture: base 50-25, one 25-wide hidden layer per
    /// head, dropout 0.1 before every layer. The task head ends in
    /// softplus so its `(lambda, c)` stay positive.
    pub fn mcdropout_cox(input_dim: usize) -> Self {
        let p = 0.1;
        Self {
            input_dim,
            base: vec![
                LayerSpec::new(50, Activation::LeakyRelu, p),
                LayerSpec::new(25, Activation::LeakyRelu, p),
            ],
            score: vec![
                LayerSpec::new(25, Activation::LeakyRelu, p),
                LayerSpec::new(1, Activation::Identity, p),
            ],
            task: Some(vec![
                LayerSpec::new(25, Activation::LeakyRelu, p),
                LayerSpec::new(2, Activation::Softplus, p),
            ]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input dimension must be >= 1".into()));
        }
        if self.score.is_empty() {
            return Err(Error::Config(
                "score head must have at least one layer".into(),
            ));
        }
        for spec in self
            .base
            .iter()
            .chain(&self.score)
            .chain(self.task.iter().flatten())
        {
            if spec.width == 0 {
                return Err(Error::Config("zero-width layer".into()));
            }
            if !(0.0..1.0).contains(&spec.dropout) {
                return Err(Error::Config(format!(
                    "dropout rate {} outside [0, 1)",
                    spec.dropout
                )));
            }
        }
        let score_last = self.score.last().unwrap();
        if score_last.width != 1 || score_last.activation != Activation::Identity {
            return Err(Error::Config(
                "score head must end in a width-1 identity layer".into(),
            ));
        }
        if let Some(task) = &self.task {
            let last = task
                .last()
                .ok_or_else(|| Error::Config("task head must have at least one layer".into()))?;
            if last.width != 2 || last.activation != Activation::Softplus {
                return Err(Error::Config(
                    "task head must end in a width-2 softplus layer".into(),
                ));
            }
        }
        Ok(())
    }

    fn base_out(&self) -> usize {
        self.base.last().map_or(self.input_dim, |l| l.width)
    }

    /// Layers in storage order: base, score head, task head.
    pub fn flat_layers(&self) -> Vec<LayerLayout> {
        let mut out = Vec::new();
        let mut in_dim = self.input_dim;
        for spec in &self.base {
            out.push(LayerLayout {
                segment: Segment::Base,
                in_dim,
                out_dim: spec.width,
                activation: spec.activation,
                dropout: spec.dropout,
            });
            in_dim = spec.width;
        }
        let mut head_in = self.base_out();
        for spec in &self.score {
            out.push(LayerLayout {
                segment: Segment::Score,
                in_dim: head_in,
                out_dim: spec.width,
                activation: spec.activation,
                dropout: spec.dropout,
            });
            head_in = spec.width;
        }
        if let Some(task) = &self.task {
            let mut head_in = self.base_out();
            for spec in task {
                out.push(LayerLayout {
                    segment: Segment::Task,
                    in_dim: head_in,
                    out_dim: spec.width,
                    activation: spec.activation,
                    dropout: spec.dropout,
                });
                head_in = spec.width;
            }
        }
        out
    }

    pub fn has_task_head(&self) -> bool {
        self.task.is_some()
    }
}

/// Weights (row-major `[out][in]`) and biases of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// All network parameters, aligned with [`Arch::flat_layers`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub layers: Vec<LayerParams>,
}

impl Params {
    /// Same shapes, all zeros. Used for gradients and Adam moments.
    pub fn zeros_like(&self) -> Params {
        Params {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    w: vec![0.0; l.w.len()],
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }

    pub fn n_scalars(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat view for generic parameter sweeps (finite differences).
    pub fn scalar_mut(&mut self, idx: usize) -> &mut f64 {
        let mut k = idx;
        for layer in &mut self.layers {
            if k < layer.w.len() {
                return &mut layer.w[k];
            }
            k -= layer.w.len();
            if k < layer.b.len() {
                return &mut layer.b[k];
            }
            k -= layer.b.len();
        }
        panic!("scalar index {idx} out of range");
    }

    pub fn scalar(&self, idx: usize) -> f64 {
        let mut k = idx;
        for layer in &self.layers {
            if k < layer.w.len() {
                return layer.w[k];
            }
            k -= layer.w.len();
            if k < layer.b.len() {
                return layer.b[k];
            }
            k -= layer.b.len();
        }
        panic!("scalar index {idx} out of range");
    }

    /// Elementwise accumulate: `self += other`.
    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += y;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += y;
            }
        }
    }
}

/// Glorot-uniform initialization, biases zero. Deterministic given seed.
pub fn init(arch: &Arch, seed: u64) -> Result<Params> {
    arch.validate()?;
    let mut layers = Vec::new();
    for (k, layout) in arch.flat_layers().iter().enumerate() {
        let mut rng = seeding::rng(seed, "init", k as u64);
        let bound = (6.0 / (layout.in_dim + layout.out_dim) as f64).sqrt();
        let w = (0..layout.in_dim * layout.out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        layers.push(LayerParams {
            w,
            b: vec![0.0; layout.out_dim],
        });
    }
    Ok(Params { layers })
}

/// Per-layer binary masks over layer inputs (the diagonal of the mask
/// convention), aligned with [`Arch::flat_layers`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutMask {
    pub layers: Vec<Vec<f64>>,
}

impl DropoutMask {
    /// Identity mask (keeps everything).
    pub fn ones(arch: &Arch) -> Self {
        Self {
            layers: arch
                .flat_layers()
                .iter()
                .map(|l| vec![1.0; l.in_dim])
                .collect(),
        }
    }
}

/// Fresh mask for a `(seed, step)` pair; entry j of layer l is
/// Bernoulli(1 - dropout_l).
pub fn sample_mask(arch: &Arch, seed: u64, step: u64) -> DropoutMask {
    let mut rng = seeding::rng(seed, "mask", step);
    let layers = arch
        .flat_layers()
        .iter()
        .map(|l| {
            (0..l.in_dim)
                .map(|_| {
                    if l.dropout == 0.0 {
                        1.0
                    } else {
                        f64::from(rng.random::<f64>() >= l.dropout)
                    }
                })
                .collect()
        })
        .collect();
    DropoutMask { layers }
}

/// Network outputs for one record.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub score: f64,
    /// `(lambda_i, c_i)` when the architecture has a task head.
    pub task: Option<(f64, f64)>,
    /// Base-trunk output fed to the heads.
    pub latent: Vec<f64>,
}

/// Forward-pass state kept for [`backward`].
#[derive(Debug, Clone)]
pub struct Cache {
    masked_inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

fn layer_forward(
    params: &LayerParams,
    layout: &LayerLayout,
    input: &[f64],
    mask: Option<&[f64]>,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let masked: Vec<f64> = match mask {
        Some(m) => input.iter().zip(m).map(|(x, k)| x * k).collect(),
        None => input.to_vec(),
    };
    let mut preact = Vec::with_capacity(layout.out_dim);
    for o in 0..layout.out_dim {
        let row = &params.w[o * layout.in_dim..(o + 1) * layout.in_dim];
        let mut a = params.b[o];
        for (wi, xi) in row.iter().zip(&masked) {
            a += wi * xi;
        }
        preact.push(a);
    }
    let out = preact.iter().map(|&a| layout.activation.apply(a)).collect();
    (masked, preact, out)
}

/// Forward pass. `mask = None` runs the deterministic maskless pass (no
/// rescaling); `Some` applies the masks per layer.
pub fn forward(
    params: &Params,
    arch: &Arch,
    x: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<Output> {
    forward_cached(params, arch, x, mask).map(|(out, _)| out)
}

/// Forward pass that also returns the cache needed by [`backward`].
pub fn forward_cached(
    params: &Params,
    arch: &Arch,
    x: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<(Output, Cache)> {
    if x.len() != arch.input_dim {
        return Err(Error::Validation(format!(
            "input has {} entries, architecture wants {}",
            x.len(),
            arch.input_dim
        )));
    }
    let layouts = arch.flat_layers();
    if params.layers.len() != layouts.len() {
        return Err(Error::Validation("params do not match architecture".into()));
    }
    if let Some(m) = mask {
        if m.layers.len() != layouts.len() {
            return Err(Error::Validation("mask does not match architecture".into()));
        }
    }

    let mut masked_inputs = Vec::with_capacity(layouts.len());
    let mut preacts = Vec::with_capacity(layouts.len());

    let mut cursor = 0usize;
    let mut run = |count: usize, mut input: Vec<f64>| -> Vec<f64> {
        for _ in 0..count {
            let layout = &layouts[cursor];
            let m = mask.map(|mm| mm.layers[cursor].as_slice());
            let (masked, preact, out) = layer_forward(&params.layers[cursor], layout, &input, m);
            masked_inputs.push(masked);
            preacts.push(preact);
            input = out;
            cursor += 1;
        }
        input
    };

    let latent = run(arch.base.len(), x.to_vec());
    let score_out = run(arch.score.len(), latent.clone());
    let task = if let Some(task_layers) = &arch.task {
        let t = run(task_layers.len(), latent.clone());
        Some((t[0], t[1]))
    } else {
        None
    };

    Ok((
        Output {
            score: score_out[0],
            task,
            latent,
        },
        Cache {
            masked_inputs,
            preacts,
        },
    ))
}

/// Exact backpropagation for one record. Upstream gradients are with
/// respect to the score output and, when present, the task outputs.
/// Gradients accumulate into `grads` (same shape as `params`); dropped
/// units receive zero gradient through the mask.
pub fn backward(
    params: &Params,
    arch: &Arch,
    cache: &Cache,
    mask: Option<&DropoutMask>,
    d_score: f64,
    d_task: Option<(f64, f64)>,
    grads: &mut Params,
) {
    let layouts = arch.flat_layers();
    let n_base = arch.base.len();
    let n_score = arch.score.len();
    let n_task = arch.task.as_ref().map_or(0, |t| t.len());

    let backprop_segment =
        |start: usize, len: usize, mut d_out: Vec<f64>, grads: &mut Params| -> Vec<f64> {
            for k in (start..start + len).rev() {
                let layout = &layouts[k];
                let lp = &params.layers[k];
                let gl = &mut grads.layers[k];
                let preact = &cache.preacts[k];
                let masked = &cache.masked_inputs[k];

                // delta = dL/d(preact)
                let delta: Vec<f64> = d_out
                    .iter()
                    .zip(preact)
                    .map(|(d, &a)| d * layout.activation.derivative(a))
                    .collect();

                for o in 0..layout.out_dim {
                    let row = &mut gl.w[o * layout.in_dim..(o + 1) * layout.in_dim];
                    for (i, gw) in row.iter_mut().enumerate() {
                        *gw += delta[o] * masked[i];
                    }
                    gl.b[o] += delta[o];
                }

                let mut d_in = vec![0.0; layout.in_dim];
                for o in 0..layout.out_dim {
                    let row = &lp.w[o * layout.in_dim..(o + 1) * layout.in_dim];
                    for (i, di) in d_in.iter_mut().enumerate() {
                        *di += delta[o] * row[i];
                    }
                }
                if let Some(m) = mask {
                    for (di, keep) in d_in.iter_mut().zip(&m.layers[k]) {
                        *di *= keep;
                    }
                }
                d_out = d_in;
            }
            d_out
        };

    let mut d_latent = backprop_segment(n_base, n_score, vec![d_score], grads);
    if let Some((dl, dc)) = d_task {
        let d_latent_task = backprop_segment(n_base + n_score, n_task, vec![dl, dc], grads);
        for (a, b) in d_latent.iter_mut().zip(d_latent_task) {
            *a += b;
        }
    }
    backprop_segment(0, n_base, d_latent, grads);
}

/// Weight-decay penalty `alpha * sum of squared weights`, biases excluded.
pub fn l2_penalty(params: &Params, alpha: f64) -> f64 {
    alpha
        * params
            .layers
            .iter()
            .map(|l| l.w.iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
}

/// Adds the weight-decay gradient `2 alpha w` (biases untouched).
pub fn add_l2_gradient(params: &Params, alpha: f64, grads: &mut Params) {
    for (lp, gl) in params.layers.iter().zip(&mut grads.layers) {
        for (w, gw) in lp.w.iter().zip(&mut gl.w) {
            *gw += 2.0 * alpha * w;
        }
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Params,
    v: Params,
    t: u64,
}

impl AdamState {
    pub fn new(params: &Params) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// Standard Adam update with bias correction; deterministic.
pub fn adam_step(params: &mut Params, grads: &Params, state: &mut AdamState, hyper: &AdamHyper) {
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for li in 0..params.layers.len() {
        let p = &mut params.layers[li];
        let g = &grads.layers[li];
        let m = &mut state.m.layers[li];
        let v = &mut state.v.layers[li];
        for (slot, (pw, gw)) in p.w.iter_mut().zip(&g.w).enumerate() {
            m.w[slot] = hyper.beta1 * m.w[slot] + (1.0 - hyper.beta1) * gw;
            v.w[slot] = hyper.beta2 * v.w[slot] + (1.0 - hyper.beta2) * gw * gw;
            *pw -= hyper.lr * (m.w[slot] / bc1) / ((v.w[slot] / bc2).sqrt() + hyper.eps);
        }
        for (slot, (pb, gb)) in p.b.iter_mut().zip(&g.b).enumerate() {
            m.b[slot] = hyper.beta1 * m.b[slot] + (1.0 - hyper.beta1) * gb;
            v.b[slot] = hyper.beta2 * v.b[slot] + (1.0 - hyper.beta2) * gb * gb;
            *pb -= hyper.lr * (m.b[slot] / bc1) / ((v.b[slot] / bc2).sqrt() + hyper.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_arch(with_task: bool, dropout: f64) -> Arch {
        Arch {
            input_dim: 4,
            base: vec![
                LayerSpec::new(6, Activation::LeakyRelu, dropout),
                LayerSpec::new(5, Activation::LeakyRelu, dropout),
            ],
            score: vec![
                LayerSpec::new(4, Activation::LeakyRelu, dropout),
                LayerSpec::new(1, Activation::Identity, dropout),
            ],
            task: with_task.then(|| {
                vec![
                    LayerSpec::new(3, Activation::LeakyRelu, dropout),
                    LayerSpec::new(2, Activation::Softplus, dropout),
                ]
            }),
        }
    }

    #[test]
    fn arch_validation() {
        assert!(Arch::mcmc_cox(10).validate().is_ok());
        assert!(Arch::mcdropout_cox(10).validate().is_ok());
        let mut bad = Arch::mcmc_cox(10);
        bad.base[1].width = 0;
        assert!(bad.validate().is_err());
        let mut bad = Arch::mcmc_cox(10);
        bad.score.last_mut().unwrap().activation = Activation::Softplus;
        assert!(bad.validate().is_err());
        let mut bad = Arch::mcdropout_cox(10);
        bad.task.as_mut().unwrap().last_mut().unwrap().width = 3;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_and_centered() {
        let arch = Arch::mcmc_cox(20);
        let a = init(&arch, 5).unwrap();
        let b = init(&arch, 5).unwrap();
        assert_eq!(a, b);
        let c = init(&arch, 6).unwrap();
        assert_ne!(a, c);

        // 50x25 layer: mean of n uniform(-a, a) draws within 3 sigma
        let layer = &a.layers[1];
        assert_eq!(layer.w.len(), 50 * 25);
        let bound = (6.0 / 75.0f64).sqrt();
        let mean = layer.w.iter().sum::<f64>() / layer.w.len() as f64;
        let sigma_mean = bound / (3.0 * layer.w.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}");
        assert!(layer.b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_weights_give_closed_form_outputs() {
        let arch = tiny_arch(true, 0.0);
        let params = init(&arch, 0).unwrap().zeros_like();
        let out = forward(&params, &arch, &[1.0, -2.0, 3.0, 0.5], None).unwrap();
        assert_eq!(out.score, 0.0);
        let (l, c) = out.task.unwrap();
        assert!((l - 2.0f64.ln()).abs() < 1e-15);
        assert!((c - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_identity_layer_is_affine() {
        let arch = Arch {
            input_dim: 3,
            base: vec![],
            score: vec![LayerSpec::new(1, Activation::Identity, 0.0)],
            task: None,
        };
        let mut params = init(&arch, 1).unwrap();
        params.layers[0].w = vec![0.5, -1.0, 2.0];
        params.layers[0].b = vec![0.25];
        let out = forward(&params, &arch, &[2.0, 3.0, 1.0], None).unwrap();
        assert_eq!(out.score, 0.5 * 2.0 - 3.0 + 2.0 + 0.25);
    }

    #[test]
    fn all_ones_mask_is_bit_identical_to_no_mask() {
        let arch = tiny_arch(true, 0.3);
        let params = init(&arch, 9).unwrap();
        let x = [0.3, -1.2, 0.8, 2.0];
        let plain = forward(&params, &arch, &x, None).unwrap();
        let ones = forward(&params, &arch, &x, Some(&DropoutMask::ones(&arch))).unwrap();
        assert_eq!(plain, ones);
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let arch = tiny_arch(false, 0.0);
        let params = init(&arch, 0).unwrap();
        assert!(forward(&params, &arch, &[1.0, 2.0], None).is_err());
    }

    #[test]
    fn mask_sampling_is_seeded_and_binomial() {
        let arch = Arch {
            input_dim: 50,
            base: vec![],
            score: vec![LayerSpec::new(1, Activation::Identity, 0.1)],
            task: None,
        };
        let a = sample_mask(&arch, 3, 7);
        let b = sample_mask(&arch, 3, 7);
        assert_eq!(a, b);
        assert_ne!(a, sample_mask(&arch, 3, 8));

        let mut dropped = 0usize;
        let n_draws = 10_000u64;
        for step in 0..n_draws {
            let m = sample_mask(&arch, 11, step);
            dropped += m.layers[0].iter().filter(|&&k| k == 0.0).count();
        }
        let frac = dropped as f64 / (n_draws as usize * 50) as f64;
        assert!((frac - 0.1).abs() < 0.01, "drop fraction {frac}");

        let zero = Arch {
            input_dim: 50,
            base: vec![],
            score: vec![LayerSpec::new(1, Activation::Identity, 0.0)],
            task: None,
        };
        let m = sample_mask(&zero, 1, 1);
        assert!(m.layers[0].iter().all(|&k| k == 1.0));
    }

    #[test]
    fn softplus_outputs_strictly_positive_and_score_unbounded() {
        let arch = tiny_arch(true, 0.0);
        let params = init(&arch, 13).unwrap();
        for scale in [-100.0, -1.0, 1.0, 100.0] {
            let x = [scale, -scale, scale * 0.5, scale];
            let out = forward(&params, &arch, &x, None).unwrap();
            let (l, c) = out.task.unwrap();
            assert!(l > 0.0 && c > 0.0);
            assert!(out.score.is_finite());
        }
    }

    // The module gate: exact gradients against central differences on a
    // random linear functional of the outputs.
    #[test]
    fn gradients_match_finite_differences() {
        let mut meta_rng = seeding::rng(2024, "gradcheck", 0);
        let mut worst: f64 = 0.0;
        for trial in 0..20u64 {
            let with_task = trial % 2 == 0;
            let masked = trial % 3 != 0;
            let dropout = if masked { 0.25 } else { 0.0 };
            let arch = tiny_arch(with_task, dropout);
            let params = init(&arch, 100 + trial).unwrap();
            let mask = masked.then(|| sample_mask(&arch, 200 + trial, 0));

            let x: Vec<f64> = (0..arch.input_dim)
                .map(|_| meta_rng.random_range(-1.5..1.5))
                .collect();
            let (a, b, cc): (f64, f64, f64) = (
                meta_rng.random_range(-1.0..1.0),
                meta_rng.random_range(-1.0..1.0),
                meta_rng.random_range(-1.0..1.0),
            );

            let eval = |p: &Params| -> f64 {
                let out = forward(p, &arch, &x, mask.as_ref()).unwrap();
                let (tl, tc) = out.task.unwrap_or((0.0, 0.0));
                a * out.score + b * tl + cc * tc
            };

            let (out, cache) = forward_cached(&params, &arch, &x, mask.as_ref()).unwrap();
            let mut grads = params.zeros_like();
            backward(
                &params,
                &arch,
                &cache,
                mask.as_ref(),
                a,
                out.task.map(|_| (b, cc)),
                &mut grads,
            );

            let h = 1e-6;
            for k in 0..params.n_scalars() {
                let mut up = params.clone();
                *up.scalar_mut(k) += h;
                let mut dn = params.clone();
                *dn.scalar_mut(k) -= h;
                let fd = (eval(&up) - eval(&dn)) / (2.0 * h);
                let an = grads.scalar(k);
                let denom = an.abs().max(fd.abs()).max(1e-4);
                let rel = (fd - an).abs() / denom;
                worst = worst.max(rel);
                assert!(
                    rel < 1e-5,
                    "trial {trial} scalar {k}: fd {fd} vs analytic {an} (rel {rel})"
                );
            }
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let arch = tiny_arch(true, 0.0);
        let params = init(&arch, 3).unwrap();
        let (_, cache) = forward_cached(&params, &arch, &[1.0, 2.0, 3.0, 4.0], None).unwrap();
        let mut grads = params.zeros_like();
        backward(
            &params,
            &arch,
            &cache,
            None,
            0.0,
            Some((0.0, 0.0)),
            &mut grads,
        );
        assert!((0..grads.n_scalars()).all(|k| grads.scalar(k) == 0.0));
    }

    #[test]
    fn dropped_units_get_zero_weight_gradient() {
        let arch = Arch {
            input_dim: 3,
            base: vec![],
            score: vec![LayerSpec::new(1, Activation::Identity, 0.5)],
            task: None,
        };
        let params = init(&arch, 8).unwrap();
        let mask = DropoutMask {
            layers: vec![vec![1.0, 0.0, 1.0]],
        };
        let (_, cache) = forward_cached(&params, &arch, &[1.0, 1.0, 1.0], Some(&mask)).unwrap();
        let mut grads = params.zeros_like();
        backward(&params, &arch, &cache, Some(&mask), 1.0, None, &mut grads);
        assert_ne!(grads.layers[0].w[0], 0.0);
        assert_eq!(grads.layers[0].w[1], 0.0, "dropped input must not update");
        assert_ne!(grads.layers[0].w[2], 0.0);
    }

    #[test]
    fn l2_penalty_and_gradient() {
        let arch = Arch {
            input_dim: 1,
            base: vec![],
            score: vec![LayerSpec::new(1, Activation::Identity, 0.0)],
            task: None,
        };
        let mut params = init(&arch, 0).unwrap();
        params.layers[0].w = vec![3.0];
        params.layers[0].b = vec![7.0];
        assert_eq!(l2_penalty(&params, 0.0), 0.0);
        assert!((l2_penalty(&params, 0.1) - 0.9).abs() < 1e-15);
        assert!((l2_penalty(&params, 0.2) - 1.8).abs() < 1e-15);

        let mut grads = params.zeros_like();
        add_l2_gradient(&params, 0.1, &mut grads);
        assert!((grads.layers[0].w[0] - 0.6).abs() < 1e-15);
        assert_eq!(grads.layers[0].b[0], 0.0, "biases are excluded");
    }

    #[test]
    fn adam_fixed_point_and_first_step() {
        let arch = tiny_arch(false, 0.0);
        let mut params = init(&arch, 4).unwrap();
        let reference = params.clone();
        let mut state = AdamState::new(&params);
        let zeros = params.zeros_like();
        for _ in 0..50 {
            adam_step(&mut params, &zeros, &mut state, &AdamHyper::default());
        }
        assert_eq!(params, reference, "zero gradients must not move params");

        // first step is ~ -lr * sign(g) after bias correction
        let mut params = reference.clone();
        let mut state = AdamState::new(&params);
        let mut grads = params.zeros_like();
        grads.layers[0].w[0] = 0.37;
        grads.layers[1].w[3] = -4.2;
        let before0 = params.layers[0].w[0];
        let before1 = params.layers[1].w[3];
        adam_step(&mut params, &grads, &mut state, &AdamHyper::default());
        assert!((params.layers[0].w[0] - (before0 - 1e-3)).abs() < 1e-9);
        assert!((params.layers[1].w[3] - (before1 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn adam_converges_on_quadratic_bowl() {
        // min sum (w - target)^2
        let arch = Arch {
            input_dim: 4,
            base: vec![],
            score: vec![LayerSpec::new(1, Activation::Identity, 0.0)],
            task: None,
        };
        let mut params = init(&arch, 2).unwrap();
        let target: Vec<f64> = vec![0.3, -0.2, 0.15, 0.4, -0.1]; // 4 weights + bias
        let mut state = AdamState::new(&params);
        let hyper = AdamHyper::default();
        let mut f = f64::INFINITY;
        for _ in 0..5000 {
            let mut grads = params.zeros_like();
            f = 0.0;
            for k in 0..params.n_scalars() {
                let diff = params.scalar(k) - target[k];
                f += diff * diff;
                *grads.scalar_mut(k) = 2.0 * diff;
            }
            if f < 1e-6 {
                break;
            }
            adam_step(&mut params, &grads, &mut state, &hyper);
        }
        assert!(f < 1e-6, "final objective {f}");
    }
}
