//! Feed-forward binary classifier with hand-written backpropagation.
//!
//! The network is a chain of dense layers with ReLU between them and a
//! single sigmoid output. Gradients are available with respect to the
//! parameters (for training) and with respect to the input (for integrated
//! gradients). A [`Mlp`] doubles as the container for its own gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

/// Clamp applied to every soft output so that logs stay finite.
pub const PROB_EPS: f64 = 1e-7;

/// Input dimension of the traffic-drop classifier (PRB, latency, channel quality).
pub const NUM_FEATURES: usize = 3;

/// 3 → 10 → 10 → 1.
pub const DEFAULT_LAYER_SIZES: [usize; 4] = [NUM_FEATURES, 10, 10, 1];

/// One affine layer, `out = weight · in + bias`, weight stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![S::zero(); inputs * outputs],
            bias: vec![S::zero(); outputs],
        }
    }

    #[inline]
    pub fn w(&self, row: usize, col: usize) -> S {
        self.weight[row * self.inputs + col]
    }

    fn apply(&self, input: &[S], out: &mut Vec<S>) {
        out.clear();
        for (row, &b) in self.weight.chunks_exact(self.inputs).zip(&self.bias) {
            let mut acc = b;
            for (&w, &x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

/// Soft output of the classifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction<S> {
    /// Sigmoid output clamped to `[ε, 1-ε]`.
    pub prob: S,
    /// Sigmoid output before clamping.
    pub raw: S,
}

impl<S: Scalar> Prediction<S> {
    pub fn from_logit(z: S) -> Self {
        let raw = sigmoid(z);
        let eps = S::prob_eps();
        Prediction {
            prob: raw.max(eps).min(S::one() - eps),
            raw,
        }
    }

    #[inline]
    pub fn label(&self) -> bool {
        self.prob >= S::of(0.5)
    }

    /// Clamped probability assigned to `class`.
    #[inline]
    pub fn class_prob(&self, class: bool) -> S {
        if class {
            self.prob
        } else {
            S::one() - self.prob
        }
    }
}

/// Labelled example in model space (already standardized).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<S> {
    pub x: Vec<S>,
    pub label: bool,
}

/// Binary cross-entropy on a clamped prediction.
pub fn bce_loss<S: Scalar>(label: bool, p: &Prediction<S>) -> S {
    if label {
        -p.prob.ln()
    } else {
        -(S::one() - p.prob).ln()
    }
}

/// Activations recorded during a forward pass.
struct ForwardCache<S> {
    /// `inputs[l]` is the input to layer `l`; the last entry is unused.
    inputs: Vec<Vec<S>>,
    logit: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S> {
    layers: Vec<Dense<S>>,
}

impl<S: Scalar> Mlp<S> {
    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                let mut layer = Dense::zeros(fan_in, fan_out);
                for w in layer.weight.iter_mut() {
                    *w = S::of(dist.sample(&mut rng));
                }
                layer
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        Ok(Mlp {
            layers: layer_sizes
                .windows(2)
                .map(|p| Dense::zeros(p[0], p[1]))
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense<S>>) -> Result<Self> {
        for (i, layer) in layers.iter().enumerate() {
            if layer.weight.len() != layer.inputs * layer.outputs || layer.bias.len() != layer.outputs {
                return Err(Error::config(
                    "layers",
                    format!("layer {i} storage does not match its {}x{} shape", layer.outputs, layer.inputs),
                ));
            }
        }
        let mut sizes: Vec<usize> = layers.first().map(|l| vec![l.inputs]).unwrap_or_default();
        for (i, layer) in layers.iter().enumerate() {
            if i > 0 && layers[i - 1].outputs != layer.inputs {
                return Err(Error::config(
                    "layers",
                    format!("layer {i} expects {} inputs but receives {}", layer.inputs, layers[i - 1].outputs),
                ));
            }
            sizes.push(layer.outputs);
        }
        validate_sizes(&sizes)?;
        Ok(Mlp { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Dense<S>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<S>] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }

    /// Parameters in snapshot order: W1 row-major, b1, W2, b2, ...
    pub fn params(&self) -> impl Iterator<Item = &S> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut S> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn max_abs(&self) -> S {
        self.params().fold(S::zero(), |m, p| m.max(p.abs()))
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: S, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (dst, &src) in self.params_mut().zip(other.params()) {
            *dst += a * src;
        }
    }

    pub fn scale(&mut self, a: S) {
        for p in self.params_mut() {
            *p *= a;
        }
    }

    pub fn cast<T: Scalar>(&self) -> Mlp<T> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weight: l.weight.iter().map(|w| T::of(w.to_f64_lossy())).collect(),
                    bias: l.bias.iter().map(|b| T::of(b.to_f64_lossy())).collect(),
                })
                .collect(),
        }
    }

    fn check_input(&self, x: &[S]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Input(format!(
                "expected {} features, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("feature {pos} is not finite")));
        }
        Ok(())
    }

    /// Pre-sigmoid output. Input length is trusted.
    pub fn logit(&self, x: &[S]) -> S {
        let mut cur = x.to_vec();
        let mut next = Vec::with_capacity(16);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i < last {
                for v in next.iter_mut() {
                    *v = v.max(S::zero());
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    /// Forward pass without input validation.
    #[inline]
    pub fn predict(&self, x: &[S]) -> Prediction<S> {
        Prediction::from_logit(self.logit(x))
    }

    pub fn forward(&self, x: &[S]) -> Result<Prediction<S>> {
        self.check_input(x)?;
        Ok(self.predict(x))
    }

    fn forward_cache(&self, x: &[S]) -> ForwardCache<S> {
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        inputs.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(&inputs[i], &mut out);
            if i < last {
                for v in out.iter_mut() {
                    *v = v.max(S::zero());
                }
            }
            inputs.push(out);
        }
        let logit = inputs.pop().expect("non-empty")[0];
        ForwardCache { inputs, logit }
    }

    /// Backpropagate `coeff · ∂logit/∂(·)` through a cached pass. Parameter
    /// gradients are accumulated into `grad` when given; the input gradient
    /// is returned.
    fn backprop(&self, cache: &ForwardCache<S>, coeff: S, mut grad: Option<&mut Mlp<S>>) -> Vec<S> {
        let mut delta = vec![coeff];
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[l];
            if let Some(g) = grad.as_deref_mut() {
                let gl = &mut g.layers[l];
                for (o, &d) in delta.iter().enumerate() {
                    if d == S::zero() {
                        continue;
                    }
                    gl.bias[o] += d;
                    let row = &mut gl.weight[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
            }
            let mut prev = vec![S::zero(); layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == S::zero() {
                    continue;
                }
                let row = &layer.weight[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            if l > 0 {
                // ReLU subgradient is 0 at the kink; `input` holds post-activation values.
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= S::zero() {
                        *p = S::zero();
                    }
                }
            }
            delta = prev;
        }
        delta
    }

    /// Accumulate `coeff · ∂logit(x)/∂W` into `grad` and return the prediction at `x`.
    pub fn accumulate_logit_grad(&self, x: &[S], coeff_of: impl FnOnce(Prediction<S>) -> S, grad: &mut Mlp<S>) -> Prediction<S> {
        let cache = self.forward_cache(x);
        let pred = Prediction::from_logit(cache.logit);
        let coeff = coeff_of(pred);
        if coeff != S::zero() {
            self.backprop(&cache, coeff, Some(grad));
        }
        pred
    }

    /// Mean BCE gradient over `batch`, together with the mean loss.
    ///
    /// Uses `σ(z) − y` as the per-sample logit derivative, i.e. the gradient
    /// of the unclamped loss; it coincides with the clamped loss wherever the
    /// clamp is inactive.
    pub fn loss_and_grad(&self, batch: &[Sample<S>]) -> Result<(S, Mlp<S>)> {
        if batch.is_empty() {
            return Err(Error::Input("gradient requested on an empty batch".into()));
        }
        let mut grad = self.zeros_like();
        let mut loss = S::zero();
        for s in batch {
            let target = if s.label { S::one() } else { S::zero() };
            let pred = self.accumulate_logit_grad(&s.x, |p| p.raw - target, &mut grad);
            loss += bce_loss(s.label, &pred);
        }
        let inv = S::one() / S::of_usize(batch.len());
        grad.scale(inv);
        Ok((loss * inv, grad))
    }

    pub fn grad_weights(&self, batch: &[Sample<S>]) -> Result<Mlp<S>> {
        self.loss_and_grad(batch).map(|(_, g)| g)
    }

    pub fn batch_loss(&self, batch: &[Sample<S>]) -> S {
        let total: S = batch.iter().map(|s| bce_loss(s.label, &self.predict(&s.x))).sum();
        total / S::of_usize(batch.len().max(1))
    }

    /// Gradient of the pre-clamp sigmoid output with respect to the input.
    pub fn grad_input(&self, x: &[S]) -> Vec<S> {
        let cache = self.forward_cache(x);
        let p = sigmoid(cache.logit);
        self.backprop(&cache, p * (S::one() - p), None)
    }

    /// Gradient of the logit with respect to the input.
    pub fn grad_input_logit(&self, x: &[S]) -> Vec<S> {
        let cache = self.forward_cache(x);
        self.backprop(&cache, S::one(), None)
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::config(
            "layer_sizes",
            "need at least an input and an output size",
        ));
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::config("layer_sizes", format!("entry {i} is zero")));
    }
    if sizes[sizes.len() - 1] != 1 {
        return Err(Error::config(
            "layer_sizes",
            "binary classifier must end in a single output",
        ));
    }
    Ok(())
}
