//! Dense feed-forward networks with exact backpropagation and Adam.
//!
//! Only what a Q-network needs: fully connected layers with ReLU or linear
//! activations, (masked) mean squared error and an Adam optimiser with
//! global-norm gradient clipping. Everything is `f64`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid network shape: {0}")]
    Shape(String),
    #[error("hidden size must be at least 2, got {0}")]
    HiddenTooSmall(usize),
    #[error("non-finite gradient component at index {0}")]
    NonFiniteGradient(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

/// One fully connected layer; `weights` is row-major `[output_dim × input_dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, output_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (input_dim + output_dim) as f64).sqrt();
        let weights = (0..input_dim * output_dim).map(|_| rng.gen_range(-limit..=limit)).collect();
        Layer {
            input_dim,
            output_dim,
            activation,
            weights,
            bias: vec![0.0; output_dim],
        }
    }

    pub fn zeros(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Layer {
            input_dim,
            output_dim,
            activation,
            weights: vec![0.0; input_dim * output_dim],
            bias: vec![0.0; output_dim],
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Loss targets for a batch.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// `batch × output_dim` regression targets; loss averages over every output.
    Full(&'a [f64]),
    /// One target per row for the output at `actions[b]`; other outputs carry no loss.
    Masked { actions: &'a [usize], values: &'a [f64] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

impl DenseNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        let net = DenseNet { layers };
        net.validate()?;
        Ok(net)
    }

    /// The Q-network topology: `input → hidden (ReLU) → hidden/2 (ReLU) → n_actions (linear)`.
    pub fn q_network<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if hidden < 2 {
            return Err(NnError::HiddenTooSmall(hidden));
        }
        if input_dim == 0 || n_actions == 0 {
            return Err(NnError::Shape("input and output dimensions must be positive".into()));
        }
        let half = hidden / 2;
        DenseNet::new(vec![
            Layer::glorot(input_dim, hidden, Activation::Relu, rng),
            Layer::glorot(hidden, half, Activation::Relu, rng),
            Layer::glorot(half, n_actions, Activation::Linear, rng),
        ])
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.layers.is_empty() {
            return Err(NnError::Shape("network has no layers".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.input_dim == 0 || layer.output_dim == 0 {
                return Err(NnError::Shape(format!("layer {k} has a zero dimension")));
            }
            if layer.weights.len() != layer.input_dim * layer.output_dim {
                return Err(NnError::Shape(format!(
                    "layer {k}: {} weights for {}x{}",
                    layer.weights.len(),
                    layer.output_dim,
                    layer.input_dim
                )));
            }
            if layer.bias.len() != layer.output_dim {
                return Err(NnError::Shape(format!("layer {k}: bias length {}", layer.bias.len())));
            }
            if k > 0 && self.layers[k - 1].output_dim != layer.input_dim {
                return Err(NnError::Shape(format!(
                    "layer {k} expects {} inputs but layer {} emits {}",
                    layer.input_dim,
                    k - 1,
                    self.layers[k - 1].output_dim
                )));
            }
            if layer.weights.iter().chain(&layer.bias).any(|w| !w.is_finite()) {
                return Err(NnError::Shape(format!("layer {k} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }

    /// Layer widths including the input, e.g. `[30, 60, 30, 12]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.output_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.param_count() {
            return Err(NnError::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let w = l.weights.len();
            l.weights.copy_from_slice(&flat[offset..offset + w]);
            offset += w;
            let b = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + b]);
            offset += b;
        }
        Ok(())
    }

    /// Copies every parameter of `other` into `self`; topologies must match.
    pub fn copy_from(&mut self, other: &DenseNet) -> Result<(), NnError> {
        if self.widths() != other.widths() {
            return Err(NnError::Shape("topology mismatch".into()));
        }
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.weights.copy_from_slice(&src.weights);
            dst.bias.copy_from_slice(&src.bias);
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.forward_batch(x, 1)
    }

    /// Forward pass over `batch` row-major inputs; returns `batch × output_dim`.
    pub fn forward_batch(&self, xs: &[f64], batch: usize) -> Result<Vec<f64>, NnError> {
        self.check_input(xs, batch)?;
        let mut current = xs.to_vec();
        for layer in &self.layers {
            current = layer_forward(layer, &current, batch);
        }
        Ok(current)
    }

    fn check_input(&self, xs: &[f64], batch: usize) -> Result<(), NnError> {
        let expected = self.input_dim() * batch;
        if xs.len() != expected {
            return Err(NnError::DimensionMismatch {
                expected,
                got: xs.len(),
            });
        }
        Ok(())
    }

    /// Squared-error loss and exact gradients for a single example.
    ///
    /// Without a mask the loss is the mean over all outputs; with
    /// `action_mask = Some(a)` only output `a` contributes, so the loss is
    /// `(y[a] - target[a])²`.
    pub fn mse_grad(
        &self,
        x: &[f64],
        target: &[f64],
        action_mask: Option<usize>,
    ) -> Result<(f64, Gradients), NnError> {
        if target.len() != self.output_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.output_dim(),
                got: target.len(),
            });
        }
        match action_mask {
            None => self.loss_grad(x, 1, Targets::Full(target)),
            Some(a) => {
                if a >= self.output_dim() {
                    return Err(NnError::DimensionMismatch {
                        expected: self.output_dim(),
                        got: a + 1,
                    });
                }
                self.loss_grad(x, 1, Targets::Masked {
                    actions: &[a],
                    values: &target[a..=a],
                })
            }
        }
    }

    /// Batch loss (mean over rows) and its gradient with respect to every parameter.
    pub fn loss_grad(&self, xs: &[f64], batch: usize, targets: Targets<'_>) -> Result<(f64, Gradients), NnError> {
        self.check_input(xs, batch)?;
        let out_dim = self.output_dim();
        match targets {
            Targets::Full(t) if t.len() != batch * out_dim => {
                return Err(NnError::DimensionMismatch {
                    expected: batch * out_dim,
                    got: t.len(),
                })
            }
            Targets::Masked { actions, values } if actions.len() != batch || values.len() != batch => {
                return Err(NnError::DimensionMismatch {
                    expected: batch,
                    got: actions.len().min(values.len()),
                })
            }
            Targets::Masked { actions, .. } if actions.iter().any(|&a| a >= out_dim) => {
                return Err(NnError::Shape("masked action index out of range".into()))
            }
            _ => {}
        }

        // activations[k] is the input of layer k; the last entry is the output.
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(xs.to_vec());
        for layer in &self.layers {
            let next = layer_forward(layer, activations.last().expect("non-empty"), batch);
            activations.push(next);
        }
        let output = activations.last().expect("non-empty");

        let mut delta = vec![0.0; batch * out_dim];
        let mut loss = 0.0;
        match targets {
            Targets::Full(t) => {
                let scale = 1.0 / (batch * out_dim) as f64;
                for i in 0..batch * out_dim {
                    let diff = output[i] - t[i];
                    loss += diff * diff * scale;
                    delta[i] = 2.0 * diff * scale;
                }
            }
            Targets::Masked { actions, values } => {
                let scale = 1.0 / batch as f64;
                for b in 0..batch {
                    let i = b * out_dim + actions[b];
                    let diff = output[i] - values[b];
                    loss += diff * diff * scale;
                    delta[i] = 2.0 * diff * scale;
                }
            }
        }

        let mut grads = Gradients::zeros_like(self);
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let (n_in, n_out) = (layer.input_dim, layer.output_dim);
            if layer.activation == Activation::Relu {
                let post = &activations[k + 1];
                for (d, a) in delta.iter_mut().zip(post) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &activations[k];
            let g = &mut grads.layers[k];
            for b in 0..batch {
                let x = &input[b * n_in..(b + 1) * n_in];
                for o in 0..n_out {
                    let d = delta[b * n_out + o];
                    if d != 0.0 {
                        axpy(d, x, &mut g.weights[o * n_in..(o + 1) * n_in]);
                        g.bias[o] += d;
                    }
                }
            }
            if k > 0 {
                let mut prev = vec![0.0; batch * n_in];
                for b in 0..batch {
                    let row = &mut prev[b * n_in..(b + 1) * n_in];
                    for o in 0..n_out {
                        let d = delta[b * n_out + o];
                        if d != 0.0 {
                            axpy(d, &layer.weights[o * n_in..(o + 1) * n_in], row);
                        }
                    }
                }
                delta = prev;
            }
        }
        Ok((loss, grads))
    }

    pub fn save(&self, path: impl AsRef<Path>, adam: Option<&Adam>) -> Result<(), NnError> {
        let path = path.as_ref();
        let text = serde_json::to_string(&NetCheckpoint::new(self, adam)).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|source| NnError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(DenseNet, Option<Adam>), NnError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| NnError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ckpt: NetCheckpoint = serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        ckpt.restore()
    }
}

fn layer_forward(layer: &Layer, input: &[f64], batch: usize) -> Vec<f64> {
    let (n_in, n_out) = (layer.input_dim, layer.output_dim);
    let mut out = vec![0.0; batch * n_out];
    for b in 0..batch {
        let x = &input[b * n_in..(b + 1) * n_in];
        let row = &mut out[b * n_out..(b + 1) * n_out];
        for (o, y) in row.iter_mut().enumerate() {
            let z = layer.bias[o] + dot(&layer.weights[o * n_in..(o + 1) * n_in], x);
            *y = match layer.activation {
                Activation::Relu => z.max(0.0),
                Activation::Linear => z,
            };
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter-shaped gradient (or moment) buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn l2_norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.iter_mut() {
            *g *= factor;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn matches(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global L2 cap on the gradient; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Result<Self, NnError> {
        if let Some(c) = config.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(NnError::Shape(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(Adam {
            config,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        })
    }

    pub fn first_moment(&self) -> &Gradients {
        &self.m
    }

    pub fn second_moment(&self) -> &Gradients {
        &self.v
    }

    /// One clipped, bias-corrected Adam update.
    ///
    /// An all-zero gradient only advances the step counter.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<(), NnError> {
        if !grads.matches(net) || !self.m.matches(net) {
            return Err(NnError::Shape("gradient shape does not match the network".into()));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient(i));
        }
        self.step += 1;
        let norm = grads.l2_norm();
        if norm == 0.0 {
            return Ok(());
        }
        let scale = match self.config.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
            ..
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for (k, layer) in net.layers.iter_mut().enumerate() {
            let g = &grads.layers[k];
            let m = &mut self.m.layers[k];
            let v = &mut self.v.layers[k];
            for (p, (gi, (mi, vi))) in layer
                .weights
                .iter_mut()
                .chain(layer.bias.iter_mut())
                .zip(g.weights.iter().chain(&g.bias).zip(
                    m.weights.iter_mut().chain(m.bias.iter_mut()).zip(v.weights.iter_mut().chain(v.bias.iter_mut())),
                ))
            {
                let gs = gi * scale;
                *mi = beta1 * *mi + (1.0 - beta1) * gs;
                *vi = beta2 * *vi + (1.0 - beta2) * gs * gs;
                let m_hat = *mi / correction1;
                let v_hat = *vi / correction2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Versioned on-disk form of a network and, optionally, its optimiser.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub version: u32,
    pub layers: Vec<Layer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<Adam>,
}

impl NetCheckpoint {
    pub fn new(net: &DenseNet, adam: Option<&Adam>) -> Self {
        NetCheckpoint {
            version: CHECKPOINT_VERSION,
            layers: net.layers.clone(),
            adam: adam.cloned(),
        }
    }

    pub fn restore(self) -> Result<(DenseNet, Option<Adam>), NnError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let net = DenseNet::new(self.layers)?;
        if let Some(adam) = &self.adam {
            if !adam.m.matches(&net) || !adam.v.matches(&net) {
                return Err(NnError::Checkpoint("optimiser state does not match the network".into()));
            }
        }
        Ok((net, self.adam))
    }
}
