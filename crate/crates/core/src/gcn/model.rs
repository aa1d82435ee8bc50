use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::adjacency::NormalizedAdjacency;
use super::matrix::Matrix;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

/// Weight initialization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Hidden weights uniform in `±1/sqrt(f_in)`, output layer zero, so an
    /// untrained model scores every node 0.5.
    #[default]
    UniformZeroOutput,
    /// Every layer uniform in `±1/sqrt(f_in)`.
    Uniform,
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Input width, hidden widths, then the output width (always 1).
    pub layer_dims: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Add the identity to the adjacency before normalizing.
    pub self_loops: bool,
    #[serde(default)]
    pub init: InitScheme,
}

pub const DEFAULT_HIDDEN: usize = 64;

impl ModelConfig {
    /// Two-layer model with one hidden layer of [`DEFAULT_HIDDEN`] units.
    pub fn two_layer(input_dim: usize) -> Self {
        Self::with_hidden(input_dim, &[DEFAULT_HIDDEN])
    }

    pub fn with_hidden(input_dim: usize, hidden: &[usize]) -> Self {
        let mut layer_dims = vec![input_dim];
        layer_dims.extend_from_slice(hidden);
        layer_dims.push(1);
        Self {
            layer_dims,
            epochs: 100,
            learning_rate: 0.1,
            seed: 0,
            self_loops: true,
            init: InitScheme::default(),
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::Config("a model needs at least one layer".into()));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {:?}", self.layer_dims)));
        }
        if self.layer_dims.last() != Some(&1) {
            return Err(Error::Config("the output layer must have width 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Weight `W` (`f_in × f_out`) and bias of one graph convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(f_in: usize, f_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(f_in, f_out),
            bias: vec![0.0; f_out],
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.as_slice().iter().chain(&self.bias)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.as_mut_slice().iter_mut().chain(&mut self.bias)
    }
}

/// Stacked graph convolutions: ReLU between layers, sigmoid on the
/// single output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub layers: Vec<LayerParams>,
}

/// Gradients share the parameter layout.
pub type Gradients = GcnModel;

impl GcnModel {
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let last = cfg.num_layers() - 1;
        let layers = cfg
            .layer_dims
            .windows(2)
            .enumerate()
            .map(|(l, dims)| {
                let (f_in, f_out) = (dims[0], dims[1]);
                let mut p = LayerParams::zeros(f_in, f_out);
                let random = match cfg.init {
                    InitScheme::Uniform => true,
                    InitScheme::UniformZeroOutput => l != last,
                    InitScheme::Zeros => false,
                };
                if random {
                    let bound = 1.0 / (f_in as f64).sqrt();
                    let dist = Uniform::new_inclusive(-bound, bound);
                    for w in p.weight.as_mut_slice() {
                        *w = dist.sample(&mut rng);
                    }
                }
                p
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
        }
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.layers.iter().map(|l| l.weight.rows()).collect();
        dims.extend(self.layers.last().map(|l| l.weight.cols()));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// All weights then biases, layer by layer.
    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(LayerParams::values)
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(LayerParams::values_mut)
    }

    /// `self += scale * other`, element-wise.
    pub fn add_scaled(&mut self, other: &GcnModel, scale: f64) {
        for (p, g) in self.parameters_mut().zip(other.parameters()) {
            *p += scale * g;
        }
    }

    fn check_input(&self, adj: &NormalizedAdjacency, h0: &Matrix) -> Result<()> {
        let input = self.layers.first().map_or(0, |l| l.weight.rows());
        if h0.rows() != adj.n() || h0.cols() != input {
            return Err(Error::Contract(format!(
                "features are {}x{}, expected {}x{input}",
                h0.rows(),
                h0.cols(),
                adj.n()
            )));
        }
        if !h0.is_finite() {
            return Err(Error::Contract("non-finite node features".into()));
        }
        Ok(())
    }
}

/// Per-layer inputs `H` and pre-activations `Z` kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub probabilities: Vec<f64>,
    pub cache: ForwardCache,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `Z = Â·H·W + b` per layer; ReLU on hidden layers, sigmoid on the output.
pub fn forward(model: &GcnModel, adj: &NormalizedAdjacency, h0: &Matrix) -> Result<ForwardOutput> {
    model.check_input(adj, h0)?;
    let mut inputs = Vec::with_capacity(model.layers.len());
    let mut pre_activations = Vec::with_capacity(model.layers.len());
    let mut h = h0.clone();
    for (l, layer) in model.layers.iter().enumerate() {
        let mut z = adj.mul(&h.matmul(&layer.weight));
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        let next = if l + 1 < model.layers.len() {
            let mut a = z.clone();
            for v in a.as_mut_slice() {
                *v = v.max(0.0);
            }
            a
        } else {
            z.clone()
        };
        inputs.push(std::mem::replace(&mut h, next));
        pre_activations.push(z);
    }
    let probabilities = h.as_slice().iter().map(|&z| sigmoid(z)).collect();
    Ok(ForwardOutput {
        probabilities,
        cache: ForwardCache {
            inputs,
            pre_activations,
        },
    })
}

fn check_mask(n: usize, labels: &[f64], mask: &[usize]) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::Contract("loss mask is empty".into()));
    }
    if labels.len() != n {
        return Err(Error::Contract(format!("{} labels for {n} nodes", labels.len())));
    }
    if let Some(&i) = mask.iter().find(|&&i| i >= n) {
        return Err(Error::Contract(format!("mask index {i} outside {n} nodes")));
    }
    Ok(())
}

/// Summed (not averaged) clamped cross-entropy over the masked nodes.
pub(crate) fn bce_sum(probabilities: &[f64], labels: &[f64], mask: &[usize]) -> f64 {
    mask.iter()
        .map(|&i| {
            let p = probabilities[i].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let y = labels[i];
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum()
}

/// Mean binary cross-entropy over the masked nodes.
pub fn loss_bce(probabilities: &[f64], labels: &[f64], mask: &[usize]) -> Result<f64> {
    check_mask(probabilities.len(), labels, mask)?;
    Ok(bce_sum(probabilities, labels, mask) / mask.len() as f64)
}

/// Analytic gradient of [`loss_bce`] with respect to every weight and bias.
pub fn backward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    out: &ForwardOutput,
    labels: &[f64],
    mask: &[usize],
) -> Result<Gradients> {
    check_mask(out.probabilities.len(), labels, mask)?;
    Ok(backward_scaled(model, adj, out, labels, mask, mask.len() as f64))
}

/// Gradient of the masked loss sum divided by `denominator`.
pub(crate) fn backward_scaled(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    out: &ForwardOutput,
    labels: &[f64],
    mask: &[usize],
    denominator: f64,
) -> Gradients {
    let n = out.probabilities.len();
    // d loss / d z for the output logits; zero where the clamp is active.
    let mut dz = Matrix::zeros(n, 1);
    for &i in mask {
        let p = out.probabilities[i];
        if p > PROB_CLAMP && p < 1.0 - PROB_CLAMP {
            let g = dz.get(i, 0) + (p - labels[i]) / denominator;
            dz.set(i, 0, g);
        }
    }
    let mut grads = model.zeros_like();
    for l in (0..model.layers.len()).rev() {
        let g = adj.t_mul(&dz);
        grads.layers[l].weight = out.cache.inputs[l].t_matmul(&g);
        grads.layers[l].bias = dz.col_sums();
        if l > 0 {
            let mut dh = g.matmul_t(&model.layers[l].weight);
            let z_prev = &out.cache.pre_activations[l - 1];
            for (d, &z) in dh.as_mut_slice().iter_mut().zip(z_prev.as_slice()) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
            dz = dh;
        }
    }
    grads
}
