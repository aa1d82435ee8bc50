use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::adjacency::NormalizedAdjacency;
use super::matrix::Matrix;
use super::model::{backward_scaled, bce_sum, forward, GcnModel, LayerParams, ModelConfig};

/// One graph's training inputs. Graphs share weights but no edges.
#[derive(Debug, Clone, Copy)]
pub struct GraphSample<'a> {
    pub adjacency: &'a NormalizedAdjacency,
    pub features: &'a Matrix,
    /// 0/1 target per node; ignored outside `mask`.
    pub labels: &'a [f64],
    pub mask: &'a [usize],
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: GcnModel,
    /// Loss before each update, one value per epoch.
    pub loss_trace: Vec<f64>,
}

/// Full-batch gradient descent on a single graph.
pub fn train(
    cfg: &ModelConfig,
    adjacency: &NormalizedAdjacency,
    features: &Matrix,
    labels: &[f64],
    mask: &[usize],
) -> Result<TrainOutput> {
    train_graphs(
        cfg,
        &[GraphSample {
            adjacency,
            features,
            labels,
            mask,
        }],
    )
}

/// Full-batch gradient descent over several disjoint graphs; the loss is the
/// mean over every masked node of every graph.
pub fn train_graphs(cfg: &ModelConfig, samples: &[GraphSample<'_>]) -> Result<TrainOutput> {
    let model = GcnModel::init(cfg)?;
    train_from(model, cfg, samples)
}

pub fn train_from(mut model: GcnModel, cfg: &ModelConfig, samples: &[GraphSample<'_>]) -> Result<TrainOutput> {
    cfg.validate()?;
    let total: usize = samples.iter().map(|s| s.mask.len()).sum();
    if total == 0 {
        return Err(Error::Contract("no labeled nodes to train on".into()));
    }
    for s in samples {
        if s.labels.len() != s.adjacency.n() {
            return Err(Error::Contract(format!(
                "{} labels for {} nodes",
                s.labels.len(),
                s.adjacency.n()
            )));
        }
        if let Some(&i) = s.mask.iter().find(|&&i| i >= s.adjacency.n()) {
            return Err(Error::Contract(format!(
                "mask index {i} outside {} nodes",
                s.adjacency.n()
            )));
        }
    }
    let denominator = total as f64;
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let per_graph: Vec<(f64, GcnModel)> = samples
            .par_iter()
            .map(|s| {
                let out = forward(&model, s.adjacency, s.features)?;
                let loss = bce_sum(&out.probabilities, s.labels, s.mask);
                let grads = backward_scaled(&model, s.adjacency, &out, s.labels, s.mask, denominator);
                Ok((loss, grads))
            })
            .collect::<Result<_>>()?;
        // Sequential reduction keeps results independent of thread scheduling.
        let mut loss = 0.0;
        let mut grads = model.zeros_like();
        for (l, g) in &per_graph {
            loss += l;
            grads.add_scaled(g, 1.0);
        }
        let loss = loss / denominator;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        loss_trace.push(loss);
        model.add_scaled(&grads, -cfg.learning_rate);
    }
    Ok(TrainOutput { model, loss_trace })
}

/// Sigmoid outputs for every node of one graph.
pub fn predict(model: &GcnModel, adjacency: &NormalizedAdjacency, features: &Matrix) -> Result<Vec<f64>> {
    forward(model, adjacency, features).map(|o| o.probabilities)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerCheckpoint {
    weight: Vec<f64>,
    bias: Vec<f64>,
}

/// Serialized model: dimensions, seed and row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub seed: u64,
    pub self_loops: bool,
    layers: Vec<LayerCheckpoint>,
}

impl Checkpoint {
    pub fn new(model: &GcnModel, cfg: &ModelConfig) -> Self {
        Self {
            layer_dims: model.layer_dims(),
            seed: cfg.seed,
            self_loops: cfg.self_loops,
            layers: model
                .layers
                .iter()
                .map(|l| LayerCheckpoint {
                    weight: l.weight.as_slice().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn model(&self) -> Result<GcnModel> {
        if self.layer_dims.len() != self.layers.len() + 1 {
            return Err(Error::Integrity(
                "checkpoint layer count does not match layer_dims".into(),
            ));
        }
        let layers = self
            .layers
            .iter()
            .zip(self.layer_dims.windows(2))
            .map(|(l, dims)| {
                if l.bias.len() != dims[1] || l.weight.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                    return Err(Error::Integrity(format!("bad checkpoint layer {dims:?}")));
                }
                Ok(LayerParams {
                    weight: Matrix::new(dims[0], dims[1], l.weight.clone())?,
                    bias: l.bias.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(GcnModel { layers })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("checkpoint serialization is infallible");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&json).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

/// Writes `epoch,loss` rows.
pub fn write_loss_trace(trace: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "epoch,loss").unwrap();
    for (epoch, loss) in trace.iter().enumerate() {
        writeln!(out, "{epoch},{loss}").unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
