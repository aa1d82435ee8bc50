//! Graph convolutional network written against a small dense/sparse matrix
//! layer: symmetric adjacency normalization, forward pass, masked binary
//! cross-entropy, analytic backpropagation and full-batch training.

mod adjacency;
mod matrix;
mod model;
mod train;

pub use adjacency::{normalize_adjacency, Adjacency, NormalizedAdjacency};
pub use matrix::Matrix;
pub use model::{
    backward, forward, loss_bce, sigmoid, ForwardCache, ForwardOutput, GcnModel, Gradients, InitScheme, LayerParams,
    ModelConfig, DEFAULT_HIDDEN, PROB_CLAMP,
};
pub use train::{predict, train, train_from, train_graphs, write_loss_trace, Checkpoint, GraphSample, TrainOutput};
