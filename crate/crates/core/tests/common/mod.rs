#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use source_tracing::config::RunConfig;
use source_tracing::gcn::{
    forward, loss_bce, normalize_adjacency, Adjacency, GcnModel, InitScheme, Matrix, ModelConfig, NormalizedAdjacency,
};
use source_tracing::pipeline::{self, EvalOptions, TableInput};
use source_tracing::synthetic::{write_synthetic_corpus, SyntheticSpec};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/extract")
}

/// Fixture run config writing into `work_dir`.
pub fn fixture_config(work_dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(fixture_dir().join("run.json")).unwrap();
    cfg.work_dir = work_dir.to_path_buf();
    cfg
}

pub fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Dense `D^-1/2 (A [+ I]) D^-1/2` built straight from the edge weights.
pub fn dense_normalized(a: &Adjacency, self_loops: bool) -> DMatrix<f64> {
    let n = a.n();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for &(r, c, w) in a.entries() {
        m[(r, c)] += w;
    }
    if self_loops {
        m += DMatrix::<f64>::identity(n, n);
    }
    let d: DVector<f64> = DVector::from_iterator(n, (0..n).map(|i| m.row(i).sum()));
    let inv = d.map(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 });
    let dm = DMatrix::from_diagonal(&inv);
    &dm * m * &dm
}

/// Dense forward pass: ReLU on hidden layers, sigmoid on the output.
pub fn dense_forward(model: &GcnModel, a_hat: &DMatrix<f64>, h0: &DMatrix<f64>) -> Vec<f64> {
    let mut h = h0.clone();
    let last = model.layers.len() - 1;
    for (l, layer) in model.layers.iter().enumerate() {
        let w = to_dmatrix(&layer.weight);
        let mut z = a_hat * (&h * w);
        for mut row in z.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        h = if l == last {
            z.map(|v| 1.0 / (1.0 + (-v).exp()))
        } else {
            z.map(|v| v.max(0.0))
        };
    }
    h.column(0).iter().copied().collect()
}

pub struct RandomGraph {
    pub adjacency: Adjacency,
    pub normalized: NormalizedAdjacency,
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub mask: Vec<usize>,
}

/// Random directed graph with `n` nodes, `f` features and a non-empty mask.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, f: usize, edge_p: f64) -> RandomGraph {
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if s != d && rng.gen_bool(edge_p) {
                edges.push((s, d));
            }
        }
    }
    let adjacency = Adjacency::from_edges(n, edges);
    let normalized = normalize_adjacency(&adjacency, true);
    let data = (0..n * f).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let features = Matrix::new(n, f, data).unwrap();
    let labels = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let mut mask: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
    if mask.is_empty() {
        mask.push(rng.gen_range(0..n));
    }
    RandomGraph {
        adjacency,
        normalized,
        features,
        labels,
        mask,
    }
}

/// Model with every layer uniformly initialized.
pub fn random_model(dims: &[usize], seed: u64) -> GcnModel {
    let mut cfg = ModelConfig::with_hidden(dims[0], &dims[1..dims.len() - 1]);
    cfg.seed = seed;
    cfg.init = InitScheme::Uniform;
    GcnModel::init(&cfg).unwrap()
}

pub fn loss_of(model: &GcnModel, g: &RandomGraph) -> f64 {
    let out = forward(model, &g.normalized, &g.features).unwrap();
    loss_bce(&out.probabilities, &g.labels, &g.mask).unwrap()
}

/// Largest relative error between analytic and central-difference gradients.
pub fn max_gradient_error(model: &GcnModel, grads: &GcnModel, g: &RandomGraph, h: f64) -> f64 {
    let analytic: Vec<f64> = grads.parameters().copied().collect();
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let mut plus = model.clone();
        let mut minus = model.clone();
        *plus.parameters_mut().nth(k).unwrap() += h;
        *minus.parameters_mut().nth(k).unwrap() -= h;
        let numeric = (loss_of(&plus, g) - loss_of(&minus, g)) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Direct AP: each positive's rank is counted, not sorted.
pub fn brute_force_ap(scores: &[(String, f64)], positives: &BTreeSet<String>) -> f64 {
    let outranks = |a: &(String, f64), b: &(String, f64)| a.1 > b.1 || (a.1 == b.1 && a.0 < b.0);
    let mut per_positive: Vec<(usize, f64)> = scores
        .iter()
        .filter(|s| positives.contains(&s.0))
        .map(|p| {
            let rank = 1 + scores.iter().filter(|o| outranks(o, p)).count();
            let hits = 1 + scores
                .iter()
                .filter(|o| positives.contains(&o.0) && outranks(o, p))
                .count();
            (rank, hits as f64 / rank as f64)
        })
        .collect();
    per_positive.sort_by_key(|&(rank, _)| rank);
    let mut sum = 0.0;
    for (_, p) in &per_positive {
        sum += p;
    }
    sum / positives.len() as f64
}

/// 20 nodes in two bidirectionally wired clusters of 10 with one bridge;
/// features are noisy one-hot cluster indicators, labels mark cluster 1.
pub fn two_cluster_toy(seed: u64) -> (NormalizedAdjacency, Matrix, Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for c in 0..2 {
        let base = c * 10;
        for i in 0..10 {
            for j in [1, 3] {
                let (a, b) = (base + i, base + (i + j) % 10);
                edges.push((a, b));
                edges.push((b, a));
            }
        }
    }
    edges.push((9, 10));
    edges.push((10, 9));
    let adj = normalize_adjacency(&Adjacency::from_edges(20, edges), true);
    let rows: Vec<[f64; 2]> = (0..20)
        .map(|i| {
            let hot = if i < 10 { [1.0, 0.0] } else { [0.0, 1.0] };
            [hot[0] + rng.gen_range(-0.1..0.1), hot[1] + rng.gen_range(-0.1..0.1)]
        })
        .collect();
    let labels = (0..20).map(|i| if i < 10 { 0.0 } else { 1.0 }).collect();
    (adj, Matrix::from_rows(&rows), labels, (0..20).collect())
}

pub struct PipelineRun {
    pub dir: tempfile::TempDir,
    pub cfg: RunConfig,
    pub val_map: f64,
    pub random_map: f64,
}

/// Epochs for the synthetic end-to-end run.
pub const SYNTHETIC_EPOCHS: usize = 300;

/// extract, build-graph, train-gcn, score and eval on the default synthetic corpus.
pub fn run_synthetic_pipeline() -> PipelineRun {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = write_synthetic_corpus(&SyntheticSpec::default(), dir.path()).unwrap();
    cfg.gcn.epochs = SYNTHETIC_EPOCHS;
    cfg.workers = Some(4);
    pipeline::cmd_extract(&cfg).unwrap();
    pipeline::cmd_build_graph(&cfg).unwrap();
    pipeline::cmd_train_gcn(&cfg).unwrap();
    pipeline::cmd_score(&cfg, None).unwrap();
    let scores = TableInput::parse(cfg.work_dir.join(pipeline::SCORES_GCN).to_str().unwrap());
    let report = pipeline::cmd_eval(
        &cfg,
        &[scores],
        &EvalOptions {
            random_baseline: Some(12345),
            ..EvalOptions::default()
        },
    )
    .unwrap();
    assert_eq!(report.scope, "val");
    PipelineRun {
        val_map: report.rows[0].map,
        random_map: report.rows[1].map,
        dir,
        cfg,
    }
}
