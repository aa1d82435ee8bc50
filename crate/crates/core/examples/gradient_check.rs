//! Compares analytic GCN gradients with central finite differences.
//!
//! cargo run --example gradient_check [-- <seed>]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use source_tracing::gcn::{
    backward, forward, loss_bce, normalize_adjacency, Adjacency, GcnModel, InitScheme, Matrix, ModelConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|s| (0..n).map(move |d| (s, d)))
        .filter(|&(s, d)| s != d)
        .filter(|_| rng.gen_bool(0.35))
        .collect();
    let adj = normalize_adjacency(&Adjacency::from_edges(n, edges), true);
    let x = Matrix::new(n, 3, (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let mask: Vec<usize> = (0..n).collect();

    let mut cfg = ModelConfig::with_hidden(3, &[4]);
    cfg.seed = seed;
    cfg.init = InitScheme::Uniform;
    let model = GcnModel::init(&cfg)?;
    let out = forward(&model, &adj, &x)?;
    let grads = backward(&model, &adj, &out, &labels, &mask)?;

    let loss = |m: &GcnModel| -> Result<f64, Box<dyn std::error::Error>> {
        Ok(loss_bce(&forward(m, &adj, &x)?.probabilities, &labels, &mask)?)
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, &a) in grads.parameters().enumerate() {
        let mut plus = model.clone();
        let mut minus = model.clone();
        *plus.parameters_mut().nth(k).unwrap() += h;
        *minus.parameters_mut().nth(k).unwrap() -= h;
        let numeric = (loss(&plus)? - loss(&minus)?) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
        println!("param {k:>2}  analytic {a:>12.8}  numeric {numeric:>12.8}  rel {rel:.2e}");
    }
    println!("{} parameters, max relative error {worst:.2e}", model.parameter_count());
    Ok(())
}
