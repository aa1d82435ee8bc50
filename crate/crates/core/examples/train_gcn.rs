//! Trains a two-layer GCN on a toy graph of two linked communities and
//! prints the loss curve and per-node scores.
//!
//! cargo run --example train_gcn [-- <epochs> <learning_rate>]

use source_tracing::gcn::{normalize_adjacency, predict, train, Adjacency, Matrix, ModelConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(300);
    let lr = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.1);

    // Two rings of 8 nodes joined by a single bridge edge.
    let mut edges = Vec::new();
    for c in 0..2 {
        for i in 0..8 {
            let (a, b) = (c * 8 + i, c * 8 + (i + 1) % 8);
            edges.extend([(a, b), (b, a)]);
        }
    }
    edges.extend([(7, 8), (8, 7)]);
    let adj = normalize_adjacency(&Adjacency::from_edges(16, edges), true);
    let rows: Vec<[f64; 2]> = (0..16).map(|i| if i < 8 { [1.0, 0.2] } else { [0.2, 1.0] }).collect();
    let x = Matrix::from_rows(&rows);
    let labels: Vec<f64> = (0..16).map(|i| if i < 8 { 0.0 } else { 1.0 }).collect();
    // Only half the nodes carry labels; the rest are predicted.
    let mask: Vec<usize> = (0..16).filter(|i| i % 2 == 0).collect();

    let mut cfg = ModelConfig::with_hidden(2, &[16]);
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    let out = train(&cfg, &adj, &x, &labels, &mask)?;
    for (e, l) in out.loss_trace.iter().enumerate().filter(|(e, _)| e % 25 == 0) {
        println!("epoch {e:>4}  loss {l:.5}");
    }
    if let Some(l) = out.loss_trace.last() {
        println!("final loss {l:.5}");
    }
    let p = predict(&out.model, &adj, &x)?;
    for (i, s) in p.iter().enumerate() {
        let seen = if mask.contains(&i) { "train" } else { "held out" };
        println!("node {i:>2}  label {}  score {s:.3}  ({seen})", labels[i]);
    }
    Ok(())
}
