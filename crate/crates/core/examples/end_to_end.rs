//! Runs extract, build-graph, train-gcn, score and eval on a generated
//! corpus with planted source citations.
//!
//! cargo run --release --example end_to_end [-- <output dir>]

use std::path::PathBuf;

use source_tracing::pipeline::{self, EvalOptions, TableInput};
use source_tracing::synthetic::{write_synthetic_corpus, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("source-trace-end-to-end"));
    let mut cfg = write_synthetic_corpus(&SyntheticSpec::default(), &dir)?;
    cfg.gcn.epochs = 300;
    cfg.write(dir.join("run.json"))?;
    println!("corpus and config written to {}", dir.display());

    let ex = pipeline::cmd_extract(&cfg)?;
    println!(
        "extract: {} papers, {} records per mode, {} citation instances",
        ex.papers_extracted, ex.records_per_mode, ex.instances
    );
    let g = pipeline::cmd_build_graph(&cfg)?;
    println!(
        "build-graph: {} graphs, {} nodes, {} edges, dim {}",
        g.graphs, g.nodes, g.edges, g.embedding_dim
    );
    let t = pipeline::cmd_train_gcn(&cfg)?;
    println!(
        "train-gcn: {} train / {} val papers, loss {:.4} -> {:.4}",
        t.train_papers,
        t.val_papers,
        t.initial_loss.unwrap_or(f64::NAN),
        t.final_loss.unwrap_or(f64::NAN)
    );
    let scores = pipeline::cmd_score(&cfg, None)?;
    println!("score: {} (paper, reference) scores", scores.len());

    let input = TableInput::parse(
        cfg.work_dir
            .join(pipeline::SCORES_GCN)
            .to_str()
            .ok_or("non-UTF-8 path")?,
    );
    let report = pipeline::cmd_eval(
        &cfg,
        &[input],
        &EvalOptions {
            random_baseline: Some(1),
            ..EvalOptions::default()
        },
    )?;
    print!("{}", report.to_text());
    Ok(())
}
