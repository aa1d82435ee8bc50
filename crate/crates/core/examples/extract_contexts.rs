//! Builds masked citation contexts in both truncation modes for every
//! reference of the fixture corpus.
//!
//! cargo run --example extract_contexts [-- <run.json>]

use std::path::PathBuf;

use source_tracing::config::RunConfig;
use source_tracing::context::TruncationMode;
use source_tracing::pipeline::{extract_paper, load_corpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/extract/run.json"));
    let cfg = RunConfig::load(&config)?;
    let corpus = load_corpus(&cfg)?;
    for s in &corpus.skipped {
        println!("skipped {}: {}", s.paper_id, s.reason);
    }
    for paper in &corpus.papers {
        let (semantic, absolute) = extract_paper(paper, &cfg)?;
        println!("== {} ({})", paper.entry.paper_id, paper.entry.title);
        for (mode, records) in [
            (TruncationMode::Semantic, semantic),
            (TruncationMode::Absolute, absolute),
        ] {
            for r in records {
                let seq = r.to_sequence();
                println!(
                    "[{mode}] {} x{} label={}  {}",
                    r.ref_id,
                    r.instance_count,
                    seq.label.as_field(),
                    seq.input_text
                );
            }
        }
    }
    Ok(())
}
