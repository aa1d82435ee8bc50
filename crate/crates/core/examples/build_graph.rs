//! Chunks a paper body, builds its graph and embeds every node.
//!
//! cargo run --example build_graph [-- <tei.xml> <manifest.json> <paper_id>]

use std::path::PathBuf;

use source_tracing::corpus::{link_bibliography, load_manifest, parse_tei};
use source_tracing::embed::embed_graphs;
use source_tracing::gcn::normalize_adjacency;
use source_tracing::graph::{build_graph, chunk_body, to_adjacency, ChunkingConfig, GraphConfig};
use source_tracing::text::SentenceSegmenter;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/extract");
    let mut args = std::env::args().skip(1);
    let tei = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures.join("xml/f1.xml"));
    let manifest = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures.join("manifest.json"));
    let paper_id = args.next().unwrap_or_else(|| "f1".into());

    let doc = parse_tei(&std::fs::read(&tei)?)?;
    let entries = load_manifest(&manifest)?;
    let entry = entries
        .iter()
        .find(|e| e.paper_id == paper_id)
        .ok_or("paper not in manifest")?;
    let link = link_bibliography(&doc, entry);

    let chunking = ChunkingConfig::default();
    let chunks = chunk_body(&doc, &chunking, &SentenceSegmenter::default());
    let graph = build_graph(&doc, &link, entry, &chunks, &GraphConfig::default());
    graph.validate()?;

    println!("{} nodes, {} edges", graph.len(), graph.edges.len());
    for n in &graph.nodes {
        let text: String = n.text.chars().take(70).collect();
        println!(
            "  {:>2} {:?} {}  {text}",
            n.index,
            n.kind,
            n.ref_id.as_deref().unwrap_or("")
        );
    }
    for (src, dst) in &graph.edges {
        println!("  {src} -> {dst}");
    }

    let table = embed_graphs(std::slice::from_ref(&graph), 64, 0)?;
    let x = table.features_for(&graph)?;
    let a = normalize_adjacency(&to_adjacency(&graph), true);
    println!(
        "features {}x{}, normalized adjacency with {} entries",
        x.rows(),
        x.cols(),
        a.to_dense().as_slice().iter().filter(|v| **v != 0.0).count()
    );
    Ok(())
}
