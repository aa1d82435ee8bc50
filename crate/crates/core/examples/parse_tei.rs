//! Parses a TEI document and links its bibliography to a manifest entry.
//!
//! cargo run --example parse_tei [-- <tei.xml> <manifest.json> <paper_id>]

use std::path::PathBuf;

use source_tracing::corpus::{link_bibliography, load_manifest, parse_tei};

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
    println!("title:    {}", doc.title);
    println!("abstract: {}", doc.abstract_text);
    for s in &doc.sections {
        println!("section {:?}: {} paragraph(s)", s.heading, s.paragraphs.len());
        for p in &s.paragraphs {
            println!("  {}", p.text);
            for m in &p.markers {
                println!("    marker {} at chars {}..{}", m.bib_key, m.span.0, m.span.1);
            }
        }
    }
    println!("unresolved markers: {}", doc.unresolved_markers);

    let entries = load_manifest(&manifest)?;
    let entry = entries
        .iter()
        .find(|e| e.paper_id == paper_id)
        .ok_or_else(|| format!("{paper_id} not in {}", manifest.display()))?;
    let link = link_bibliography(&doc, entry);
    for b in &doc.bibliography {
        match link.ref_for(&b.bib_key) {
            Some(r) => println!("{} -> {r}  ({})", b.bib_key, b.raw_title),
            None => println!("{} unmatched  ({})", b.bib_key, b.raw_title),
        }
    }
    Ok(())
}
