//! Ensembles two complementary scorers and reports MAP for each.
//!
//! cargo run --example ensemble_eval

use std::collections::{BTreeMap, BTreeSet};

use source_tracing::scoring::{ensemble, map_metric, per_paper_ap, EnsembleMethod, ScoreTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let positives: BTreeSet<String> = ["c", "d"].iter().map(|s| s.to_string()).collect();
    let mut labels = BTreeMap::new();
    let mut a = ScoreTable::new("context");
    let mut b = ScoreTable::new("graph");
    // Each scorer is sharp on half the papers and flat on the other half.
    for p in 0..6 {
        let paper = format!("paper{p}");
        labels.insert(paper.clone(), positives.clone());
        for r in ["a", "b", "c", "d"] {
            let sharp = if positives.contains(r) { 0.9 } else { 0.1 };
            let (sa, sb) = if p % 2 == 0 { (sharp, 0.5) } else { (0.5, sharp) };
            a.insert(&paper, r, sa)?;
            b.insert(&paper, r, sb)?;
        }
    }
    let mean = ensemble(&[a.clone(), b.clone()], None, EnsembleMethod::WeightedMean)?;
    let ranks = ensemble(&[a.clone(), b.clone()], Some(&[2.0, 1.0]), EnsembleMethod::RankAverage)?;
    for (name, t) in [
        ("single", &a),
        ("single", &b),
        ("weighted mean", &mean),
        ("rank average", &ranks),
    ] {
        println!("{:<14} {:<14} MAP {:.4}", name, t.tag, map_metric(t, &labels)?);
    }
    for (p, ap) in per_paper_ap(&a, &labels)? {
        println!("  {} AP {ap:.4}", p);
    }
    println!("{}", mean.restrict(&["paper0".to_string()].into()).to_json());
    Ok(())
}
