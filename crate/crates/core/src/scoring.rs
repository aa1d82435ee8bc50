//! Score tables, ranking metrics, ensembling and the train/validation split.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::marker::PhantomData;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::corpus::DatasetEntry;
use crate::error::{Error, Result};
use crate::gcn::{predict, GcnModel, Matrix, NormalizedAdjacency};
use crate::graph::PaperGraph;

pub const DEFAULT_TRAIN_RATIO: f64 = 2.0 / 3.0;

/// Per-(paper, reference) scores in `[0, 1]` with a provenance tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    pub tag: String,
    scores: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ScoreTable {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            scores: BTreeMap::new(),
        }
    }

    /// Inserts one score; rejects values outside `[0, 1]` and repeated keys.
    pub fn insert(&mut self, paper_id: &str, ref_id: &str, score: f64) -> Result<()> {
        check_score(score).map_err(|m| Error::Contract(format!("{paper_id}/{ref_id}: {m}")))?;
        let refs = self.scores.entry(paper_id.to_string()).or_default();
        if refs.insert(ref_id.to_string(), score).is_some() {
            return Err(Error::Contract(format!("duplicate score key {paper_id}/{ref_id}")));
        }
        Ok(())
    }

    pub fn get(&self, paper_id: &str, ref_id: &str) -> Option<f64> {
        self.scores.get(paper_id)?.get(ref_id).copied()
    }

    pub fn paper(&self, paper_id: &str) -> Option<&BTreeMap<String, f64>> {
        self.scores.get(paper_id)
    }

    pub fn papers(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, f64>)> {
        self.scores.iter().map(|(p, r)| (p.as_str(), r))
    }

    pub fn paper_ids(&self) -> BTreeSet<String> {
        self.scores.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.scores.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn keys(&self) -> BTreeSet<(String, String)> {
        self.scores
            .iter()
            .flat_map(|(p, refs)| refs.keys().map(move |r| (p.clone(), r.clone())))
            .collect()
    }

    /// Keeps only the listed papers.
    pub fn restrict(&self, papers: &BTreeSet<String>) -> Self {
        Self {
            tag: self.tag.clone(),
            scores: self
                .scores
                .iter()
                .filter(|(p, _)| papers.contains(*p))
                .map(|(p, r)| (p.clone(), r.clone()))
                .collect(),
        }
    }

    /// Same keys, uniform random scores.
    pub fn random_like(&self, seed: u64, tag: impl Into<String>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            tag: tag.into(),
            scores: self
                .scores
                .iter()
                .map(|(p, refs)| (p.clone(), refs.keys().map(|r| (r.clone(), rng.gen::<f64>())).collect()))
                .collect(),
        }
    }

    /// Checks that each covered paper scores exactly its manifest references.
    pub fn check_against(&self, entries: &[DatasetEntry]) -> Result<()> {
        let by_id: BTreeMap<&str, &DatasetEntry> = entries.iter().map(|e| (e.paper_id.as_str(), e)).collect();
        for (paper_id, refs) in &self.scores {
            let entry = by_id
                .get(paper_id.as_str())
                .ok_or_else(|| Error::Integrity(format!("score table covers unknown paper {paper_id}")))?;
            let expected: BTreeSet<&str> = entry.references.iter().map(|r| r.ref_id.as_str()).collect();
            let got: BTreeSet<&str> = refs.keys().map(String::as_str).collect();
            if expected != got {
                return Err(Error::Integrity(format!(
                    "paper {paper_id}: scored refs {got:?} differ from manifest refs {expected:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("score table serialization is infallible")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Parses the score-table JSON format; `tag` overrides the stored tag when given.
    pub fn from_json(json: &str, tag: Option<&str>, locus: &str) -> Result<Self> {
        let raw: RawTable = serde_json::from_str(json).map_err(|e| Error::json(locus, e))?;
        let mut table = Self::new(tag.map_or(raw.tag, str::to_string));
        for (paper_id, refs) in raw.scores.0 {
            let entry = table.scores.entry(paper_id.clone()).or_default();
            for (ref_id, score) in refs.0 {
                check_score(score).map_err(|m| Error::load(format!("{locus}: {paper_id}/{ref_id}"), m))?;
                entry.insert(ref_id, score);
            }
        }
        Ok(table)
    }
}

fn check_score(score: f64) -> std::result::Result<(), String> {
    if !score.is_finite() {
        Err(format!("non-finite score {score}"))
    } else if !(0.0..=1.0).contains(&score) {
        Err(format!("score {score} outside [0, 1]"))
    } else {
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    tag: String,
    scores: UniqueMap<UniqueMap<f64>>,
}

/// JSON object decoded in order, rejecting repeated keys.
struct UniqueMap<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for UniqueMap<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct UniqueVisitor<V>(PhantomData<V>);
        impl<'de, V: Deserialize<'de>> Visitor<'de> for UniqueVisitor<V> {
            type Value = UniqueMap<V>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut seen = HashSet::new();
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    if !seen.insert(k.clone()) {
                        return Err(de::Error::custom(format!("duplicate key {k:?}")));
                    }
                    out.push((k, v));
                }
                Ok(UniqueMap(out))
            }
        }
        d.deserialize_map(UniqueVisitor(PhantomData))
    }
}

/// Reads a score-table file and stamps it with `tag`.
pub fn import_score_table(path: impl AsRef<Path>, tag: &str) -> Result<ScoreTable> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScoreTable::from_json(&json, Some(tag), &path.display().to_string())
}

/// Reads a score-table file keeping its stored tag.
pub fn read_score_table(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScoreTable::from_json(&json, None, &path.display().to_string())
}

/// Orders refs by descending score, ties by ascending ref id.
pub fn rank<S: AsRef<str>>(scores: &[(S, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .1
            .total_cmp(&scores[a].1)
            .then_with(|| scores[a].0.as_ref().cmp(scores[b].0.as_ref()))
    });
    order
}

/// Mean over positive ranks `k` of (positives in top `k`) / `k`.
pub fn average_precision<S: AsRef<str>>(scores: &[(S, f64)], positives: &BTreeSet<String>) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::NoPositives("<unnamed>".into()));
    }
    if let Some((r, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::Contract(format!("non-finite score {s} for {}", r.as_ref())));
    }
    let scored: HashSet<&str> = scores.iter().map(|(r, _)| r.as_ref()).collect();
    if scored.len() != scores.len() {
        return Err(Error::Contract("duplicate ref id in score list".into()));
    }
    if let Some(p) = positives.iter().find(|p| !scored.contains(p.as_str())) {
        return Err(Error::Contract(format!("positive {p} has no score")));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &i) in rank(scores).iter().enumerate() {
        if positives.contains(scores[i].0.as_ref()) {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / positives.len() as f64)
}

/// Source labels of labeled entries, optionally restricted to `papers`.
pub fn labels_of(entries: &[DatasetEntry], papers: Option<&BTreeSet<String>>) -> BTreeMap<String, BTreeSet<String>> {
    entries
        .iter()
        .filter(|e| e.labels_present)
        .filter(|e| papers.is_none_or(|p| p.contains(&e.paper_id)))
        .map(|e| (e.paper_id.clone(), e.source_labels.clone()))
        .collect()
}

/// AP of every labeled paper with at least one positive.
pub fn per_paper_ap(table: &ScoreTable, labels: &BTreeMap<String, BTreeSet<String>>) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (paper_id, positives) in labels {
        let refs = table
            .paper(paper_id)
            .ok_or_else(|| Error::UncoveredPaper(paper_id.clone()))?;
        if positives.is_empty() {
            continue;
        }
        let list: Vec<(&str, f64)> = refs.iter().map(|(r, &s)| (r.as_str(), s)).collect();
        let ap = average_precision(&list, positives).map_err(|e| match e {
            Error::Contract(m) => Error::Contract(format!("paper {paper_id}: {m}")),
            other => other,
        })?;
        out.insert(paper_id.clone(), ap);
    }
    Ok(out)
}

/// Mean AP over labeled papers that have a positive.
pub fn map_metric(table: &ScoreTable, labels: &BTreeMap<String, BTreeSet<String>>) -> Result<f64> {
    let aps = per_paper_ap(table, labels)?;
    if aps.is_empty() {
        return Err(Error::NoPositives("any labeled paper".into()));
    }
    Ok(aps.values().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMethod {
    #[default]
    WeightedMean,
    /// Weighted mean of per-paper normalized ranks (1 for the top ref, 0 for the last).
    RankAverage,
}

fn key_mismatch(a: &ScoreTable, b: &ScoreTable) -> Option<Error> {
    let (ka, kb) = (a.keys(), b.keys());
    if ka == kb {
        return None;
    }
    Some(Error::KeyMismatch {
        only_first: ka.difference(&kb).cloned().collect(),
        only_other: kb.difference(&ka).cloned().collect(),
    })
}

fn normalized_ranks(refs: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let list: Vec<(&str, f64)> = refs.iter().map(|(r, &s)| (r.as_str(), s)).collect();
    let order = rank(&list);
    let n = list.len();
    let mut out = BTreeMap::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && list[order[end]].1 == list[order[start]].1 {
            end += 1;
        }
        let mean_pos = (start + end - 1) as f64 / 2.0;
        let value = if n == 1 { 1.0 } else { 1.0 - mean_pos / (n - 1) as f64 };
        for &i in &order[start..end] {
            out.insert(list[i].0.to_string(), value);
        }
        start = end;
    }
    out
}

/// Combines tables covering identical keys. Weights default to uniform.
pub fn ensemble(tables: &[ScoreTable], weights: Option<&[f64]>, method: EnsembleMethod) -> Result<ScoreTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::Contract("ensemble needs at least one table".into()))?;
    let uniform = vec![1.0; tables.len()];
    let weights = weights.unwrap_or(&uniform);
    if weights.len() != tables.len() {
        return Err(Error::Config(format!(
            "{} weights for {} tables",
            weights.len(),
            tables.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Config(format!(
            "ensemble weights must be finite and nonnegative: {weights:?}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Config("ensemble weights sum to zero".into()));
    }
    if let Some(err) = tables[1..].iter().find_map(|t| key_mismatch(first, t)) {
        return Err(err);
    }

    let tag = tables.iter().map(|t| t.tag.as_str()).collect::<Vec<_>>().join("+");
    let mut out = ScoreTable::new(tag);
    for paper_id in first.scores.keys() {
        let per_table: Vec<BTreeMap<String, f64>> = tables
            .iter()
            .map(|t| {
                let refs = &t.scores[paper_id];
                match method {
                    EnsembleMethod::WeightedMean => refs.clone(),
                    EnsembleMethod::RankAverage => normalized_ranks(refs),
                }
            })
            .collect();
        let mut combined = BTreeMap::new();
        for ref_id in first.scores[paper_id].keys() {
            let s: f64 = per_table.iter().zip(weights).map(|(m, w)| w * m[ref_id]).sum();
            combined.insert(ref_id.clone(), (s / total).clamp(0.0, 1.0));
        }
        out.scores.insert(paper_id.clone(), combined);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub train: BTreeSet<String>,
    pub val: BTreeSet<String>,
}

/// Seeded shuffle of the labeled papers, then a prefix of
/// `round(ratio · N)` papers goes to training.
pub fn split_train_val(entries: &[DatasetEntry], ratio: f64, seed: u64) -> Result<SplitAssignment> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("train ratio {ratio} outside (0, 1)")));
    }
    let mut ids: Vec<&str> = entries
        .iter()
        .filter(|e| e.labels_present)
        .map(|e| e.paper_id.as_str())
        .collect();
    if ids.len() < 2 {
        return Err(Error::Contract(format!(
            "need at least 2 labeled papers to split, have {}",
            ids.len()
        )));
    }
    let n_train = (ratio * ids.len() as f64).round() as usize;
    if n_train == 0 || n_train == ids.len() {
        return Err(Error::Config(format!(
            "ratio {ratio} leaves an empty side for {} papers",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(SplitAssignment {
        seed,
        train: ids[..n_train].iter().map(|s| s.to_string()).collect(),
        val: ids[n_train..].iter().map(|s| s.to_string()).collect(),
    })
}

/// One graph ready for scoring.
#[derive(Debug, Clone, Copy)]
pub struct ScoringInput<'a> {
    pub graph: &'a PaperGraph,
    pub adjacency: &'a NormalizedAdjacency,
    pub features: &'a Matrix,
}

/// Scores the reference nodes of every graph.
pub fn predict_scores(model: &GcnModel, inputs: &[ScoringInput<'_>], tag: &str) -> Result<ScoreTable> {
    let mut table = ScoreTable::new(tag);
    for input in inputs {
        let probs = predict(model, input.adjacency, input.features)?;
        let refs = table.scores.entry(input.graph.paper_id.clone()).or_default();
        for node in &input.graph.nodes {
            if let Some(ref_id) = &node.ref_id {
                let p = probs[node.index];
                check_score(p).map_err(|m| Error::Contract(format!("{}/{ref_id}: {m}", input.graph.paper_id)))?;
                refs.insert(ref_id.clone(), p);
            }
        }
    }
    Ok(table)
}
