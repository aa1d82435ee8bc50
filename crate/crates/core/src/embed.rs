//! Node features: a seeded hashed TF-IDF embedder and a loader for
//! externally computed vectors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};
use crate::gcn::Matrix;
use crate::graph::PaperGraph;

/// Largest supported embedding width.
pub const MAX_EMBEDDING_DIM: usize = 1024;

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() > MAX_EMBEDDING_DIM {
            return Err(Error::Config(format!(
                "embedding dimension {} outside 1..={MAX_EMBEDDING_DIM}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite embedding value".into()));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Cosine similarity; zero when either vector is zero.
    pub fn cosine(&self, other: &Self) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        dot / (na * nb)
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Signed feature hashing of TF-IDF weights.
///
/// Each token lands in bucket `h % dim` with sign taken from the top bit of
/// `h = xxh3(token, seed)`. The weight is `tf · (ln((1 + N) / (1 + df)) + 1)`
/// with document frequencies counted over `texts`. Non-zero vectors are
/// L2-normalized.
pub fn embed_hashed_tfidf<S: AsRef<str>>(texts: &[S], dim: usize, seed: u64) -> Result<Vec<EmbeddingVector>> {
    if dim == 0 || dim > MAX_EMBEDDING_DIM {
        return Err(Error::Config(format!(
            "embedding dimension {dim} outside 1..={MAX_EMBEDDING_DIM}"
        )));
    }
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref())).collect();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in &docs {
        let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let n = docs.len() as f64;
    docs.iter()
        .map(|doc| {
            let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
            for t in doc {
                *tf.entry(t.as_str()).or_insert(0) += 1;
            }
            let mut values = vec![0.0; dim];
            for (token, count) in tf {
                let idf = ((1.0 + n) / (1.0 + df[token] as f64)).ln() + 1.0;
                let h = xxh3_64_with_seed(token.as_bytes(), seed);
                let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
                values[(h % dim as u64) as usize] += sign * count as f64 * idf;
            }
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut values {
                    *v /= norm;
                }
            }
            EmbeddingVector::new(values)
        })
        .collect()
}

/// Vectors keyed by `(paper_id, node_index)`, all of one width.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<(String, usize), EmbeddingVector>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingLine {
    paper_id: String,
    node_index: usize,
    vector: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, paper_id: &str, node_index: usize, v: EmbeddingVector) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::Contract(format!(
                "embedding for {paper_id}/{node_index} has dim {}, table dim {}",
                v.dim(),
                self.dim
            )));
        }
        self.vectors.insert((paper_id.to_string(), node_index), v);
        Ok(())
    }

    pub fn get(&self, paper_id: &str, node_index: usize) -> Result<&EmbeddingVector> {
        self.vectors
            .get(&(paper_id.to_string(), node_index))
            .ok_or_else(|| Error::MissingEmbedding {
                paper_id: paper_id.to_string(),
                node_index,
            })
    }

    /// `n × dim` feature matrix for the nodes of `graph`.
    pub fn features_for(&self, graph: &PaperGraph) -> Result<Matrix> {
        let mut m = Matrix::zeros(graph.len(), self.dim);
        for node in &graph.nodes {
            let v = self.get(&graph.paper_id, node.index)?;
            m.row_mut(node.index).copy_from_slice(v.values());
        }
        Ok(m)
    }

    /// Writes JSON Lines in key order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for ((paper_id, node_index), v) in &self.vectors {
            let line = EmbeddingLine {
                paper_id: paper_id.clone(),
                node_index: *node_index,
                vector: v.values.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl<R: BufRead>(input: R, expected_dim: usize, locus: &str) -> Result<Self> {
        let mut table = Self::new(expected_dim);
        for (i, line) in input.lines().enumerate() {
            let at = format!("{locus}:{}", i + 1);
            let line = line.map_err(|e| Error::load(&at, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingLine = serde_json::from_str(&line).map_err(|e| Error::json(&at, e))?;
            let key = format!("{}/{}", rec.paper_id, rec.node_index);
            if rec.vector.len() != expected_dim {
                return Err(Error::load(
                    &at,
                    format!("{key}: dimension {} but expected {expected_dim}", rec.vector.len()),
                ));
            }
            if rec.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::load(&at, format!("{key}: non-finite value")));
            }
            if table.vectors.contains_key(&(rec.paper_id.clone(), rec.node_index)) {
                return Err(Error::load(&at, format!("{key}: duplicate key")));
            }
            let v = EmbeddingVector::new(rec.vector).map_err(|e| Error::load(&at, e.to_string()))?;
            table.vectors.insert((rec.paper_id, rec.node_index), v);
        }
        Ok(table)
    }
}

/// Loads an embedding JSON Lines file, requiring every vector to be `expected_dim` wide.
pub fn load_external_embeddings(path: impl AsRef<Path>, expected_dim: usize) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::read_jsonl(std::io::BufReader::new(file), expected_dim, &path.display().to_string())
}

/// Embeds every node of every graph in one batch, so document frequencies
/// span the whole corpus.
pub fn embed_graphs(graphs: &[PaperGraph], dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let texts: Vec<&str> = graphs
        .iter()
        .flat_map(|g| g.nodes.iter().map(|n| n.text.as_str()))
        .collect();
    let vectors = embed_hashed_tfidf(&texts, dim, seed)?;
    let mut table = EmbeddingTable::new(dim);
    let keys = graphs
        .iter()
        .flat_map(|g| g.nodes.iter().map(move |n| (g.paper_id.as_str(), n.index)));
    for ((paper_id, idx), v) in keys.zip(vectors) {
        table.insert(paper_id, idx, v)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_identical_vectors() {
        let v = embed_hashed_tfidf(&["graph neural nets", "graph neural nets", "other"], 64, 7).unwrap();
        assert_eq!(v[0], v[1]);
        assert!((v[0].cosine(&v[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v = embed_hashed_tfidf(&["", "words here", "<>!!"], 16, 0).unwrap();
        assert!(v[0].is_zero());
        assert!(v[2].is_zero());
        assert_eq!(v[0].dim(), 16);
    }

    #[test]
    fn single_token_document() {
        // N = 1, df = 1: idf = ln(2/2) + 1 = 1, so the weight is tf = 2
        // before normalization and exactly ±1 after.
        let v = embed_hashed_tfidf(&["Token token"], 8, 3).unwrap();
        let nonzero: Vec<f64> = v[0].values().iter().copied().filter(|&x| x != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].abs(), 1.0);
    }

    #[test]
    fn idf_downweights_common_tokens() {
        // "common" appears in both docs (idf 1), "rare" in one (idf ln(3/2)+1).
        let v = embed_hashed_tfidf(&["common rare", "common"], 1024, 0).unwrap();
        let bucket = |t: &str| (xxh3_64_with_seed(t.as_bytes(), 0) % 1024) as usize;
        let (c, r) = (bucket("common"), bucket("rare"));
        assert_ne!(c, r);
        let ratio = v[0].values()[r].abs() / v[0].values()[c].abs();
        assert!((ratio - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn dimension_bounds() {
        assert!(matches!(embed_hashed_tfidf(&["a"], 0, 0), Err(Error::Config(_))));
        assert!(matches!(embed_hashed_tfidf(&["a"], 1025, 0), Err(Error::Config(_))));
        assert!(embed_hashed_tfidf(&["a"], 1024, 0).is_ok());
    }

    #[test]
    fn hashing_is_stable_across_runs() {
        // Frozen bucket and sign for a fixed token and seed.
        let h = xxh3_64_with_seed(b"graph", 42);
        let v = embed_hashed_tfidf(&["graph"], 256, 42).unwrap();
        let idx = (h % 256) as usize;
        let expected = if h >> 63 == 1 { -1.0 } else { 1.0 };
        assert_eq!(v[0].values()[idx], expected);
        assert_eq!(h, xxh3_64_with_seed(b"graph", 42));
    }

    #[test]
    fn jsonl_loading() {
        let good = "{\"paper_id\":\"p\",\"node_index\":0,\"vector\":[1,0,0,0]}\n{\"paper_id\":\"p\",\"node_index\":1,\"vector\":[0,1,0,0]}\n{\"paper_id\":\"q\",\"node_index\":0,\"vector\":[0,0,1,0]}\n";
        let t = EmbeddingTable::read_jsonl(good.as_bytes(), 4, "e").unwrap();
        assert_eq!(t.len(), 3);
        assert!(matches!(t.get("q", 5), Err(Error::MissingEmbedding { .. })));

        let short = "{\"paper_id\":\"p\",\"node_index\":0,\"vector\":[1,0,0]}\n";
        let err = EmbeddingTable::read_jsonl(short.as_bytes(), 4, "e").unwrap_err();
        assert!(err.to_string().contains("p/0"), "{err}");

        let inf = "{\"paper_id\":\"p\",\"node_index\":0,\"vector\":[1e999,0,0,0]}\n";
        assert!(EmbeddingTable::read_jsonl(inf.as_bytes(), 4, "e").is_err());

        let dup = format!(
            "{}{}",
            &good[..good.find('\n').unwrap() + 1],
            &good[..good.find('\n').unwrap() + 1]
        );
        assert!(EmbeddingTable::read_jsonl(dup.as_bytes(), 4, "e").is_err());
    }

    #[test]
    fn write_then_read() {
        let vs = embed_hashed_tfidf(&["alpha beta", "gamma"], 8, 1).unwrap();
        let mut t = EmbeddingTable::new(8);
        for (i, v) in vs.into_iter().enumerate() {
            t.insert("p", i, v).unwrap();
        }
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        assert_eq!(EmbeddingTable::read_jsonl(buf.as_slice(), 8, "mem").unwrap(), t);
    }

    proptest::proptest! {
        #[test]
        fn unit_norm_or_zero(texts in proptest::collection::vec("[a-e ]{0,20}", 1..6), seed in 0u64..100) {
            for v in embed_hashed_tfidf(&texts, 32, seed).unwrap() {
                let n = v.norm();
                proptest::prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn disjoint_texts_are_orthogonal_without_collisions() {
        let v = embed_hashed_tfidf(&["apple banana", "cherry durian"], 1024, 5).unwrap();
        let buckets: HashSet<u64> = ["apple", "banana", "cherry", "durian"]
            .iter()
            .map(|t| xxh3_64_with_seed(t.as_bytes(), 5) % 1024)
            .collect();
        assert_eq!(buckets.len(), 4);
        assert_eq!(v[0].cosine(&v[1]), 0.0);
    }
}
