//! Per-paper graph construction: sentence-aligned body chunks plus title,
//! abstract and reference nodes.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{BibliographyLink, DatasetEntry, TeiDocument};
use crate::error::{Error, Result};
use crate::gcn::Adjacency;
use crate::text::{byte_to_char, clean_text, SentenceSegmenter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub target_chars: usize,
    pub min_chars: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            target_chars: 300,
            min_chars: 200,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_chars == 0 || self.min_chars > self.target_chars {
            return Err(Error::Config(format!(
                "chunking needs 0 < min_chars <= target_chars, got {} and {}",
                self.min_chars, self.target_chars
            )));
        }
        Ok(())
    }
}

/// A run of whole sentences from the body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub text: String,
    /// Bib keys of the citation markers inside the chunk, in order.
    pub markers: Vec<String>,
    /// Summed character length of the chunk's sentences, separators excluded.
    pub packed_len: usize,
    pub sentence_count: usize,
}

#[derive(Default)]
struct ChunkAcc {
    sentences: Vec<String>,
    markers: Vec<String>,
    len: usize,
}

impl ChunkAcc {
    fn flush(&mut self, out: &mut Vec<Chunk>) {
        if self.sentences.is_empty() {
            return;
        }
        let acc = std::mem::take(self);
        out.push(Chunk {
            text: acc.sentences.join(" "),
            markers: acc.markers,
            packed_len: acc.len,
            sentence_count: acc.sentences.len(),
        });
    }
}

/// Greedily packs body sentences into chunks of at most `target_chars`.
///
/// Sentences are never split, so a sentence longer than the target forms a
/// chunk of its own. At a paragraph boundary the open chunk is closed once it
/// holds at least `min_chars`; shorter chunks keep filling from the next
/// paragraph.
pub fn chunk_body(doc: &TeiDocument, cfg: &ChunkingConfig, segmenter: &SentenceSegmenter) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut acc = ChunkAcc::default();
    for para in doc.paragraphs() {
        if acc.len >= cfg.min_chars {
            acc.flush(&mut chunks);
        }
        for range in segmenter.split(&para.text) {
            let sentence = &para.text[range.clone()];
            let len = sentence.chars().count();
            if !acc.sentences.is_empty() && acc.len + len > cfg.target_chars {
                acc.flush(&mut chunks);
            }
            let lo = byte_to_char(&para.text, range.start);
            let hi = lo + len;
            acc.markers.extend(
                para.markers
                    .iter()
                    .filter(|m| m.span.0 >= lo && m.span.0 < hi)
                    .map(|m| m.bib_key.clone()),
            );
            acc.sentences.push(sentence.to_string());
            acc.len += len;
        }
    }
    acc.flush(&mut chunks);
    chunks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Title,
    Abstract,
    Chunk,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    #[serde(rename = "i")]
    pub index: usize,
    pub kind: NodeKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_id: Option<String>,
}

/// Direction of the single abstract-title edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstractEdge {
    #[default]
    AbstractToTitle,
    TitleToAbstract,
}

/// Direction of the edge between a reference and a chunk citing it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitationEdge {
    #[default]
    ChunkToReference,
    ReferenceToChunk,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphConfig {
    #[serde(default)]
    pub abstract_edge: AbstractEdge,
    #[serde(default)]
    pub citation_edge: CitationEdge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperGraph {
    pub paper_id: String,
    pub nodes: Vec<Node>,
    /// Directed `(src, dst)` pairs; messages flow from `src` to `dst`.
    pub edges: Vec<(usize, usize)>,
}

impl PaperGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Indices of the reference nodes, ascending.
    pub fn reference_mask(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Reference)
            .map(|n| n.index)
            .collect()
    }

    pub fn reference_ids(&self) -> impl Iterator<Item = (usize, &str)> {
        self.nodes
            .iter()
            .filter_map(|n| n.ref_id.as_deref().map(|r| (n.index, r)))
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Integrity(format!("graph {}: {msg}", self.paper_id)));
        for (i, n) in self.nodes.iter().enumerate() {
            if n.index != i {
                return bad(format!("node {i} carries index {}", n.index));
            }
            if (n.kind == NodeKind::Reference) != n.ref_id.is_some() {
                return bad(format!("node {i}: ref_id must be present exactly on reference nodes"));
            }
        }
        if self.count_kind(NodeKind::Title) != 1 {
            return bad("expected exactly one title node".into());
        }
        if self.count_kind(NodeKind::Abstract) > 1 {
            return bad("more than one abstract node".into());
        }
        let mut seen = HashSet::new();
        for &(s, d) in &self.edges {
            if s >= self.len() || d >= self.len() {
                return bad(format!("edge ({s}, {d}) out of range"));
            }
            if !seen.insert((s, d)) {
                return bad(format!("duplicate edge ({s}, {d})"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn from_json(json: &str, locus: &str) -> Result<Self> {
        let g: PaperGraph = serde_json::from_str(json).map_err(|e| Error::json(locus, e))?;
        g.validate()?;
        Ok(g)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json, &path.display().to_string())
    }
}

/// Builds the paper graph.
///
/// Nodes are the title, the abstract when non-empty, the chunks, then one
/// node per manifest reference. Edges: abstract to title, a pair between
/// every reference and the title, and one edge from each chunk to each
/// reference it cites (directions configurable).
pub fn build_graph(
    doc: &TeiDocument,
    link: &BibliographyLink,
    entry: &DatasetEntry,
    chunks: &[Chunk],
    cfg: &GraphConfig,
) -> PaperGraph {
    let mut nodes = Vec::new();
    let mut push = |kind, text: String, ref_id: Option<String>| {
        let index = nodes.len();
        nodes.push(Node {
            index,
            kind,
            text,
            ref_id,
        });
        index
    };
    let title_text = if entry.title.trim().is_empty() {
        clean_text(&doc.title)
    } else {
        clean_text(&entry.title)
    };
    let title = push(NodeKind::Title, title_text, None);
    let abstract_text = clean_text(&doc.abstract_text);
    let abstract_node = (!abstract_text.is_empty()).then(|| push(NodeKind::Abstract, abstract_text, None));
    let chunk_nodes: Vec<usize> = chunks
        .iter()
        .map(|c| push(NodeKind::Chunk, c.text.clone(), None))
        .collect();
    let ref_nodes: HashMap<&str, usize> = entry
        .references
        .iter()
        .map(|r| {
            let i = push(NodeKind::Reference, clean_text(&r.title), Some(r.ref_id.clone()));
            (r.ref_id.as_str(), i)
        })
        .collect();

    let mut edges = Vec::new();
    if let Some(a) = abstract_node {
        edges.push(match cfg.abstract_edge {
            AbstractEdge::AbstractToTitle => (a, title),
            AbstractEdge::TitleToAbstract => (title, a),
        });
    }
    for r in &entry.references {
        let node = ref_nodes[r.ref_id.as_str()];
        edges.push((node, title));
        edges.push((title, node));
    }
    for (chunk, &c) in chunks.iter().zip(&chunk_nodes) {
        let cited: BTreeSet<usize> = chunk
            .markers
            .iter()
            .filter_map(|k| link.ref_for(k))
            .filter_map(|r| ref_nodes.get(r).copied())
            .collect();
        for r in cited {
            edges.push(match cfg.citation_edge {
                CitationEdge::ChunkToReference => (c, r),
                CitationEdge::ReferenceToChunk => (r, c),
            });
        }
    }

    PaperGraph {
        paper_id: entry.paper_id.clone(),
        nodes,
        edges,
    }
}

/// Adjacency with `A[dst][src] = 1` for every directed edge.
pub fn to_adjacency(graph: &PaperGraph) -> Adjacency {
    Adjacency::from_edges(graph.len(), graph.edges.iter().copied())
}
