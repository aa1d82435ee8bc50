//! Batch commands over a run directory.
//!
//! Artifacts written to `work_dir`:
//!
//! | command     | files |
//! |-------------|-------|
//! | extract     | `records_semantic.tsv`, `records_absolute.tsv`, `extraction_report.json` |
//! | build-graph | `graphs.jsonl`, `embeddings.jsonl`, `graph_report.json` |
//! | train-gcn   | `split.json`, `checkpoint.json`, `loss_trace.csv`, `scores_gcn_val.json` |
//! | score       | `scores_gcn.json` |
//! | ensemble    | `scores_ensemble.json` (or a chosen path) |
//! | eval        | `eval_report.json` |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EmbedderConfig, RunConfig};
use crate::context::{assemble_all, emit_sequence_records, ContextRecord, TruncationMode};
use crate::corpus::{
    link_bibliography, load_manifest, parse_tei, BibliographyLink, DatasetEntry, LinkTie, TeiDocument,
};
use crate::embed::{embed_graphs, load_external_embeddings, EmbeddingTable};
use crate::error::{Error, Result};
use crate::gcn::{
    normalize_adjacency, train_graphs, write_loss_trace, Checkpoint, GraphSample, Matrix, NormalizedAdjacency,
};
use crate::graph::{build_graph, chunk_body, to_adjacency, PaperGraph};
use crate::scoring::{
    ensemble, import_score_table, labels_of, map_metric, per_paper_ap, predict_scores, read_score_table,
    split_train_val, ScoreTable, ScoringInput, SplitAssignment,
};
use crate::text::TARGET_TOKEN;

pub const RECORDS_SEMANTIC: &str = "records_semantic.tsv";
pub const RECORDS_ABSOLUTE: &str = "records_absolute.tsv";
pub const EXTRACTION_REPORT: &str = "extraction_report.json";
pub const GRAPHS: &str = "graphs.jsonl";
pub const EMBEDDINGS: &str = "embeddings.jsonl";
pub const GRAPH_REPORT: &str = "graph_report.json";
pub const SPLIT: &str = "split.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const LOSS_TRACE: &str = "loss_trace.csv";
pub const SCORES_GCN_VAL: &str = "scores_gcn_val.json";
pub const SCORES_GCN: &str = "scores_gcn.json";
pub const SCORES_ENSEMBLE: &str = "scores_ensemble.json";
pub const EVAL_REPORT: &str = "eval_report.json";

/// Tag of tables produced by the graph model.
pub const GCN_TAG: &str = "gcn";

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn work_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.work_dir.join(name)
}

fn ensure_work_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.work_dir).map_err(|e| Error::io(&cfg.work_dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("report serialization is infallible");
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Locates the TEI file of a paper: `<id>.xml`, then `<id>.tei.xml`.
pub fn tei_path(xml_dir: &Path, paper_id: &str) -> Option<PathBuf> {
    [format!("{paper_id}.xml"), format!("{paper_id}.tei.xml")]
        .into_iter()
        .map(|name| xml_dir.join(name))
        .find(|p| p.is_file())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPaper {
    pub paper_id: String,
    pub reason: String,
}

/// A parsed paper joined with its manifest entry.
#[derive(Debug, Clone)]
pub struct LoadedPaper {
    pub entry: DatasetEntry,
    pub doc: TeiDocument,
    pub link: BibliographyLink,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub entries: Vec<DatasetEntry>,
    /// Papers with a TEI file, in manifest order.
    pub papers: Vec<LoadedPaper>,
    pub skipped: Vec<SkippedPaper>,
}

/// Loads the manifest and parses every paper's TEI file on the worker pool.
pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    cfg.check_inputs()?;
    let entries = load_manifest(&cfg.manifest)?;
    let pool = pool(cfg)?;
    let parsed: Vec<std::result::Result<LoadedPaper, SkippedPaper>> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| {
                let Some(path) = tei_path(&cfg.xml_dir, &entry.paper_id) else {
                    return Ok(Err(SkippedPaper {
                        paper_id: entry.paper_id.clone(),
                        reason: "missing TEI file".into(),
                    }));
                };
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                let doc = parse_tei(&bytes).map_err(|e| Error::load(path.display().to_string(), e.to_string()))?;
                let link = link_bibliography(&doc, entry);
                Ok(Ok(LoadedPaper {
                    entry: entry.clone(),
                    doc,
                    link,
                }))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut papers = Vec::new();
    let mut skipped = Vec::new();
    for p in parsed {
        match p {
            Ok(p) => papers.push(p),
            Err(s) => {
                warn!("skipping paper {}: {}", s.paper_id, s.reason);
                skipped.push(s);
            }
        }
    }
    Ok(Corpus {
        entries,
        papers,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperExtraction {
    pub paper_id: String,
    pub markers: usize,
    pub unresolved_markers: usize,
    pub records: usize,
    /// Citation instances linked to a manifest reference.
    pub instances: usize,
    pub empty_contexts: usize,
    pub unmatched_bib_keys: Vec<String>,
    pub ties: Vec<TieReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieReport {
    pub ref_id: String,
    pub winner: String,
    pub losers: Vec<String>,
}

impl From<&LinkTie> for TieReport {
    fn from(t: &LinkTie) -> Self {
        Self {
            ref_id: t.ref_id.clone(),
            winner: t.winner.clone(),
            losers: t.losers.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub papers_in_manifest: usize,
    pub papers_extracted: usize,
    pub skipped: Vec<SkippedPaper>,
    pub records_per_mode: usize,
    pub markers: usize,
    pub instances: usize,
    pub target_tokens_semantic: usize,
    pub target_tokens_absolute: usize,
    pub papers: Vec<PaperExtraction>,
}

/// Context records for one paper in both truncation modes.
pub fn extract_paper(paper: &LoadedPaper, cfg: &RunConfig) -> Result<(Vec<ContextRecord>, Vec<ContextRecord>)> {
    let params = cfg.context.params();
    let semantic = assemble_all(&paper.doc, &paper.link, &paper.entry, TruncationMode::Semantic, &params)?;
    let absolute = assemble_all(&paper.doc, &paper.link, &paper.entry, TruncationMode::Absolute, &params)?;
    Ok((semantic, absolute))
}

fn count_targets(records: &[ContextRecord]) -> usize {
    records.iter().map(|r| r.context.matches(TARGET_TOKEN).count()).sum()
}

pub fn cmd_extract(cfg: &RunConfig) -> Result<ExtractionReport> {
    let corpus = load_corpus(cfg)?;
    ensure_work_dir(cfg)?;
    let pool = pool(cfg)?;
    let per_paper: Vec<(Vec<ContextRecord>, Vec<ContextRecord>)> = pool.install(|| {
        corpus
            .papers
            .par_iter()
            .map(|p| extract_paper(p, cfg))
            .collect::<Result<_>>()
    })?;

    let mut semantic = Vec::new();
    let mut absolute = Vec::new();
    let mut papers = Vec::new();
    for (paper, (sem, abs)) in corpus.papers.iter().zip(per_paper) {
        papers.push(PaperExtraction {
            paper_id: paper.entry.paper_id.clone(),
            markers: paper.doc.marker_count(),
            unresolved_markers: paper.doc.unresolved_markers,
            records: sem.len(),
            instances: sem.iter().map(|r| r.instance_count).sum(),
            empty_contexts: sem.iter().filter(|r| r.is_empty()).count(),
            unmatched_bib_keys: paper.link.unmatched.clone(),
            ties: paper.link.ties.iter().map(TieReport::from).collect(),
        });
        semantic.extend(sem);
        absolute.extend(abs);
    }
    emit_sequence_records(&semantic, work_path(cfg, RECORDS_SEMANTIC))?;
    emit_sequence_records(&absolute, work_path(cfg, RECORDS_ABSOLUTE))?;
    let report = ExtractionReport {
        papers_in_manifest: corpus.entries.len(),
        papers_extracted: corpus.papers.len(),
        skipped: corpus.skipped,
        records_per_mode: semantic.len(),
        markers: papers.iter().map(|p| p.markers).sum(),
        instances: papers.iter().map(|p| p.instances).sum(),
        target_tokens_semantic: count_targets(&semantic),
        target_tokens_absolute: count_targets(&absolute),
        papers,
    };
    write_json(&report, &work_path(cfg, EXTRACTION_REPORT))?;
    info!(
        "extracted {} records per mode from {} papers",
        report.records_per_mode, report.papers_extracted
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub graphs: usize,
    pub nodes: usize,
    pub edges: usize,
    pub skipped: Vec<SkippedPaper>,
    pub embedding_dim: usize,
    /// `"batch"` when document frequencies span all built graphs.
    pub idf_scope: String,
}

pub fn build_paper_graph(paper: &LoadedPaper, cfg: &RunConfig) -> PaperGraph {
    let seg = cfg.context.segmenter();
    let chunks = chunk_body(&paper.doc, &cfg.chunking, &seg);
    build_graph(&paper.doc, &paper.link, &paper.entry, &chunks, &cfg.graph)
}

pub fn write_graphs(graphs: &[PaperGraph], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for g in graphs {
        serde_json::to_writer(&mut out, g).map_err(|e| Error::json(path.display().to_string(), e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_graphs(path: &Path) -> Result<Vec<PaperGraph>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut graphs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        graphs.push(PaperGraph::from_json(&line, &format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(graphs)
}

/// Builds graphs for every paper and embeds their nodes.
pub fn build_all(cfg: &RunConfig) -> Result<(Vec<PaperGraph>, EmbeddingTable, Vec<SkippedPaper>)> {
    let corpus = load_corpus(cfg)?;
    let pool = pool(cfg)?;
    let graphs: Vec<PaperGraph> =
        pool.install(|| corpus.papers.par_iter().map(|p| build_paper_graph(p, cfg)).collect());
    let table = match &cfg.embedder {
        EmbedderConfig::Builtin { dim, seed } => embed_graphs(&graphs, *dim, *seed)?,
        EmbedderConfig::External { path, dim } => {
            let table = load_external_embeddings(path, *dim)?;
            for g in &graphs {
                for n in &g.nodes {
                    table.get(&g.paper_id, n.index)?;
                }
            }
            table
        }
    };
    Ok((graphs, table, corpus.skipped))
}

pub fn cmd_build_graph(cfg: &RunConfig) -> Result<GraphReport> {
    let (graphs, table, skipped) = build_all(cfg)?;
    ensure_work_dir(cfg)?;
    write_graphs(&graphs, &work_path(cfg, GRAPHS))?;
    table.write(work_path(cfg, EMBEDDINGS))?;
    let report = GraphReport {
        graphs: graphs.len(),
        nodes: graphs.iter().map(PaperGraph::len).sum(),
        edges: graphs.iter().map(|g| g.edges.len()).sum(),
        skipped,
        embedding_dim: table.dim(),
        idf_scope: match cfg.embedder {
            EmbedderConfig::Builtin { .. } => "batch".into(),
            EmbedderConfig::External { .. } => "external".into(),
        },
    };
    write_json(&report, &work_path(cfg, GRAPH_REPORT))?;
    info!("built {} graphs with {} nodes", report.graphs, report.nodes);
    Ok(report)
}

/// A graph with its normalized adjacency and features.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub graph: PaperGraph,
    pub adjacency: NormalizedAdjacency,
    pub features: Matrix,
}

impl PreparedGraph {
    pub fn scoring_input(&self) -> ScoringInput<'_> {
        ScoringInput {
            graph: &self.graph,
            adjacency: &self.adjacency,
            features: &self.features,
        }
    }
}

/// Reads the build-graph artifacts back.
pub fn load_prepared(cfg: &RunConfig, self_loops: bool) -> Result<Vec<PreparedGraph>> {
    let graphs = read_graphs(&work_path(cfg, GRAPHS))?;
    let table = EmbeddingTable::read_jsonl(
        BufReader::new(
            std::fs::File::open(work_path(cfg, EMBEDDINGS)).map_err(|e| Error::io(work_path(cfg, EMBEDDINGS), e))?,
        ),
        cfg.embedder.dim(),
        &work_path(cfg, EMBEDDINGS).display().to_string(),
    )?;
    let pool = pool(cfg)?;
    pool.install(|| {
        graphs
            .into_par_iter()
            .map(|graph| {
                graph.validate()?;
                let adjacency = normalize_adjacency(&to_adjacency(&graph), self_loops);
                let features = table.features_for(&graph)?;
                Ok(PreparedGraph {
                    graph,
                    adjacency,
                    features,
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_papers: usize,
    pub val_papers: usize,
    pub labeled_nodes: usize,
    pub epochs: usize,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub val_map: Option<f64>,
}

fn node_labels(graph: &PaperGraph, entry: &DatasetEntry) -> (Vec<f64>, Vec<usize>) {
    let mut labels = vec![0.0; graph.len()];
    let mut mask = Vec::new();
    for (i, ref_id) in graph.reference_ids() {
        mask.push(i);
        if entry.is_source(ref_id) {
            labels[i] = 1.0;
        }
    }
    (labels, mask)
}

/// Splits the labeled papers that have graphs, trains on the training
/// side and scores the validation side.
pub fn cmd_train_gcn(cfg: &RunConfig) -> Result<TrainReport> {
    cfg.check_inputs()?;
    let entries = load_manifest(&cfg.manifest)?;
    let prepared = load_prepared(cfg, cfg.gcn.self_loops)?;
    let by_id: BTreeMap<&str, &PreparedGraph> = prepared.iter().map(|p| (p.graph.paper_id.as_str(), p)).collect();
    let with_graph: Vec<DatasetEntry> = entries
        .iter()
        .filter(|e| by_id.contains_key(e.paper_id.as_str()))
        .cloned()
        .collect();
    let split = split_train_val(&with_graph, cfg.split.ratio, cfg.split.seed)?;
    write_json(&split, &work_path(cfg, SPLIT))?;

    let train_set: Vec<(&PreparedGraph, Vec<f64>, Vec<usize>)> = with_graph
        .iter()
        .filter(|e| split.train.contains(&e.paper_id))
        .map(|e| {
            let p = by_id[e.paper_id.as_str()];
            let (labels, mask) = node_labels(&p.graph, e);
            (p, labels, mask)
        })
        .collect();
    let samples: Vec<GraphSample<'_>> = train_set
        .iter()
        .map(|(p, labels, mask)| GraphSample {
            adjacency: &p.adjacency,
            features: &p.features,
            labels,
            mask,
        })
        .collect();
    let model_cfg = cfg.gcn.model_config(cfg.embedder.dim());
    let pool = pool(cfg)?;
    let out = pool.install(|| train_graphs(&model_cfg, &samples))?;
    Checkpoint::new(&out.model, &model_cfg).write(work_path(cfg, CHECKPOINT))?;
    write_loss_trace(&out.loss_trace, work_path(cfg, LOSS_TRACE))?;

    let val_inputs: Vec<ScoringInput<'_>> = with_graph
        .iter()
        .filter(|e| split.val.contains(&e.paper_id))
        .map(|e| by_id[e.paper_id.as_str()].scoring_input())
        .collect();
    let val_table = predict_scores(&out.model, &val_inputs, GCN_TAG)?;
    val_table.write(work_path(cfg, SCORES_GCN_VAL))?;
    let labels = labels_of(&entries, Some(&split.val));
    let val_map = map_metric(&val_table, &labels).ok();
    let report = TrainReport {
        train_papers: split.train.len(),
        val_papers: split.val.len(),
        labeled_nodes: samples.iter().map(|s| s.mask.len()).sum(),
        epochs: model_cfg.epochs,
        initial_loss: out.loss_trace.first().copied(),
        final_loss: out.loss_trace.last().copied(),
        val_map,
    };
    info!(
        "trained on {} papers; final loss {:?}; val MAP {:?}",
        report.train_papers, report.final_loss, report.val_map
    );
    Ok(report)
}

/// Scores every built graph with the saved checkpoint.
pub fn cmd_score(cfg: &RunConfig, out: Option<&Path>) -> Result<ScoreTable> {
    let ck = Checkpoint::read(work_path(cfg, CHECKPOINT))?;
    let model = ck.model()?;
    if ck.layer_dims.first() != Some(&cfg.embedder.dim()) {
        return Err(Error::Contract(format!(
            "checkpoint input width {:?} does not match embedding dim {}",
            ck.layer_dims.first(),
            cfg.embedder.dim()
        )));
    }
    let prepared = load_prepared(cfg, ck.self_loops)?;
    let inputs: Vec<ScoringInput<'_>> = prepared.iter().map(PreparedGraph::scoring_input).collect();
    let table = predict_scores(&model, &inputs, GCN_TAG)?;
    let path = out.map_or_else(|| work_path(cfg, SCORES_GCN), Path::to_path_buf);
    table.write(&path)?;
    info!(
        "scored {} references in {} papers",
        table.len(),
        table.paper_ids().len()
    );
    Ok(table)
}

/// A score-table file, optionally retagged on import.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableInput {
    pub path: PathBuf,
    pub tag: Option<String>,
}

impl TableInput {
    /// Parses `path` or `tag=path`.
    pub fn parse(spec: &str) -> Self {
        match spec.split_once('=') {
            Some((tag, path)) if !tag.is_empty() && !tag.contains(['/', '\\']) => Self {
                path: path.into(),
                tag: Some(tag.into()),
            },
            _ => Self {
                path: spec.into(),
                tag: None,
            },
        }
    }

    pub fn load(&self) -> Result<ScoreTable> {
        match &self.tag {
            Some(tag) => import_score_table(&self.path, tag),
            None => read_score_table(&self.path),
        }
    }
}

pub fn cmd_ensemble(cfg: &RunConfig, inputs: &[TableInput], out: Option<&Path>) -> Result<ScoreTable> {
    let tables: Vec<ScoreTable> = inputs.iter().map(TableInput::load).collect::<Result<_>>()?;
    let table = ensemble(&tables, cfg.ensemble.weights.as_deref(), cfg.ensemble.method)?;
    ensure_work_dir(cfg)?;
    let path = out.map_or_else(|| work_path(cfg, SCORES_ENSEMBLE), Path::to_path_buf);
    table.write(&path)?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub tag: String,
    pub map: f64,
    pub papers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `"val"` when a split file restricted the labeled papers, else `"all"`.
    pub scope: String,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.tag.len()).max().unwrap_or(3).max(3);
        let mut s = format!(
            "scope: {}\n{:<width$}  {:>8}  {:>6}\n",
            self.scope, "tag", "MAP", "papers"
        );
        for r in &self.rows {
            writeln!(s, "{:<width$}  {:>8.4}  {:>6}", r.tag, r.map, r.papers).unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalOptions {
    /// Add a row for the ensemble of all tables.
    pub ensemble: bool,
    /// Add a row for uniformly random scores with this seed.
    pub random_baseline: Option<u64>,
    /// Ignore `split.json` and evaluate every labeled paper.
    pub all_papers: bool,
}

fn eval_row(table: &ScoreTable, labels: &BTreeMap<String, BTreeSet<String>>) -> Result<EvalRow> {
    let aps = per_paper_ap(table, labels)?;
    let map = map_metric(table, labels)?;
    Ok(EvalRow {
        tag: table.tag.clone(),
        map,
        papers: aps.len(),
    })
}

/// MAP per table (plus ensemble and baseline rows on request).
pub fn cmd_eval(cfg: &RunConfig, inputs: &[TableInput], opts: &EvalOptions) -> Result<EvalReport> {
    if inputs.is_empty() {
        return Err(Error::Config("eval needs at least one score table".into()));
    }
    let entries = load_manifest(&cfg.manifest)?;
    let split_path = work_path(cfg, SPLIT);
    let (scope, papers) = if !opts.all_papers && split_path.is_file() {
        let json = std::fs::read_to_string(&split_path).map_err(|e| Error::io(&split_path, e))?;
        let split: SplitAssignment =
            serde_json::from_str(&json).map_err(|e| Error::json(split_path.display().to_string(), e))?;
        ("val".to_string(), Some(split.val))
    } else {
        ("all".to_string(), None)
    };
    let labels = labels_of(&entries, papers.as_ref());
    let tables: Vec<ScoreTable> = inputs.iter().map(TableInput::load).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for t in &tables {
        t.check_against(&entries)?;
        rows.push(eval_row(t, &labels)?);
    }
    if opts.ensemble {
        let e = ensemble(&tables, cfg.ensemble.weights.as_deref(), cfg.ensemble.method)?;
        rows.push(eval_row(&e, &labels)?);
    }
    if let Some(seed) = opts.random_baseline {
        rows.push(eval_row(&tables[0].random_like(seed, "random"), &labels)?);
    }
    let report = EvalReport { scope, rows };
    ensure_work_dir(cfg)?;
    write_json(&report, &work_path(cfg, EVAL_REPORT))?;
    Ok(report)
}
