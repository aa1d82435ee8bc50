//! Run configuration: one JSON file per run, every section optional except
//! the three paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::context::ContextParams;
use crate::embed::{DEFAULT_EMBEDDING_DIM, MAX_EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::gcn::{InitScheme, ModelConfig, DEFAULT_HIDDEN};
use crate::graph::{ChunkingConfig, GraphConfig};
use crate::scoring::{EnsembleMethod, DEFAULT_TRAIN_RATIO};
use crate::text::{SentenceSegmenter, DEFAULT_ABBREVIATIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub xml_dir: PathBuf,
    pub work_dir: PathBuf,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default)]
    pub chunking: ChunkingConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub gcn: GcnConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    /// Worker threads for per-paper stages; `None` uses one per core.
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    pub window_sentences: usize,
    pub chars_before: usize,
    pub chars_after: usize,
    pub abbreviations: Vec<String>,
}

impl Default for ContextConfig {
    fn default() -> Self {
        let p = ContextParams::default();
        Self {
            window_sentences: p.window_sentences,
            chars_before: p.chars_before,
            chars_after: p.chars_after,
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ContextConfig {
    pub fn segmenter(&self) -> SentenceSegmenter {
        SentenceSegmenter::new(&self.abbreviations)
    }

    pub fn params(&self) -> ContextParams {
        ContextParams {
            window_sentences: self.window_sentences,
            chars_before: self.chars_before,
            chars_after: self.chars_after,
            segmenter: self.segmenter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Builtin {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Precomputed vectors in the embedding JSON Lines format.
    External { path: PathBuf, dim: usize },
}

fn default_dim() -> usize {
    DEFAULT_EMBEDDING_DIM
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Builtin {
            dim: DEFAULT_EMBEDDING_DIM,
            seed: 0,
        }
    }
}

impl EmbedderConfig {
    pub fn dim(&self) -> usize {
        match self {
            EmbedderConfig::Builtin { dim, .. } | EmbedderConfig::External { dim, .. } => *dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub self_loops: bool,
    pub init: InitScheme,
}

impl Default for GcnConfig {
    fn default() -> Self {
        let m = ModelConfig::two_layer(1);
        Self {
            hidden: vec![DEFAULT_HIDDEN],
            epochs: m.epochs,
            learning_rate: m.learning_rate,
            seed: m.seed,
            self_loops: m.self_loops,
            init: m.init,
        }
    }
}

impl GcnConfig {
    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        let mut m = ModelConfig::with_hidden(input_dim, &self.hidden);
        m.epochs = self.epochs;
        m.learning_rate = self.learning_rate;
        m.seed = self.seed;
        m.self_loops = self.self_loops;
        m.init = self.init;
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub seed: u64,
    pub ratio: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            ratio: DEFAULT_TRAIN_RATIO,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub weights: Option<Vec<f64>>,
    pub method: EnsembleMethod,
}

impl RunConfig {
    /// Config with default sections for the given paths.
    pub fn new(manifest: impl Into<PathBuf>, xml_dir: impl Into<PathBuf>, work_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            xml_dir: xml_dir.into(),
            work_dir: work_dir.into(),
            context: ContextConfig::default(),
            chunking: ChunkingConfig::default(),
            graph: GraphConfig::default(),
            embedder: EmbedderConfig::default(),
            gcn: GcnConfig::default(),
            split: SplitConfig::default(),
            ensemble: EnsembleConfig::default(),
            workers: None,
        }
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&json).map_err(|e| Error::json(path.display().to_string(), e))?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.xml_dir);
        fix(&mut self.work_dir);
        if let EmbedderConfig::External { path, .. } = &mut self.embedder {
            fix(path);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks numeric parameters.
    pub fn validate(&self) -> Result<()> {
        self.chunking.validate()?;
        let dim = self.embedder.dim();
        if dim == 0 || dim > MAX_EMBEDDING_DIM {
            return Err(Error::Config(format!(
                "embedding dim {dim} outside 1..={MAX_EMBEDDING_DIM}"
            )));
        }
        self.gcn.model_config(dim).validate()?;
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return Err(Error::Config(format!(
                "split ratio {} outside (0, 1)",
                self.split.ratio
            )));
        }
        if let Some(w) = &self.ensemble.weights {
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config(format!("bad ensemble weights {w:?}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks that the input paths exist.
    pub fn check_inputs(&self) -> Result<()> {
        if !self.manifest.is_file() {
            return Err(Error::Config(format!("manifest {} not found", self.manifest.display())));
        }
        if !self.xml_dir.is_dir() {
            return Err(Error::Config(format!("xml_dir {} not found", self.xml_dir.display())));
        }
        if let EmbedderConfig::External { path, .. } = &self.embedder {
            if !path.is_file() {
                return Err(Error::Config(format!("embedding file {} not found", path.display())));
            }
        }
        Ok(())
    }
}
