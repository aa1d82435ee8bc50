use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub ref_id: String,
    pub title: String,
}

/// One paper of the dataset manifest with its ordered reference list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub paper_id: String,
    pub title: String,
    pub references: Vec<Reference>,
    pub source_labels: BTreeSet<String>,
    /// False when the manifest carried no `source_labels` for this paper.
    pub labels_present: bool,
}

impl DatasetEntry {
    pub fn is_source(&self, ref_id: &str) -> bool {
        self.source_labels.contains(ref_id)
    }

    pub fn reference(&self, ref_id: &str) -> Option<&Reference> {
        self.references.iter().find(|r| r.ref_id == ref_id)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    paper_id: String,
    title: String,
    references: Vec<Reference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_labels: Option<Vec<String>>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<DatasetEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, &path.display().to_string())
}

/// Parses manifest JSON; `locus` is used in error messages.
pub fn parse_manifest(json: &str, locus: &str) -> Result<Vec<DatasetEntry>> {
    let raw: Vec<RawEntry> = serde_json::from_str(json).map_err(|e| Error::json(locus, e))?;
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(raw.len());
    for r in raw {
        if !seen.insert(r.paper_id.clone()) {
            return Err(Error::Integrity(format!("duplicate paper_id {:?}", r.paper_id)));
        }
        let mut ref_ids = HashSet::new();
        for reference in &r.references {
            if !ref_ids.insert(reference.ref_id.as_str()) {
                return Err(Error::Integrity(format!(
                    "paper {:?}: duplicate ref_id {:?}",
                    r.paper_id, reference.ref_id
                )));
            }
        }
        let labels_present = r.source_labels.is_some();
        let source_labels: BTreeSet<String> = r.source_labels.unwrap_or_default().into_iter().collect();
        if let Some(bad) = source_labels.iter().find(|l| !ref_ids.contains(l.as_str())) {
            return Err(Error::Integrity(format!(
                "paper {:?}: source label {bad:?} is not one of its references",
                r.paper_id
            )));
        }
        entries.push(DatasetEntry {
            paper_id: r.paper_id,
            title: r.title,
            references: r.references,
            source_labels,
            labels_present,
        });
    }
    Ok(entries)
}

/// Serializes entries back to the manifest format.
pub fn manifest_to_json(entries: &[DatasetEntry]) -> String {
    let raw: Vec<RawEntry> = entries
        .iter()
        .map(|e| RawEntry {
            paper_id: e.paper_id.clone(),
            title: e.title.clone(),
            references: e.references.clone(),
            source_labels: e.labels_present.then(|| e.source_labels.iter().cloned().collect()),
        })
        .collect();
    serde_json::to_string_pretty(&raw).expect("manifest serialization is infallible")
}
