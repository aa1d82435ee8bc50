//! Joins TEI bibliography entries to manifest references by title.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use super::manifest::DatasetEntry;
use super::tei::TeiDocument;

/// Minimum token-set Jaccard similarity for a fuzzy title match.
pub const JACCARD_THRESHOLD: f64 = 0.8;

/// A shorter title must have at least this many tokens to match by containment.
pub const MIN_CONTAINED_TOKENS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Jaccard,
    Containment,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchScore {
    pub kind: MatchKind,
    pub jaccard: f64,
}

impl MatchScore {
    fn cmp_strength(&self, other: &Self) -> Ordering {
        self.kind.cmp(&other.kind).then(self.jaccard.total_cmp(&other.jaccard))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkTie {
    pub ref_id: String,
    pub winner: String,
    pub losers: Vec<String>,
}

/// Partial injection from bibliography keys to manifest reference ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BibliographyLink {
    pub mapping: BTreeMap<String, String>,
    /// Bibliography keys with no match, in document order.
    pub unmatched: Vec<String>,
    pub ties: Vec<LinkTie>,
}

impl BibliographyLink {
    pub fn ref_for(&self, bib_key: &str) -> Option<&str> {
        self.mapping.get(bib_key).map(String::as_str)
    }

    pub fn from_pairs<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            mapping: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            ..Self::default()
        }
    }
}

/// Lowercased alphanumeric tokens of a title.
pub fn title_tokens(title: &str) -> Vec<String> {
    title
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Similarity of two titles, or `None` when they do not match.
pub fn match_titles(a: &str, b: &str) -> Option<MatchScore> {
    let ta = title_tokens(a);
    let tb = title_tokens(b);
    if ta.is_empty() || tb.is_empty() {
        return None;
    }
    let sa: HashSet<&str> = ta.iter().map(String::as_str).collect();
    let sb: HashSet<&str> = tb.iter().map(String::as_str).collect();
    let inter = sa.intersection(&sb).count() as f64;
    let jaccard = inter / sa.union(&sb).count() as f64;

    if ta.concat() == tb.concat() {
        return Some(MatchScore {
            kind: MatchKind::Exact,
            jaccard,
        });
    }
    let (short, long) = if ta.len() <= tb.len() { (&ta, &tb) } else { (&tb, &ta) };
    if short.len() >= MIN_CONTAINED_TOKENS && long.windows(short.len()).any(|w| w == short.as_slice()) {
        return Some(MatchScore {
            kind: MatchKind::Containment,
            jaccard,
        });
    }
    (jaccard >= JACCARD_THRESHOLD).then_some(MatchScore {
        kind: MatchKind::Jaccard,
        jaccard,
    })
}

/// Maps bibliography keys of `doc` to references of `entry`.
///
/// Candidate pairs are assigned greedily from strongest to weakest match
/// (exact, then containment, then Jaccard, then higher Jaccard); among
/// equal-strength candidates the lexicographically smaller bib key wins and
/// the tie is recorded.
pub fn link_bibliography(doc: &TeiDocument, entry: &DatasetEntry) -> BibliographyLink {
    struct Candidate<'a> {
        bib_key: &'a str,
        ref_pos: usize,
        score: MatchScore,
    }

    let mut candidates = Vec::new();
    for bib in &doc.bibliography {
        for (ref_pos, reference) in entry.references.iter().enumerate() {
            if let Some(score) = match_titles(&bib.raw_title, &reference.title) {
                candidates.push(Candidate {
                    bib_key: &bib.bib_key,
                    ref_pos,
                    score,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .cmp_strength(&a.score)
            .then_with(|| a.bib_key.cmp(b.bib_key))
            .then(a.ref_pos.cmp(&b.ref_pos))
    });

    let mut link = BibliographyLink::default();
    let mut used_refs = BTreeSet::new();
    let mut winners: BTreeMap<usize, (&str, MatchScore)> = BTreeMap::new();
    for c in &candidates {
        if link.mapping.contains_key(c.bib_key) {
            continue;
        }
        if used_refs.contains(&c.ref_pos) {
            let (winner, score) = winners[&c.ref_pos];
            if score.cmp_strength(&c.score) == Ordering::Equal {
                let ref_id = &entry.references[c.ref_pos].ref_id;
                match link.ties.iter_mut().find(|t| &t.ref_id == ref_id) {
                    Some(tie) => tie.losers.push(c.bib_key.to_string()),
                    None => link.ties.push(LinkTie {
                        ref_id: ref_id.clone(),
                        winner: winner.to_string(),
                        losers: vec![c.bib_key.to_string()],
                    }),
                }
            }
            continue;
        }
        used_refs.insert(c.ref_pos);
        winners.insert(c.ref_pos, (c.bib_key, c.score));
        link.mapping
            .insert(c.bib_key.to_string(), entry.references[c.ref_pos].ref_id.clone());
    }
    for tie in &link.ties {
        log::info!(
            "paper {}: bib keys {:?} tie for {}, kept {}",
            entry.paper_id,
            tie.losers,
            tie.ref_id,
            tie.winner
        );
    }
    link.unmatched = doc
        .bibliography
        .iter()
        .filter(|b| !link.mapping.contains_key(&b.bib_key))
        .map(|b| b.bib_key.clone())
        .collect();
    link
}
