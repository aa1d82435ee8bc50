//! Dataset manifest loading, TEI parsing, and bibliography linking.

mod link;
mod manifest;
mod tei;

pub use link::{
    link_bibliography, match_titles, title_tokens, BibliographyLink, LinkTie, MatchKind, MatchScore, JACCARD_THRESHOLD,
    MIN_CONTAINED_TOKENS,
};
pub use manifest::{load_manifest, manifest_to_json, parse_manifest, DatasetEntry, Reference};
pub use tei::{parse_tei, BibEntry, CitationMarker, Paragraph, Section, TeiDocument};
