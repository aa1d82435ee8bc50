//! Citation context extraction: locate every occurrence of a reference,
//! mask the other citations, window the text around the target, merge the
//! occurrences and emit one classification record per reference.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{BibliographyLink, DatasetEntry, TeiDocument};
use crate::error::{Error, Result};
use crate::text::{
    byte_to_char, char_to_byte, clean_text, CleanTextBuilder, SentenceSegmenter, CITATION_PLACEHOLDER, TARGET_TOKEN,
};

/// Separator between the fields of a sequence-classification input.
pub const SEP: &str = " [SEP] ";

/// Prompt used when the citing paragraph has no section heading.
pub const UNTITLED_SECTION_PROMPT: &str = "[Body]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationInstance {
    pub ref_id: String,
    pub bib_key: String,
    pub section_index: usize,
    pub section_heading: String,
    /// Index of the paragraph within its section.
    pub paragraph_index: usize,
    pub marker_span: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    Semantic,
    Absolute,
}

impl fmt::Display for TruncationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruncationMode::Semantic => "semantic",
            TruncationMode::Absolute => "absolute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Source,
    NonSource,
    Unknown,
}

impl Label {
    pub fn for_reference(entry: &DatasetEntry, ref_id: &str) -> Self {
        match (entry.labels_present, entry.is_source(ref_id)) {
            (false, _) => Label::Unknown,
            (true, true) => Label::Source,
            (true, false) => Label::NonSource,
        }
    }

    /// `1`, `0` or `-` as written in record files.
    pub fn as_field(self) -> &'static str {
        match self {
            Label::Source => "1",
            Label::NonSource => "0",
            Label::Unknown => "-",
        }
    }
}

/// Window sizes for the two truncation strategies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextParams {
    pub window_sentences: usize,
    pub chars_before: usize,
    pub chars_after: usize,
    pub segmenter: SentenceSegmenter,
}

impl Default for ContextParams {
    fn default() -> Self {
        Self {
            window_sentences: 1,
            chars_before: 200,
            chars_after: 200,
            segmenter: SentenceSegmenter::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextRecord {
    pub paper_id: String,
    pub ref_id: String,
    pub paper_title: String,
    pub ref_title: String,
    pub section_prompt: String,
    pub context: String,
    pub truncation_mode: TruncationMode,
    pub label: Label,
    pub instance_count: usize,
}

impl ContextRecord {
    /// True when the reference is never cited in the body.
    pub fn is_empty(&self) -> bool {
        self.instance_count == 0
    }

    pub fn to_sequence(&self) -> SequenceRecord {
        let input_text = format!(
            "{}{SEP}{}{SEP}{} {}",
            self.paper_title, self.ref_title, self.section_prompt, self.context
        );
        SequenceRecord {
            paper_id: self.paper_id.clone(),
            ref_id: self.ref_id.clone(),
            label: self.label,
            input_text: input_text.trim_end().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    pub paper_id: String,
    pub ref_id: String,
    pub label: Label,
    pub input_text: String,
}

impl SequenceRecord {
    /// Tab-separated line without the trailing newline.
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.paper_id,
            self.ref_id,
            self.label.as_field(),
            self.input_text
        )
    }
}

/// Every marker in `doc` whose bib key links to `target`, in document order.
pub fn find_instances(doc: &TeiDocument, link: &BibliographyLink, target: &str) -> Vec<CitationInstance> {
    let mut out = Vec::new();
    for (si, section) in doc.sections.iter().enumerate() {
        for (pi, para) in section.paragraphs.iter().enumerate() {
            for m in &para.markers {
                if link.ref_for(&m.bib_key) == Some(target) {
                    out.push(CitationInstance {
                        ref_id: target.to_string(),
                        bib_key: m.bib_key.clone(),
                        section_index: si,
                        section_heading: section.heading.clone(),
                        paragraph_index: pi,
                        marker_span: m.span,
                    });
                }
            }
        }
    }
    out
}

/// Deletes every citation placeholder except the one at `keep_span`, which
/// becomes [`TARGET_TOKEN`].
pub fn mask_other_refs(paragraph_text: &str, keep_span: (usize, usize)) -> Result<String> {
    mask_with_anchor(paragraph_text, keep_span).map(|(text, _)| text)
}

/// Like [`mask_other_refs`], also returning the character offset of the
/// target token in the masked text.
pub fn mask_with_anchor(paragraph_text: &str, keep_span: (usize, usize)) -> Result<(String, usize)> {
    let (start, end) = keep_span;
    let start_b = char_to_byte(paragraph_text, start);
    let end_b = char_to_byte(paragraph_text, end);
    if start >= end || paragraph_text.get(start_b..end_b) != Some(CITATION_PLACEHOLDER) {
        return Err(Error::Contract(format!(
            "span {keep_span:?} does not address a citation placeholder"
        )));
    }
    let mut builder = CleanTextBuilder::default();
    let mut anchor = 0;
    let mut rest = 0;
    for (pos, _) in paragraph_text.match_indices(CITATION_PLACEHOLDER) {
        builder.push_str(&paragraph_text[rest..pos]);
        if pos == start_b {
            anchor = builder.push_token(TARGET_TOKEN).0;
        }
        rest = pos + CITATION_PLACEHOLDER.len();
    }
    builder.push_str(&paragraph_text[rest..]);
    Ok((builder.finish(), anchor))
}

/// The sentence containing character offset `anchor` plus up to
/// `window_sentences` whole sentences on each side.
pub fn truncate_semantic(
    paragraph_text: &str,
    anchor: usize,
    window_sentences: usize,
    segmenter: &SentenceSegmenter,
) -> String {
    let sentences = segmenter.split(paragraph_text);
    if sentences.is_empty() {
        return String::new();
    }
    let anchor_b = char_to_byte(paragraph_text, anchor);
    let hit = sentences
        .iter()
        .position(|s| s.end > anchor_b)
        .unwrap_or(sentences.len() - 1);
    let first = hit.saturating_sub(window_sentences);
    let last = (hit + window_sentences).min(sentences.len() - 1);
    paragraph_text[sentences[first].start..sentences[last].end].to_string()
}

/// Characters `[anchor - before, anchor + after)`, clipped to the text and
/// widened so that no [`TARGET_TOKEN`] is cut and the token at `anchor`, if
/// any, is included.
pub fn truncate_absolute(paragraph_text: &str, anchor: usize, before: usize, after: usize) -> String {
    let len = paragraph_text.chars().count();
    let mut lo = anchor.saturating_sub(before).min(len);
    let mut hi = anchor.saturating_add(after).min(len);
    let token_len = TARGET_TOKEN.chars().count();
    for (pos, _) in paragraph_text.match_indices(TARGET_TOKEN) {
        let ts = byte_to_char(paragraph_text, pos);
        let te = ts + token_len;
        let overlaps = ts < hi && te > lo;
        let at_anchor = ts <= anchor && anchor < te;
        if overlaps || at_anchor {
            lo = lo.min(ts);
            hi = hi.max(te);
        }
    }
    let lo_b = char_to_byte(paragraph_text, lo);
    let hi_b = char_to_byte(paragraph_text, hi);
    paragraph_text[lo_b..hi_b].to_string()
}

/// Bracketed section hint such as `[Introduction]`. Leading section numbers
/// ("2.1", "IV.") are dropped.
pub fn section_prompt(heading: &str) -> String {
    let cleaned = clean_text(heading).replace(['[', ']'], "");
    let mut words: Vec<&str> = cleaned.split_whitespace().collect();
    if words.len() > 1 && is_section_number(words[0]) {
        words.remove(0);
    }
    let name = words.join(" ");
    if name.is_empty() {
        UNTITLED_SECTION_PROMPT.to_string()
    } else {
        format!("[{name}]")
    }
}

fn is_section_number(word: &str) -> bool {
    let w = word.trim_end_matches('.');
    !w.is_empty()
        && (w
            .split('.')
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
            || (word.ends_with('.') && w.chars().all(|c| "IVXLC".contains(c))))
}

/// Builds the merged context record for `target` under one truncation mode.
pub fn assemble_context(
    doc: &TeiDocument,
    link: &BibliographyLink,
    entry: &DatasetEntry,
    target: &str,
    mode: TruncationMode,
    params: &ContextParams,
) -> Result<ContextRecord> {
    let instances = find_instances(doc, link, target);
    let mut fragments = Vec::with_capacity(instances.len());
    for inst in &instances {
        let para = &doc.sections[inst.section_index].paragraphs[inst.paragraph_index];
        let (masked, anchor) = mask_with_anchor(&para.text, inst.marker_span)?;
        let window = match mode {
            TruncationMode::Semantic => truncate_semantic(&masked, anchor, params.window_sentences, &params.segmenter),
            TruncationMode::Absolute => truncate_absolute(&masked, anchor, params.chars_before, params.chars_after),
        };
        fragments.push(clean_text(&window));
    }
    let section_prompt = instances
        .first()
        .map(|i| section_prompt(&i.section_heading))
        .unwrap_or_default();
    let ref_title = entry
        .reference(target)
        .map(|r| clean_text(&r.title))
        .unwrap_or_default();
    Ok(ContextRecord {
        paper_id: entry.paper_id.clone(),
        ref_id: target.to_string(),
        paper_title: clean_text(&entry.title),
        ref_title,
        section_prompt,
        context: fragments.join(" "),
        truncation_mode: mode,
        label: Label::for_reference(entry, target),
        instance_count: instances.len(),
    })
}

/// Records for every manifest reference of `entry`, in manifest order.
pub fn assemble_all(
    doc: &TeiDocument,
    link: &BibliographyLink,
    entry: &DatasetEntry,
    mode: TruncationMode,
    params: &ContextParams,
) -> Result<Vec<ContextRecord>> {
    entry
        .references
        .iter()
        .map(|r| assemble_context(doc, link, entry, &r.ref_id, mode, params))
        .collect()
}

/// Writes records sorted by (paper_id, ref_id), one tab-separated line each.
pub fn write_sequence_records<W: Write>(records: &[ContextRecord], mut out: W) -> std::io::Result<usize> {
    let mut sorted: Vec<&ContextRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.paper_id, &a.ref_id).cmp(&(&b.paper_id, &b.ref_id)));
    for r in &sorted {
        writeln!(out, "{}", r.to_sequence().to_line())?;
    }
    out.flush()?;
    Ok(sorted.len())
}

pub fn emit_sequence_records(records: &[ContextRecord], path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_sequence_records(records, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
