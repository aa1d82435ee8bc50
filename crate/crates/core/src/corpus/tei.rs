//! Reader for the subset of Grobid TEI XML used by the pipeline.
//!
//! Consumed elements:
//! - `teiHeader/fileDesc/titleStmt/title` (first one) as the paper title
//! - `teiHeader/profileDesc/abstract` (all text) as the abstract
//! - `text/body/div` sections with `head` and `p` children
//! - inline `ref type="bibr" target="#key"` markers inside body paragraphs
//! - `biblStruct` entries under `text` keyed by `xml:id`, titled by
//!   `analytic/title` or, failing that, `monogr/title`
//!
//! Everything else is ignored. Paragraphs inside `figure`, `table` and
//! `note` are skipped.

use std::collections::HashSet;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{CleanTextBuilder, CITATION_PLACEHOLDER};

/// Inline citation marker; `span` is a half-open character range into the
/// owning paragraph's text and always covers a [`CITATION_PLACEHOLDER`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationMarker {
    pub bib_key: String,
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub text: String,
    pub markers: Vec<CitationMarker>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibEntry {
    pub bib_key: String,
    pub raw_title: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeiDocument {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub sections: Vec<Section>,
    pub bibliography: Vec<BibEntry>,
    /// Inline `bibr` references without a usable target; dropped from text.
    #[serde(default)]
    pub unresolved_markers: usize,
}

impl TeiDocument {
    pub fn paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.sections.iter().flat_map(|s| s.paragraphs.iter())
    }

    pub fn marker_count(&self) -> usize {
        self.paragraphs().map(|p| p.markers.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("document serialization is infallible")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::json("document", e))
    }
}

/// Parses a TEI XML document.
pub fn parse_tei(xml: &[u8]) -> Result<TeiDocument> {
    let mut reader = Reader::from_reader(xml);
    let mut state = ParseState::default();
    let mut buf = Vec::new();
    let mut saw_root = false;
    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::Xml(format!("at byte {}: {e}", reader.error_position())))?;
        match event {
            Event::Start(e) => {
                saw_root = true;
                let name = local_name(&e);
                state.open(&name, &e, false)?;
                state.stack.push(name);
            }
            Event::Empty(e) => {
                saw_root = true;
                let name = local_name(&e);
                state.open(&name, &e, true)?;
            }
            Event::End(_) => {
                let name = state.stack.pop().unwrap_or_default();
                state.close(&name);
            }
            Event::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|e| Error::Xml(format!("at byte {}: {e}", reader.buffer_position())))?;
                state.text(&text);
            }
            Event::CData(c) => {
                let bytes = c.into_inner();
                state.text(&String::from_utf8_lossy(&bytes));
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !saw_root {
        return Err(Error::Xml("document has no root element".into()));
    }
    if !state.stack.is_empty() {
        return Err(Error::Xml(format!(
            "unclosed element <{}>",
            state.stack.last().unwrap()
        )));
    }
    Ok(state.finish())
}

fn local_name(e: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(e.local_name().as_ref()).into_owned()
}

fn attr(e: &BytesStart<'_>, key: &str) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| Error::Xml(err.to_string()))?;
        if a.key.as_ref() == key.as_bytes() {
            let v = a.unescape_value().map_err(|err| Error::Xml(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

/// A text capture that ends when the element at `depth` closes.
#[derive(Debug)]
struct Capture {
    depth: usize,
    builder: CleanTextBuilder,
}

impl Capture {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            builder: CleanTextBuilder::default(),
        }
    }
}

#[derive(Debug)]
struct OpenParagraph {
    capture: Capture,
    markers: Vec<CitationMarker>,
}

#[derive(Debug)]
struct OpenBibl {
    depth: usize,
    key: Option<String>,
    analytic: Option<Capture>,
    monogr: Option<Capture>,
    analytic_title: Option<String>,
    monogr_title: Option<String>,
}

#[derive(Debug, Default)]
struct ParseState {
    stack: Vec<String>,
    title: Option<String>,
    title_capture: Option<Capture>,
    abstract_text: Option<String>,
    abstract_capture: Option<Capture>,
    sections: Vec<Section>,
    /// Indices into `sections` of the open `div`s, innermost last.
    div_sections: Vec<usize>,
    head: Option<(usize, Capture)>,
    paragraph: Option<OpenParagraph>,
    /// Depth of a `bibr` ref whose text is being suppressed.
    skip_depth: Option<usize>,
    bibl: Option<OpenBibl>,
    bibliography: Vec<BibEntry>,
    bib_keys: HashSet<String>,
    unresolved_markers: usize,
}

const BLOCK_ELEMENTS: &[&str] = &["p", "div", "head", "s", "lb", "item", "list"];

impl ParseState {
    fn has(&self, name: &str) -> bool {
        self.stack.iter().any(|n| n == name)
    }

    fn parent(&self) -> Option<&str> {
        self.stack.last().map(String::as_str)
    }

    fn in_body(&self) -> bool {
        self.has("text") && self.has("body") && !self.has("teiHeader")
    }

    fn in_float(&self) -> bool {
        self.has("figure") || self.has("table") || self.has("note")
    }

    /// Called before the element is pushed on the stack; its depth will be
    /// `self.stack.len()`.
    fn open(&mut self, name: &str, e: &BytesStart<'_>, empty: bool) -> Result<()> {
        let depth = self.stack.len();
        if self.skip_depth.is_some() {
            return Ok(());
        }
        if BLOCK_ELEMENTS.contains(&name) {
            self.space();
        }
        match name {
            "title"
                if self
                    .stack
                    .ends_with(&["teiHeader".into(), "fileDesc".into(), "titleStmt".into()]) =>
            {
                if self.title.is_none() && self.title_capture.is_none() && !empty {
                    self.title_capture = Some(Capture::new(depth));
                }
            }
            "abstract" if self.has("profileDesc") => {
                if self.abstract_capture.is_none() && self.abstract_text.is_none() && !empty {
                    self.abstract_capture = Some(Capture::new(depth));
                }
            }
            "div" if self.in_body() && !self.in_float() && !empty => {
                self.sections.push(Section {
                    heading: String::new(),
                    paragraphs: Vec::new(),
                });
                self.div_sections.push(self.sections.len() - 1);
            }
            "head" if self.in_body() && !self.in_float() && self.parent() == Some("div") && !empty => {
                if let Some(&idx) = self.div_sections.last() {
                    self.head = Some((idx, Capture::new(depth)));
                }
            }
            "p" if self.in_body() && !self.in_float() && self.paragraph.is_none() && !empty => {
                self.paragraph = Some(OpenParagraph {
                    capture: Capture::new(depth),
                    markers: Vec::new(),
                });
            }
            "ref" if self.paragraph.is_some() => {
                if attr(e, "type")?.as_deref() == Some("bibr") {
                    let target = attr(e, "target")?
                        .map(|t| t.trim().trim_start_matches('#').to_string())
                        .filter(|t| !t.is_empty() && !t.contains(char::is_whitespace));
                    match target {
                        Some(bib_key) => {
                            let para = self.paragraph.as_mut().unwrap();
                            let span = para.capture.builder.push_token(CITATION_PLACEHOLDER);
                            para.markers.push(CitationMarker { bib_key, span });
                        }
                        None => self.unresolved_markers += 1,
                    }
                    if !empty {
                        self.skip_depth = Some(depth);
                    }
                }
            }
            "biblStruct" if self.has("text") && self.bibl.is_none() && !empty => {
                self.bibl = Some(OpenBibl {
                    depth,
                    key: attr(e, "xml:id")?,
                    analytic: None,
                    monogr: None,
                    analytic_title: None,
                    monogr_title: None,
                });
            }
            "title" if self.bibl.is_some() && !empty => {
                let parent = self.parent().map(str::to_owned);
                let bibl = self.bibl.as_mut().unwrap();
                match parent.as_deref() {
                    Some("analytic") if bibl.analytic_title.is_none() && bibl.analytic.is_none() => {
                        bibl.analytic = Some(Capture::new(depth));
                    }
                    Some("monogr") if bibl.monogr_title.is_none() && bibl.monogr.is_none() => {
                        bibl.monogr = Some(Capture::new(depth));
                    }
                    _ => {}
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Called after the element has been popped; its depth is `self.stack.len()`.
    fn close(&mut self, name: &str) {
        let depth = self.stack.len();
        if let Some(skip) = self.skip_depth {
            if skip == depth {
                self.skip_depth = None;
            }
            return;
        }
        if BLOCK_ELEMENTS.contains(&name) {
            self.space();
        }
        if self.title_capture.as_ref().is_some_and(|c| c.depth == depth) {
            self.title = Some(self.title_capture.take().unwrap().builder.finish());
        }
        if self.abstract_capture.as_ref().is_some_and(|c| c.depth == depth) {
            self.abstract_text = Some(self.abstract_capture.take().unwrap().builder.finish());
        }
        if self.head.as_ref().is_some_and(|(_, c)| c.depth == depth) {
            let (idx, capture) = self.head.take().unwrap();
            self.sections[idx].heading = capture.builder.finish();
        }
        if self.paragraph.as_ref().is_some_and(|p| p.capture.depth == depth) {
            let open = self.paragraph.take().unwrap();
            let text = open.capture.builder.finish();
            if !text.is_empty() {
                let idx = match self.div_sections.last() {
                    Some(&idx) => idx,
                    None => self.loose_section(),
                };
                self.sections[idx].paragraphs.push(Paragraph {
                    text,
                    markers: open.markers,
                });
            }
        }
        if name == "div" && self.in_body() && !self.in_float() {
            self.div_sections.pop();
        }
        if let Some(bibl) = self.bibl.as_mut() {
            if bibl.analytic.as_ref().is_some_and(|c| c.depth == depth) {
                bibl.analytic_title = Some(bibl.analytic.take().unwrap().builder.finish());
            }
            if bibl.monogr.as_ref().is_some_and(|c| c.depth == depth) {
                bibl.monogr_title = Some(bibl.monogr.take().unwrap().builder.finish());
            }
            if bibl.depth == depth {
                let bibl = self.bibl.take().unwrap();
                if let Some(key) = bibl.key {
                    let raw_title = bibl
                        .analytic_title
                        .filter(|t| !t.is_empty())
                        .or(bibl.monogr_title)
                        .unwrap_or_default();
                    if self.bib_keys.insert(key.clone()) {
                        self.bibliography.push(BibEntry {
                            bib_key: key,
                            raw_title,
                        });
                    }
                }
            }
        }
    }

    /// Section for paragraphs that sit directly under `body`.
    fn loose_section(&mut self) -> usize {
        self.sections.push(Section {
            heading: String::new(),
            paragraphs: Vec::new(),
        });
        self.sections.len() - 1
    }

    fn captures(&mut self) -> impl Iterator<Item = &mut CleanTextBuilder> {
        let bibl = self.bibl.as_mut();
        let (analytic, monogr) = match bibl {
            Some(b) => (b.analytic.as_mut(), b.monogr.as_mut()),
            None => (None, None),
        };
        self.title_capture
            .as_mut()
            .into_iter()
            .chain(self.abstract_capture.as_mut())
            .chain(self.head.as_mut().map(|(_, c)| c))
            .chain(self.paragraph.as_mut().map(|p| &mut p.capture))
            .chain(analytic)
            .chain(monogr)
            .map(|c| &mut c.builder)
    }

    fn text(&mut self, text: &str) {
        if self.skip_depth.is_some() {
            return;
        }
        for builder in self.captures() {
            builder.push_str(text);
        }
    }

    fn space(&mut self) {
        for builder in self.captures() {
            builder.push_space();
        }
    }

    fn finish(mut self) -> TeiDocument {
        self.sections.retain(|s| !s.paragraphs.is_empty());
        TeiDocument {
            title: self.title.unwrap_or_default(),
            abstract_text: self.abstract_text.unwrap_or_default(),
            sections: self.sections,
            bibliography: self.bibliography,
            unresolved_markers: self.unresolved_markers,
        }
    }
}
