//! Text normalization and rule-based sentence segmentation shared by the
//! context extractor and the body chunker.

use std::ops::Range;

/// Placeholder left in paragraph text where an inline bibliographic
/// reference marker used to be.
pub const CITATION_PLACEHOLDER: &str = "⟨CIT⟩";

/// Token that replaces the placeholder of the reference being described.
pub const TARGET_TOKEN: &str = "[TARGET]";

/// Abbreviations that never end a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &["e.g.", "i.e.", "et al.", "Fig.", "cf."];

/// Cleans XML-derived text: line breaks and other whitespace become single
/// spaces, `<` and `>` and control characters are deleted, and the result
/// is trimmed. Every other character is kept.
pub fn clean_text(raw: &str) -> String {
    let mut builder = CleanTextBuilder::default();
    builder.push_str(raw);
    builder.finish()
}

/// Incremental form of [`clean_text`] that also reports character offsets,
/// so callers can splice in tokens and keep track of where they landed.
#[derive(Debug, Default)]
pub(crate) struct CleanTextBuilder {
    out: String,
    chars: usize,
    pending_space: bool,
}

impl CleanTextBuilder {
    pub(crate) fn push_str(&mut self, raw: &str) {
        for ch in raw.chars() {
            if ch.is_whitespace() {
                self.pending_space = true;
            } else if ch == '<' || ch == '>' || ch.is_control() {
                continue;
            } else {
                self.push_visible(ch);
            }
        }
    }

    /// Appends `token` verbatim (it must already be clean) and returns its
    /// character span in the output.
    pub(crate) fn push_token(&mut self, token: &str) -> (usize, usize) {
        let mut chars = token.chars();
        let Some(first) = chars.next() else {
            return (self.chars, self.chars);
        };
        self.push_visible(first);
        let start = self.chars - 1;
        for ch in chars {
            self.push_visible(ch);
        }
        (start, self.chars)
    }

    /// Forces a word break before the next visible character.
    pub(crate) fn push_space(&mut self) {
        self.pending_space = true;
    }

    fn push_visible(&mut self, ch: char) {
        if self.pending_space && !self.out.is_empty() {
            self.out.push(' ');
            self.chars += 1;
        }
        self.pending_space = false;
        self.out.push(ch);
        self.chars += 1;
    }

    pub(crate) fn finish(self) -> String {
        self.out
    }
}

/// Collapses whitespace runs to one space and trims, leaving every other
/// character untouched.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Byte offset of the `char_idx`-th character, or `text.len()` past the end.
pub(crate) fn char_to_byte(text: &str, char_idx: usize) -> usize {
    text.char_indices().nth(char_idx).map_or(text.len(), |(b, _)| b)
}

pub(crate) fn byte_to_char(text: &str, byte_idx: usize) -> usize {
    text[..byte_idx].chars().count()
}

/// Rule-based sentence splitter.
///
/// A sentence ends at `.`, `!` or `?` (plus any closing quotes or
/// parentheses) when followed by whitespace and an uppercase letter, or by
/// the end of the text. A `.` that completes one of the guard abbreviations
/// never ends a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSegmenter {
    abbreviations: Vec<String>,
}

impl Default for SentenceSegmenter {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()))
    }
}

impl SentenceSegmenter {
    pub fn new<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            abbreviations: abbreviations.into_iter().map(Into::into).collect(),
        }
    }

    pub fn abbreviations(&self) -> &[String] {
        &self.abbreviations
    }

    /// Byte ranges of the sentences of `text`, in order. Ranges exclude the
    /// whitespace between sentences.
    pub fn split(&self, text: &str) -> Vec<Range<usize>> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut sentences = Vec::new();
        let mut start: Option<usize> = None;
        let mut i = 0;
        while i < chars.len() {
            let (byte, ch) = chars[i];
            if start.is_none() {
                if ch.is_whitespace() {
                    i += 1;
                    continue;
                }
                start = Some(byte);
            }
            if matches!(ch, '.' | '!' | '?') {
                let mut j = i + 1;
                while j < chars.len() && matches!(chars[j].1, ')' | '"' | '\'' | '”' | '’') {
                    j += 1;
                }
                let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                let at_end = k == chars.len();
                let boundary =
                    at_end || (k > j && chars[k].1.is_uppercase() && !self.guarded(text, start.unwrap(), byte, ch));
                if boundary {
                    sentences.push(start.take().unwrap()..end);
                    i = k;
                    continue;
                }
                i = j;
                continue;
            }
            i += 1;
        }
        if let Some(s) = start {
            let end = s + text[s..].trim_end().len();
            if end > s {
                sentences.push(s..end);
            }
        }
        sentences
    }

    /// True if the `.` at `term_byte` completes a guard abbreviation.
    fn guarded(&self, text: &str, sentence_start: usize, term_byte: usize, term: char) -> bool {
        if term != '.' {
            return false;
        }
        let head = &text[sentence_start..term_byte + 1];
        self.abbreviations.iter().any(|abbr| {
            head.ends_with(abbr.as_str())
                && head[..head.len() - abbr.len()]
                    .chars()
                    .next_back()
                    .is_none_or(|c| !c.is_alphanumeric())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(text: &str) -> Vec<&str> {
        SentenceSegmenter::default()
            .split(text)
            .into_iter()
            .map(|r| &text[r])
            .collect()
    }

    #[test]
    fn clean_text_examples() {
        assert_eq!(clean_text("a\nb"), "a b");
        assert_eq!(clean_text("x <y> z"), "x y z");
        assert_eq!(clean_text("  a   b  "), "a b");
        assert_eq!(clean_text("tab\tand\r\nCRLF"), "tab and CRLF");
        assert_eq!(clean_text("bell\u{7}ring"), "bellring");
        assert_eq!(clean_text("naïve ⟨CIT⟩ … ok"), "naïve ⟨CIT⟩ … ok");
        assert_eq!(clean_text(""), "");
    }

    #[test]
    fn builder_tracks_token_spans() {
        let mut b = CleanTextBuilder::default();
        b.push_str("  A   cites ");
        let span = b.push_token(CITATION_PLACEHOLDER);
        b.push_str(".\n");
        let text = b.finish();
        assert_eq!(text, "A cites ⟨CIT⟩.");
        let got: String = text.chars().skip(span.0).take(span.1 - span.0).collect();
        assert_eq!(got, CITATION_PLACEHOLDER);
    }

    #[test]
    fn splits_on_terminator_and_capital() {
        assert_eq!(
            sentences("S1. S2 [TARGET] x. S3."),
            vec!["S1.", "S2 [TARGET] x.", "S3."]
        );
        assert_eq!(sentences("Is it? Yes! Done"), vec!["Is it?", "Yes!", "Done"]);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(sentences("Value is 3. and more."), vec!["Value is 3. and more."]);
    }

    #[test]
    fn abbreviations_are_guarded() {
        assert_eq!(
            sentences("Prior work, e.g. Smith, used it. See Fig. Two for details. Jones et al. Proposed more."),
            vec![
                "Prior work, e.g. Smith, used it.",
                "See Fig. Two for details.",
                "Jones et al. Proposed more."
            ]
        );
        // "Fig." inside a longer word is not the abbreviation.
        assert_eq!(sentences("A bigFig. Next one."), vec!["A bigFig.", "Next one."]);
    }

    #[test]
    fn closing_quote_stays_with_sentence() {
        assert_eq!(
            sentences("He said \"stop.\" Then left."),
            vec!["He said \"stop.\"", "Then left."]
        );
    }

    #[test]
    fn custom_guard_list() {
        let seg = SentenceSegmenter::new(["approx."]);
        let text = "See approx. One here. Fig. Two.";
        let got: Vec<_> = seg.split(text).into_iter().map(|r| &text[r]).collect();
        assert_eq!(got, vec!["See approx. One here.", "Fig.", "Two."]);
    }

    #[test]
    fn char_byte_conversion() {
        let t = "a⟨b";
        assert_eq!(char_to_byte(t, 2), "a⟨".len());
        assert_eq!(char_to_byte(t, 9), t.len());
        assert_eq!(byte_to_char(t, "a⟨".len()), 2);
    }

    proptest::proptest! {
        #[test]
        fn clean_text_is_idempotent(s in "\\PC{0,60}|[ \\t\\n<>a-c]{0,30}") {
            let once = clean_text(&s);
            proptest::prop_assert_eq!(clean_text(&once), once.clone());
            proptest::prop_assert!(!once.contains('<') && !once.contains('>') && !once.contains('\n'));
        }

        #[test]
        fn sentences_cover_all_visible_text(s in "[A-Za-z .!?]{0,80}") {
            let ranges = SentenceSegmenter::default().split(&s);
            let joined: String = ranges.iter().map(|r| &s[r.clone()]).collect::<Vec<_>>().join(" ");
            proptest::prop_assert_eq!(collapse_whitespace(&joined), collapse_whitespace(&s));
        }
    }
}
