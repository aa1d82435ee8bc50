//! Seeded synthetic corpora with a planted source signal.
//!
//! Every paper cites its source references in dedicated paragraphs that
//! repeat the reference's title words next to a small set of cue phrases.
//! Other references are cited with neutral phrasing about unrelated words,
//! or not cited at all.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::corpus::{manifest_to_json, DatasetEntry, Reference};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub papers: usize,
    pub refs_per_paper: usize,
    pub sources_per_paper: usize,
    /// References with no body citation.
    pub uncited_per_paper: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            papers: 10,
            refs_per_paper: 8,
            sources_per_paper: 2,
            uncited_per_paper: 2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPaper {
    pub entry: DatasetEntry,
    pub tei: String,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub papers: Vec<SyntheticPaper>,
}

const SOURCE_CUES: &[&str] = &[
    "Our method builds directly on the {t} framework of {c} and extends its core design.",
    "We adopt the {t} formulation introduced by {c} as the foundation of our approach.",
    "Inspired by the {t} model of {c}, we extend its central idea to our setting.",
    "The main architecture follows the {t} approach of {c}, which we generalize here.",
];

const SOURCE_FOLLOWUPS: &[&str] = &[
    "In particular, the {t} component of {c} motivates every stage of our pipeline.",
    "Without the {t} insight from {c}, our method would not be possible.",
    "We reuse the {t} design from {c} and adapt it to new data.",
];

const OTHER_CUES: &[&str] = &[
    "Prior studies have also examined {t} in other contexts {c}.",
    "A broad survey of {t} appears in {c}.",
    "Several systems report results on {t} benchmarks {c}.",
    "Related efforts on {t} exist as well {c}.",
];

const FILLERS: &[&str] = &[
    "These results are reported on standard {t} collections.",
    "The {t} setting remains a common evaluation choice.",
    "Further details on {t} are given in the appendix.",
    "Such {t} baselines are widely used for comparison.",
];

const SECTIONS: &[&str] = &["1 Introduction", "2 Method", "3 Related Work", "4 Experiments"];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    const CONS: &[u8] = b"bdfgklmnprstvz";
    const VOW: &[u8] = b"aeiou";
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(CONS[rng.gen_range(0..CONS.len())] as char);
        w.push(VOW[rng.gen_range(0..VOW.len())] as char);
    }
    w.push(CONS[rng.gen_range(0..CONS.len())] as char);
    w
}

fn vocabulary(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let w = pseudo_word(rng);
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn phrase(rng: &mut ChaCha8Rng, vocab: &[String], n: usize) -> String {
    vocab.choose_multiple(rng, n).cloned().collect::<Vec<_>>().join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fill(template: &str, topic: &str, cite: &str) -> String {
    escape(&template.replace("{t}", topic)).replace("{c}", cite)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
        .unwrap_or_default()
}

impl SyntheticCorpus {
    pub fn generate(spec: &SyntheticSpec) -> Result<Self> {
        if spec.sources_per_paper == 0 || spec.sources_per_paper + spec.uncited_per_paper > spec.refs_per_paper {
            return Err(Error::Config(format!("inconsistent synthetic spec {spec:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let title_vocab = vocabulary(&mut rng, 600);
        let filler_vocab: Vec<String> = vocabulary(&mut rng, 800)
            .into_iter()
            .filter(|w| !title_vocab.contains(w))
            .collect();

        let mut papers = Vec::with_capacity(spec.papers);
        for p in 0..spec.papers {
            let paper_id = format!("syn{p:03}");
            let title = capitalize(&phrase(&mut rng, &title_vocab, 5));
            let references: Vec<Reference> = (0..spec.refs_per_paper)
                .map(|r| Reference {
                    ref_id: format!("{paper_id}-r{r}"),
                    title: capitalize(&phrase(&mut rng, &title_vocab, 4)),
                })
                .collect();
            let mut roles: Vec<usize> = (0..spec.refs_per_paper).collect();
            roles.shuffle(&mut rng);
            let sources: BTreeSet<usize> = roles[..spec.sources_per_paper].iter().copied().collect();
            let uncited: BTreeSet<usize> = roles
                [spec.sources_per_paper..spec.sources_per_paper + spec.uncited_per_paper]
                .iter()
                .copied()
                .collect();

            // Bibliography order differs from manifest order.
            let mut bib_order: Vec<usize> = (0..spec.refs_per_paper).collect();
            bib_order.shuffle(&mut rng);
            let bib_key = |r: usize| format!("b{}", bib_order.iter().position(|&x| x == r).unwrap());
            let cite = |r: usize| {
                let k = bib_key(r);
                format!(
                    "<ref type=\"bibr\" target=\"#{k}\">[{}]</ref>",
                    &k[1..].parse::<usize>().unwrap() + 1
                )
            };

            let mut paragraphs: Vec<String> = Vec::new();
            for (r, reference) in references.iter().enumerate() {
                if uncited.contains(&r) {
                    continue;
                }
                let title_words = reference.title.to_lowercase();
                let mut text = String::new();
                if sources.contains(&r) {
                    let t1 = SOURCE_CUES.choose(&mut rng).unwrap();
                    let t2 = SOURCE_FOLLOWUPS.choose(&mut rng).unwrap();
                    write!(
                        text,
                        "{} {}",
                        fill(t1, &title_words, &cite(r)),
                        fill(t2, &title_words, &cite(r))
                    )
                    .unwrap();
                } else {
                    let topic = phrase(&mut rng, &filler_vocab, 3);
                    let t1 = OTHER_CUES.choose(&mut rng).unwrap();
                    write!(text, "{}", fill(t1, &topic, &cite(r))).unwrap();
                }
                let topic = phrase(&mut rng, &filler_vocab, 2);
                let f = FILLERS.choose(&mut rng).unwrap();
                write!(text, " {}", fill(f, &topic, "")).unwrap();
                paragraphs.push(text);
            }
            paragraphs.shuffle(&mut rng);

            let mut body = String::new();
            let per_section = paragraphs.len().div_ceil(SECTIONS.len()).max(1);
            for (s, chunk) in paragraphs.chunks(per_section).enumerate() {
                write!(body, "<div><head>{}</head>", SECTIONS[s]).unwrap();
                for para in chunk {
                    write!(body, "<p>{para}</p>").unwrap();
                }
                body.push_str("</div>");
            }

            let mut bibl = String::new();
            for (k, &r) in bib_order.iter().enumerate() {
                let raw = if k % 2 == 0 {
                    format!("{}.", references[r].title)
                } else {
                    references[r].title.to_uppercase()
                };
                write!(
                    bibl,
                    "<biblStruct xml:id=\"b{k}\"><analytic><title level=\"a\" type=\"main\">{}</title></analytic></biblStruct>",
                    escape(&raw)
                )
                .unwrap();
            }

            let abstract_text = format!(
                "We study {} and report results on {}.",
                phrase(&mut rng, &filler_vocab, 3),
                phrase(&mut rng, &filler_vocab, 2)
            );
            let tei = format!(
                "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<TEI xmlns=\"http://www.tei-c.org/ns/1.0\"><teiHeader><fileDesc><titleStmt><title level=\"a\" type=\"main\">{}</title></titleStmt></fileDesc><profileDesc><abstract><p>{}</p></abstract></profileDesc></teiHeader><text><body>{body}</body><back><div type=\"references\"><listBibl>{bibl}</listBibl></div></back></text></TEI>\n",
                escape(&title),
                escape(&abstract_text)
            );

            let source_labels = sources.iter().map(|&r| references[r].ref_id.clone()).collect();
            papers.push(SyntheticPaper {
                entry: DatasetEntry {
                    paper_id,
                    title,
                    references,
                    source_labels,
                    labels_present: true,
                },
                tei,
            });
        }
        Ok(Self { papers })
    }

    pub fn entries(&self) -> Vec<DatasetEntry> {
        self.papers.iter().map(|p| p.entry.clone()).collect()
    }

    /// Writes `manifest.json` and `xml/<paper_id>.xml` under `dir` and
    /// returns a run config rooted there.
    pub fn write_to(&self, dir: &Path) -> Result<RunConfig> {
        let xml_dir = dir.join("xml");
        std::fs::create_dir_all(&xml_dir).map_err(|e| Error::io(&xml_dir, e))?;
        for p in &self.papers {
            let path = xml_dir.join(format!("{}.xml", p.entry.paper_id));
            std::fs::write(&path, &p.tei).map_err(|e| Error::io(&path, e))?;
        }
        let manifest = dir.join("manifest.json");
        std::fs::write(&manifest, manifest_to_json(&self.entries())).map_err(|e| Error::io(&manifest, e))?;
        Ok(RunConfig::new(manifest, xml_dir, dir.join("work")))
    }
}

/// Generates a corpus into `dir` and returns its run config.
pub fn write_synthetic_corpus(spec: &SyntheticSpec, dir: impl AsRef<Path>) -> Result<RunConfig> {
    SyntheticCorpus::generate(spec)?.write_to(dir.as_ref())
}

/// Where [`write_synthetic_corpus`] puts the TEI file of a paper.
pub fn synthetic_tei_path(dir: &Path, paper_id: &str) -> PathBuf {
    dir.join("xml").join(format!("{paper_id}.xml"))
}
