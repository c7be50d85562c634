//! Seeded synthetic corpus generation with planted, labeled answer facts,
//! SQuAD-format ingestion, and corpus persistence.
//!
//! Each synthetic paper is assembled from low-entropy filler prose plus one
//! planted fact cluster per question. Planted sentences are rich in
//! mid-sentence capitalized names, numbers, and discourse markers so the
//! fact's chunk scores well above the filler baseline on every salience
//! feature; a fraction of filler sentences carries a rare jargon term so
//! TF-IDF alone has distractors to fall for. 60% of facts land in middle
//! sections and 40% in boundary sections, so position alone cannot solve
//! selection.
//!
//! Gold chunk ids are computed against the chunking config supplied to
//! [`generate`]; planted answer sentences stay under 31 tokens, which
//! guarantees full containment in at least one chunk whenever the overlap
//! is at least 30 tokens.

use std::collections::HashSet;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::evaluation::QAExample;
use crate::memory::{escape_text, unescape_text};
use crate::text_prep::{chunk_document, tokenize, Chunk, SectionSpan, TokenizedDoc};

/// The structured section plan of a synthetic paper.
pub const DEFAULT_SECTION_PLAN: [&str; 8] = [
    "Abstract",
    "Introduction",
    "Related Work",
    "Methodology",
    "Experiments",
    "Results",
    "Discussion",
    "Conclusion",
];

// token-share of each default section
const SECTION_SHARES: [f64; 8] = [0.05, 0.12, 0.15, 0.20, 0.15, 0.13, 0.12, 0.08];

// fraction of filler sentences carrying a rare jargon term
const JARGON_RATE: f64 = 0.12;

/// Parameters of the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPaperSpec {
    pub seed: u64,
    pub n_papers: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub questions_per_paper: usize,
    pub section_plan: Vec<String>,
}

impl Default for SyntheticPaperSpec {
    fn default() -> Self {
        SyntheticPaperSpec {
            seed: 42,
            n_papers: 200,
            min_tokens: 5000,
            max_tokens: 10000,
            questions_per_paper: 5,
            section_plan: DEFAULT_SECTION_PLAN.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SyntheticPaperSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_papers == 0 {
            return Err(Error::InvalidConfig {
                key: "n_papers",
                reason: "must be at least 1".into(),
            });
        }
        if self.questions_per_paper == 0 {
            return Err(Error::InvalidConfig {
                key: "questions_per_paper",
                reason: "must be at least 1".into(),
            });
        }
        if self.section_plan.is_empty() {
            return Err(Error::InvalidConfig {
                key: "section_plan",
                reason: "must name at least one section".into(),
            });
        }
        if self.min_tokens > self.max_tokens {
            return Err(Error::InvalidConfig {
                key: "min_tokens",
                reason: format!("min {} exceeds max {}", self.min_tokens, self.max_tokens),
            });
        }
        if self.max_tokens < self.min_tokens + 16 {
            return Err(Error::InvalidConfig {
                key: "max_tokens",
                reason: "token window must span at least 16 tokens".into(),
            });
        }
        let floor = 50 * self.questions_per_paper + 3 * self.section_plan.len();
        if self.min_tokens < floor {
            return Err(Error::InvalidConfig {
                key: "min_tokens",
                reason: format!(
                    "need at least {floor} tokens for {} questions and {} sections",
                    self.questions_per_paper,
                    self.section_plan.len()
                ),
            });
        }
        Ok(())
    }
}

/// One generated or ingested document.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusDocument {
    pub doc_id: String,
    pub text: String,
    /// Section spans in token coordinates; empty for ingested plain text.
    pub sections: Vec<SectionSpan>,
}

/// Documents plus their QA examples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub documents: Vec<CorpusDocument>,
    pub examples: Vec<QAExample>,
}

const FILLER_SUBJECTS: [&str; 10] = [
    "the approach",
    "the framework",
    "the analysis",
    "the overview",
    "the procedure",
    "the pipeline",
    "the workflow",
    "the setting",
    "the structure",
    "the formulation",
];
const FILLER_VERBS: [&str; 10] = [
    "considers",
    "outlines",
    "describes",
    "examines",
    "reviews",
    "presents",
    "covers",
    "addresses",
    "surveys",
    "revisits",
];
const FILLER_OBJECTS: [&str; 10] = [
    "several aspects of the problem",
    "the general landscape",
    "broad considerations",
    "the overall context",
    "many practical concerns",
    "the usual background",
    "a range of familiar ideas",
    "the surrounding literature",
    "common preliminaries",
    "assorted perspectives",
];
const FILLER_TAILS: [&str; 8] = [
    "in this setting",
    "for completeness",
    "at a high level",
    "as expected",
    "in broad terms",
    "without surprises",
    "along familiar lines",
    "as before",
];

const FIRST_NAMES: [&str; 20] = [
    "Elena", "Tomas", "Priya", "Marcus", "Ingrid", "Farid", "Yuki", "Dario", "Selma", "Viktor",
    "Anouk", "Rafael", "Greta", "Hassan", "Mira", "Otto", "Leila", "Bruno", "Edith", "Nikolai",
];
const LAST_NAMES: [&str; 20] = [
    "Markov", "Lindqvist", "Okafor", "Petrov", "Santos", "Keller", "Moreau", "Ivanov", "Haugen",
    "Demir", "Novak", "Fischer", "Crane", "Walsh", "Berger", "Holm", "Draper", "Ferris", "Mercer",
    "Varga",
];
const ORG_NAMES: [&str; 10] = [
    "Arcton", "Velmora", "Northgate", "Quillan", "Harwick", "Bellmont", "Coriden", "Maplewood",
    "Silverton", "Eastbrook",
];
const METRICS: [&str; 6] = ["accuracy", "precision", "recall", "coverage", "throughput", "robustness"];

const SYL_A: [&str; 12] = [
    "Vel", "Zan", "Cor", "Mar", "Tal", "Bren", "Quor", "Syl", "Dra", "Fen", "Gal", "Nor",
];
const SYL_B: [&str; 12] = ["da", "ve", "lo", "ri", "mu", "ta", "xe", "na", "po", "ki", "sa", "bu"];
const SYL_C: [&str; 12] = [
    "lith", "dor", "mex", "tron", "vale", "gan", "rus", "form", "dex", "mont", "zed", "carn",
];

fn syllable_name(rng: &mut StdRng) -> String {
    format!(
        "{}{}{}",
        SYL_A[rng.random_range(0..SYL_A.len())],
        SYL_B[rng.random_range(0..SYL_B.len())],
        SYL_C[rng.random_range(0..SYL_C.len())]
    )
}

fn fresh_name(rng: &mut StdRng, used: &mut HashSet<String>) -> String {
    for _ in 0..100 {
        let name = syllable_name(rng);
        if used.insert(name.clone()) {
            return name;
        }
    }
    // pool is large; reaching here means the corpus is gigantic
    let fallback = format!("{}{}", syllable_name(rng), used.len());
    used.insert(fallback.clone());
    fallback
}

fn filler_sentence(rng: &mut StdRng, jargon: &mut dyn FnMut(&mut StdRng) -> String) -> String {
    let subject = FILLER_SUBJECTS[rng.random_range(0..FILLER_SUBJECTS.len())];
    let verb = FILLER_VERBS[rng.random_range(0..FILLER_VERBS.len())];
    let object = if rng.random_bool(JARGON_RATE) {
        format!("the {} formulation", jargon(rng))
    } else {
        FILLER_OBJECTS[rng.random_range(0..FILLER_OBJECTS.len())].to_string()
    };
    let tail = FILLER_TAILS[rng.random_range(0..FILLER_TAILS.len())];
    let mut s = format!("{subject} {verb} {object} {tail}.");
    let first = s.remove(0).to_ascii_uppercase();
    s.insert(0, first);
    s
}

struct Plant {
    sentences: Vec<String>,
    question: String,
    section_idx: usize,
}

fn build_plant(
    rng: &mut StdRng,
    q: usize,
    section_idx: usize,
    used_names: &mut HashSet<String>,
) -> Plant {
    let sys = fresh_name(rng, used_names);
    let bench = fresh_name(rng, used_names);
    let f1 = FIRST_NAMES[rng.random_range(0..FIRST_NAMES.len())];
    let l1 = LAST_NAMES[rng.random_range(0..LAST_NAMES.len())];
    let f2 = FIRST_NAMES[rng.random_range(0..FIRST_NAMES.len())];
    let l2 = LAST_NAMES[rng.random_range(0..LAST_NAMES.len())];
    let org = ORG_NAMES[rng.random_range(0..ORG_NAMES.len())];
    let year: u32 = rng.random_range(2004..2024);
    let v = rng.random_range(55.0..99.9_f64);
    let v2 = rng.random_range(0.1..9.9_f64);
    let trials: u32 = rng.random_range(3..40);

    let (gold, support, question) = match q % 3 {
        0 => (
            format!(
                "The {sys} system was developed by {f1} {l1} and {f2} {l2} at the {org} Institute in {year}."
            ),
            format!(
                "Note that {f1} {l1} reported a score of {v:.1} for {sys} on the {bench} benchmark, importantly above {v2:.1} points."
            ),
            format!("Who developed the {sys} system?"),
        ),
        1 => {
            let metric = METRICS[rng.random_range(0..METRICS.len())];
            (
                format!(
                    "Note that the {metric} of the {sys} method reaches {v:.1} percent on the {bench} benchmark."
                ),
                format!(
                    "Importantly, {f1} {l1} confirmed the figure of {v2:.1} across {trials} separate trials at the {org} Institute in {year}."
                ),
                format!("What {metric} does the {sys} method reach on the {bench} benchmark?"),
            )
        }
        _ => {
            let term = fresh_name(rng, used_names).to_lowercase();
            (
                format!(
                    "The {term} coefficient of the {sys} design is defined as the ratio between stored weight and retained signal at level {v2:.1}."
                ),
                format!(
                    "In summary, {f1} {l1} fixed the {term} coefficient near {v2:.2} for the {bench} benchmark in {year}."
                ),
                format!("How is the {term} coefficient of the {sys} design defined?"),
            )
        }
    };
    Plant {
        sentences: vec![gold, support],
        question,
        section_idx,
    }
}

/// Middle/boundary section indices for fact placement.
fn placement_sets(plan_len: usize) -> (Vec<usize>, Vec<usize>) {
    if plan_len == 8 {
        // Methodology, Experiments, Results / Abstract, Introduction, Conclusion
        (vec![3, 4, 5], vec![0, 1, 7])
    } else if plan_len >= 4 {
        let middle: Vec<usize> = (2..plan_len - 1).collect();
        (middle, vec![0, 1, plan_len - 1])
    } else {
        let all: Vec<usize> = (0..plan_len).collect();
        (all.clone(), all)
    }
}

/// Generate a seed-deterministic corpus; gold chunk ids are computed with
/// the supplied chunking config.
pub fn generate(spec: &SyntheticPaperSpec, chunk_size: usize, chunk_overlap: usize) -> Result<Corpus> {
    spec.validate()?;
    let plan_len = spec.section_plan.len();
    let (middle, boundary) = placement_sets(plan_len);
    let shares: Vec<f64> = if plan_len == 8 {
        SECTION_SHARES.to_vec()
    } else {
        vec![1.0 / plan_len as f64; plan_len]
    };

    let mut documents = Vec::with_capacity(spec.n_papers);
    let mut examples = Vec::new();

    for p in 0..spec.n_papers {
        let mut rng = StdRng::seed_from_u64(
            spec.seed ^ ((p as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        let doc_id = format!("paper_{p:04}");
        let target = rng.random_range(spec.min_tokens..=spec.max_tokens);

        // plants first, so the filler budget can account for their tokens
        let mut used_names = HashSet::new();
        let plants: Vec<Plant> = (0..spec.questions_per_paper)
            .map(|q| {
                let slot = if q % 5 == 1 || q % 5 == 4 { &boundary } else { &middle };
                let section_idx = slot[rng.random_range(0..slot.len())];
                build_plant(&mut rng, q, section_idx, &mut used_names)
            })
            .collect();
        let plant_tokens: usize = plants
            .iter()
            .flat_map(|pl| pl.sentences.iter())
            .map(|s| tokenize(s).len())
            .sum();

        let headings: Vec<String> = spec.section_plan.iter().map(|n| format!("{n}.")).collect();
        let heading_tokens: usize = headings.iter().map(|h| tokenize(h).len()).sum();
        let filler_budget = target.saturating_sub(plant_tokens + heading_tokens);

        // a fresh lowercase jargon word per call keeps document frequency low
        let mut jargon = |rng: &mut StdRng| -> String { syllable_name(rng).to_lowercase() };

        // fill sections up to their share of the filler budget
        let mut section_sentences: Vec<Vec<String>> = Vec::with_capacity(plan_len);
        for share in shares.iter().take(plan_len) {
            let quota = (filler_budget as f64 * share).round() as usize;
            let mut sentences = Vec::new();
            let mut used = 0usize;
            loop {
                let s = filler_sentence(&mut rng, &mut jargon);
                let cost = tokenize(&s).len();
                if used + cost > quota {
                    break;
                }
                used += cost;
                sentences.push(s);
            }
            section_sentences.push(sentences);
        }

        // insert each plant cluster at a seeded position within its section
        let mut plant_markers: Vec<(usize, usize, usize)> = Vec::new(); // (section, sentence idx, plant idx)
        for (pi, plant) in plants.iter().enumerate() {
            let section = &mut section_sentences[plant.section_idx];
            let at = rng.random_range(0..=section.len());
            for (si, s) in plant.sentences.iter().enumerate() {
                section.insert(at + si, s.clone());
            }
            plant_markers.push((plant.section_idx, at, pi));
        }

        // assemble text, tracking token spans per section and the char span
        // of each gold (first-of-cluster) sentence
        let mut text = String::new();
        let mut token_count = 0usize;
        let mut sections = Vec::with_capacity(plan_len);
        let mut gold_spans: Vec<(usize, usize)> = vec![(0, 0); plants.len()];
        let push_sentence = |text: &mut String, token_count: &mut usize, s: &str| -> (usize, usize) {
            if !text.is_empty() {
                text.push(' ');
            }
            let start = text.len();
            text.push_str(s);
            *token_count += tokenize(s).len();
            (start, text.len())
        };
        for (si, name) in spec.section_plan.iter().enumerate() {
            let token_start = token_count;
            push_sentence(&mut text, &mut token_count, &headings[si]);
            for (sent_idx, s) in section_sentences[si].iter().enumerate() {
                let span = push_sentence(&mut text, &mut token_count, s);
                if let Some(&(_, _, pi)) = plant_markers
                    .iter()
                    .find(|&&(sec, at, _)| sec == si && at == sent_idx)
                {
                    gold_spans[pi] = span;
                }
            }
            sections.push(SectionSpan {
                name: name.clone(),
                token_start,
                token_end: token_count,
            });
        }
        // top up short papers so the total lands inside [min, max]
        while token_count < spec.min_tokens {
            let s = filler_sentence(&mut rng, &mut jargon);
            push_sentence(&mut text, &mut token_count, &s);
            sections.last_mut().expect("plan non-empty").token_end = token_count;
        }

        let mut td = TokenizedDoc::new(&doc_id, &text);
        td.sections = sections.clone();
        let chunks = chunk_document(&td, chunk_size, chunk_overlap)?;

        for (pi, plant) in plants.iter().enumerate() {
            let (cs, ce) = gold_spans[pi];
            let gold_chunk_ids = chunks_covering_char_span(&chunks, cs, ce);
            examples.push(QAExample {
                doc_id: doc_id.clone(),
                question: plant.question.clone(),
                gold_answer: plant.sentences[0].clone(),
                gold_chunk_ids,
                section: Some(spec.section_plan[plant.section_idx].clone()),
            });
        }
        documents.push(CorpusDocument {
            doc_id,
            text,
            sections,
        });
    }

    Ok(Corpus {
        documents,
        examples,
    })
}

/// Chunk ids whose character coverage contains `[start, end)`.
pub fn chunks_covering_char_span(chunks: &[Chunk], start: usize, end: usize) -> Vec<usize> {
    chunks
        .iter()
        .filter(|c| !c.tokens.is_empty())
        .filter(|c| {
            let c_start = c.tokens[0].char_offset;
            let c_end = c.tokens.last().expect("non-empty").end_offset();
            c_start <= start && end <= c_end
        })
        .map(|c| c.chunk_id)
        .collect()
}

/// File name of the QA table inside a corpus directory.
pub const QA_FILE: &str = "qa.tsv";

/// Persist a corpus: one `<doc_id>.txt` per document plus a tab-separated
/// QA file with columns doc_id, question, gold_answer, gold_chunk_ids
/// (comma-joined), section.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for doc in &corpus.documents {
        std::fs::write(dir.join(format!("{}.txt", doc.doc_id)), &doc.text)?;
    }
    let mut qa = String::new();
    for ex in &corpus.examples {
        let ids = ex
            .gold_chunk_ids
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",");
        qa.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            ex.doc_id,
            escape_text(&ex.question),
            escape_text(&ex.gold_answer),
            ids,
            ex.section.as_deref().unwrap_or("")
        ));
    }
    std::fs::write(dir.join(QA_FILE), qa)?;
    Ok(())
}

/// Load a corpus directory written by [`save_corpus`]. Section spans are
/// not persisted and come back empty.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let mut doc_files: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    doc_files.sort();
    let mut documents = Vec::with_capacity(doc_files.len());
    for path in doc_files {
        let doc_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Parse {
                location: path.display().to_string(),
                reason: "document file name is not valid UTF-8".into(),
            })?
            .to_string();
        documents.push(CorpusDocument {
            doc_id,
            text: std::fs::read_to_string(&path)?,
            sections: Vec::new(),
        });
    }

    let qa_path = dir.join(QA_FILE);
    let qa_text = std::fs::read_to_string(&qa_path).map_err(|e| Error::Parse {
        location: qa_path.display().to_string(),
        reason: format!("cannot read QA file: {e}"),
    })?;
    let mut examples = Vec::new();
    for (lineno, line) in qa_text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(5, '\t').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                location: format!("{} line {}", qa_path.display(), lineno + 1),
                reason: format!("expected 5 tab-separated fields, got {}", fields.len()),
            });
        }
        let gold_chunk_ids = if fields[3].is_empty() {
            Vec::new()
        } else {
            fields[3]
                .split(',')
                .map(|s| {
                    s.parse::<usize>().map_err(|_| Error::Parse {
                        location: format!("{} line {}", qa_path.display(), lineno + 1),
                        reason: format!("bad chunk id {s:?}"),
                    })
                })
                .collect::<Result<_>>()?
        };
        examples.push(QAExample {
            doc_id: fields[0].to_string(),
            question: unescape_text(fields[1]),
            gold_answer: unescape_text(fields[2]),
            gold_chunk_ids,
            section: if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].to_string())
            },
        });
    }
    Ok(Corpus {
        documents,
        examples,
    })
}

#[derive(Deserialize)]
struct SquadFile {
    version: Option<String>,
    data: Vec<SquadArticle>,
}

#[derive(Deserialize)]
struct SquadArticle {
    title: Option<String>,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Deserialize)]
struct SquadQa {
    question: String,
    #[serde(default)]
    answers: Vec<SquadAnswer>,
    #[serde(default)]
    is_impossible: bool,
}

#[derive(Deserialize)]
struct SquadAnswer {
    text: String,
    answer_start: usize,
}

fn sanitize_id(raw: &str) -> String {
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Load a SQuAD v2.0 JSON file: one document per paragraph, unanswerable
/// questions skipped (with a warning on stderr), gold chunk ids derived
/// from `answer_start` under the supplied chunking config.
pub fn load_squad(path: &Path, chunk_size: usize, chunk_overlap: usize) -> Result<Corpus> {
    let text = std::fs::read_to_string(path)?;
    let file: SquadFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{} (line {}, column {})", path.display(), e.line(), e.column()),
        reason: e.to_string(),
    })?;
    if let Some(version) = &file.version {
        let v = version.trim_start_matches('v');
        if !v.starts_with('2') {
            return Err(Error::SchemaVersion(version.clone()));
        }
    }

    let mut documents = Vec::new();
    let mut examples = Vec::new();
    let mut skipped_impossible = 0usize;
    let mut paragraph_counter = 0usize;

    for article in &file.data {
        let title = sanitize_id(article.title.as_deref().unwrap_or("squad"));
        for paragraph in &article.paragraphs {
            let doc_id = format!("{title}_{paragraph_counter:04}");
            paragraph_counter += 1;
            let td = TokenizedDoc::new(&doc_id, &paragraph.context);
            let chunks = chunk_document(&td, chunk_size, chunk_overlap)?;

            for qa in &paragraph.qas {
                if qa.is_impossible {
                    skipped_impossible += 1;
                    continue;
                }
                let Some(answer) = qa.answers.first() else {
                    skipped_impossible += 1;
                    continue;
                };
                let span = char_span_of_answer(&paragraph.context, answer);
                let gold_chunk_ids = match span {
                    Some((start, end)) => chunks_covering_char_span(&chunks, start, end),
                    None => Vec::new(),
                };
                examples.push(QAExample {
                    doc_id: doc_id.clone(),
                    question: qa.question.clone(),
                    gold_answer: answer.text.clone(),
                    gold_chunk_ids,
                    section: None,
                });
            }
            documents.push(CorpusDocument {
                doc_id,
                text: paragraph.context.clone(),
                sections: Vec::new(),
            });
        }
    }
    if skipped_impossible > 0 {
        eprintln!("warning: skipped {skipped_impossible} unanswerable question(s)");
    }
    Ok(Corpus {
        documents,
        examples,
    })
}

/// Byte span of the answer in the context. `answer_start` counts chars (the
/// dataset convention); falls back to a text search when the offset does
/// not line up.
fn char_span_of_answer(context: &str, answer: &SquadAnswer) -> Option<(usize, usize)> {
    let byte_start = context
        .char_indices()
        .nth(answer.answer_start)
        .map(|(b, _)| b)?;
    let answer_chars = answer.text.chars().count();
    let byte_end = context[byte_start..]
        .char_indices()
        .nth(answer_chars)
        .map(|(b, _)| byte_start + b)
        .unwrap_or(context.len());
    if &context[byte_start..byte_end] == answer.text {
        Some((byte_start, byte_end))
    } else {
        context
            .find(&answer.text)
            .map(|b| (b, b + answer.text.len()))
    }
}
