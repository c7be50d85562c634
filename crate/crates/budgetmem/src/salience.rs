//! Per-chunk lexical features, salience scoring, and optional training of
//! the score weights from labeled answer spans.
//!
//! Six features are extracted per chunk, each normalized to [0, 1]:
//!
//! * `entity_density` — entity tokens / chunk tokens. The entity predicate
//!   is "capitalized word not at sentence start, or all-caps word of length
//!   >= 2"; a token counts as sentence-initial when it opens the chunk or
//!   follows `.`, `!` or `?`.
//! * `question_presence` — min(1, (count of `?` + interrogative-lead
//!   sentences) / 3).
//! * `number_density` — number tokens / chunk tokens.
//! * `position_score` — 1.0 for the first and last chunk of a document,
//!   linear decay toward the middle otherwise.
//! * `tfidf_mean` — mean TF-IDF of the chunk's lexical tokens, min-max
//!   normalized across the document's chunks (a constant column maps to 0).
//! * `discourse_score` — discourse-marker lexicon hits / chunk tokens.
//!
//! The default weights are (0.2, 0.1, 0.15, 0.15, 0.2, 0.1) in that order;
//! they sum to 0.9 and are shipped verbatim, without renormalization.

use std::collections::HashMap;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::text_prep::{Chunk, Token, TokenKind};

/// Number of salience features.
pub const FEATURE_DIM: usize = 6;

/// Default feature weights, in feature order.
pub const DEFAULT_WEIGHTS: [f64; FEATURE_DIM] = [0.2, 0.1, 0.15, 0.15, 0.2, 0.1];

/// Default margin for the ranking loss.
pub const DEFAULT_MARGIN: f64 = 0.2;
/// Default learning rate for weight training.
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
/// Default number of full-batch epochs.
pub const DEFAULT_EPOCHS: usize = 500;
/// Cap on positive x negative pairs before sampling kicks in.
pub const MAX_RANK_PAIRS: usize = 10_000;

const INTERROGATIVE_LEADS: [&str; 7] = ["what", "why", "how", "when", "where", "who", "which"];

/// The six per-chunk lexical features, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub entity_density: f64,
    pub question_presence: f64,
    pub number_density: f64,
    pub position_score: f64,
    pub tfidf_mean: f64,
    pub discourse_score: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; FEATURE_DIM] {
        [
            self.entity_density,
            self.question_presence,
            self.number_density,
            self.position_score,
            self.tfidf_mean,
            self.discourse_score,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_DIM]) -> Self {
        FeatureVector {
            entity_density: a[0],
            question_presence: a[1],
            number_density: a[2],
            position_score: a[3],
            tfidf_mean: a[4],
            discourse_score: a[5],
        }
    }

    pub fn zeros() -> Self {
        FeatureVector::from_array([0.0; FEATURE_DIM])
    }
}

/// How features map to a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    /// Plain dot product; in [0, 1] whenever the nonnegative weights sum to <= 1.
    WeightedSum,
    /// Sigmoid of (dot + bias).
    SigmoidLinear,
}

/// Weight vector mapping features to a salience score.
#[derive(Debug, Clone, PartialEq)]
pub struct SalienceWeights {
    pub weights: [f64; FEATURE_DIM],
    pub bias: f64,
    pub mode: ScoreMode,
}

impl SalienceWeights {
    /// Weighted-sum weights; rejects negative or non-finite entries.
    pub fn weighted_sum(weights: [f64; FEATURE_DIM]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig {
                key: "weights",
                reason: "weighted_sum mode requires finite, nonnegative weights".into(),
            });
        }
        Ok(SalienceWeights {
            weights,
            bias: 0.0,
            mode: ScoreMode::WeightedSum,
        })
    }

    pub fn sigmoid_linear(weights: [f64; FEATURE_DIM], bias: f64) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::InvalidConfig {
                key: "weights",
                reason: "weights and bias must be finite".into(),
            });
        }
        Ok(SalienceWeights {
            weights,
            bias,
            mode: ScoreMode::SigmoidLinear,
        })
    }
}

impl Default for SalienceWeights {
    fn default() -> Self {
        SalienceWeights {
            weights: DEFAULT_WEIGHTS,
            bias: 0.0,
            mode: ScoreMode::WeightedSum,
        }
    }
}

/// Salience of one chunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SalienceScore {
    pub chunk_id: usize,
    pub score: f64,
}

/// A feature vector labeled with whether its chunk bears an answer.
#[derive(Debug, Clone, Copy)]
pub struct LabeledChunk {
    pub features: FeatureVector,
    pub is_answer_bearing: bool,
}

/// Corpus-wide term statistics backing the TF-IDF feature.
///
/// Document frequency is counted over chunks: `df[t]` is the number of
/// chunks (across the whole corpus) containing term `t` at least once.
#[derive(Debug, Clone, Default)]
pub struct CorpusStats {
    chunk_count: usize,
    df: HashMap<String, u32>,
}

impl CorpusStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_chunk(&mut self, chunk: &Chunk) {
        self.chunk_count += 1;
        let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();
        for t in chunk.tokens.iter().filter(|t| t.is_lexical()) {
            let lower = t.text.to_lowercase();
            if seen.insert(lower.clone()) {
                *self.df.entry(lower).or_insert(0) += 1;
            }
        }
    }

    pub fn from_chunks<'a>(chunks: impl IntoIterator<Item = &'a Chunk>) -> Self {
        let mut stats = Self::new();
        for c in chunks {
            stats.add_chunk(c);
        }
        stats
    }

    pub fn chunk_count(&self) -> usize {
        self.chunk_count
    }

    /// Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
    pub fn idf(&self, term_lower: &str) -> f64 {
        let df = self.df.get(term_lower).copied().unwrap_or(0) as f64;
        ((1.0 + self.chunk_count as f64) / (1.0 + df)).ln() + 1.0
    }
}

/// Per-document statistics snapshot used by feature extraction.
#[derive(Debug, Clone)]
pub struct DocContext {
    chunk_count: usize,
    /// Min-max normalized mean TF-IDF per chunk, indexed by chunk_id.
    tfidf_norm: Vec<f64>,
}

impl DocContext {
    /// Build the per-document snapshot: raw mean TF-IDF per chunk, then
    /// min-max normalization across the document's chunks.
    pub fn new(doc_chunks: &[Chunk], corpus: &CorpusStats) -> Self {
        let raw: Vec<f64> = doc_chunks.iter().map(|c| mean_tfidf(c, corpus)).collect();
        let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tfidf_norm = if raw.is_empty() || max - min <= f64::EPSILON * max.abs().max(1.0) {
            vec![0.0; raw.len()]
        } else {
            raw.iter().map(|v| (v - min) / (max - min)).collect()
        };
        DocContext {
            chunk_count: doc_chunks.len(),
            tfidf_norm,
        }
    }

    pub fn chunk_count(&self) -> usize {
        self.chunk_count
    }
}

fn mean_tfidf(chunk: &Chunk, corpus: &CorpusStats) -> f64 {
    let lexical: Vec<String> = chunk
        .tokens
        .iter()
        .filter(|t| t.is_lexical())
        .map(|t| t.text.to_lowercase())
        .collect();
    if lexical.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for term in &lexical {
        *counts.entry(term.as_str()).or_insert(0) += 1;
    }
    let n = lexical.len() as f64;
    // token-weighted mean: sum over tokens of tf(term)/n * idf(term)
    let mut acc = 0.0;
    for (term, count) in counts {
        let tf = count as f64 / n;
        acc += count as f64 * tf * corpus.idf(term);
    }
    acc / n
}

/// Discourse marker lexicon: lowercased word-sequence phrases.
#[derive(Debug, Clone)]
pub struct DiscourseLexicon {
    phrases: Vec<Vec<String>>,
}

impl DiscourseLexicon {
    /// Parse the lexicon format: one phrase per line, `#` comments, UTF-8.
    pub fn parse(text: &str) -> Self {
        let mut phrases = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let words: Vec<String> = line.split_whitespace().map(|w| w.to_lowercase()).collect();
            if !words.is_empty() {
                phrases.push(words);
            }
        }
        DiscourseLexicon { phrases }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

impl Default for DiscourseLexicon {
    fn default() -> Self {
        Self::parse(include_str!("../assets/discourse_markers.txt"))
    }
}

/// Extract the six features for one chunk given its document context.
pub fn extract_features(
    chunk: &Chunk,
    ctx: &DocContext,
    lexicon: &DiscourseLexicon,
) -> FeatureVector {
    let total = chunk.tokens.len();
    if total == 0 {
        let mut f = FeatureVector::zeros();
        f.position_score = position_score(chunk.chunk_id, ctx.chunk_count);
        return f;
    }
    let totalf = total as f64;

    let mut entities = 0usize;
    let mut numbers = 0usize;
    let mut question_marks = 0usize;
    let mut interrogative_sentences = 0usize;
    let mut sentence_start = true;
    for tok in &chunk.tokens {
        match tok.kind {
            TokenKind::Word => {
                if is_entity_token(tok, sentence_start) {
                    entities += 1;
                }
                if sentence_start {
                    let lower = tok.text.to_lowercase();
                    if INTERROGATIVE_LEADS.contains(&lower.as_str()) {
                        interrogative_sentences += 1;
                    }
                }
                sentence_start = false;
            }
            TokenKind::Number => {
                numbers += 1;
                sentence_start = false;
            }
            TokenKind::Punctuation => {
                if tok.text == "?" {
                    question_marks += 1;
                }
                if matches!(tok.text.as_str(), "." | "!" | "?") {
                    sentence_start = true;
                }
            }
        }
    }

    let discourse_hits = count_discourse_hits(&chunk.tokens, lexicon);
    let tfidf = ctx.tfidf_norm.get(chunk.chunk_id).copied().unwrap_or(0.0);

    FeatureVector {
        entity_density: entities as f64 / totalf,
        question_presence: (((question_marks + interrogative_sentences) as f64) / 3.0).min(1.0),
        number_density: numbers as f64 / totalf,
        position_score: position_score(chunk.chunk_id, ctx.chunk_count),
        tfidf_mean: tfidf,
        discourse_score: (discourse_hits as f64 / totalf).clamp(0.0, 1.0),
    }
}

fn is_entity_token(tok: &Token, sentence_start: bool) -> bool {
    let mut chars = tok.text.chars();
    let first_upper = chars.next().map(|c| c.is_uppercase()).unwrap_or(false);
    let all_caps = tok.text.chars().count() >= 2 && tok.text.chars().all(|c| c.is_uppercase());
    (first_upper && !sentence_start) || all_caps
}

fn count_discourse_hits(tokens: &[Token], lexicon: &DiscourseLexicon) -> usize {
    let words: Vec<String> = tokens
        .iter()
        .filter(|t| t.is_lexical())
        .map(|t| t.text.to_lowercase())
        .collect();
    let mut hits = 0;
    for i in 0..words.len() {
        for phrase in &lexicon.phrases {
            if phrase.len() <= words.len() - i
                && phrase.iter().zip(&words[i..]).all(|(a, b)| a == b)
            {
                hits += 1;
            }
        }
    }
    hits
}

fn position_score(chunk_id: usize, chunk_count: usize) -> f64 {
    if chunk_count <= 1 || chunk_id == 0 || chunk_id + 1 == chunk_count {
        return 1.0;
    }
    let from_edge = chunk_id.min(chunk_count - 1 - chunk_id) as f64;
    let half = chunk_count.div_ceil(2) as f64;
    (1.0 - from_edge / half).max(0.0)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Map a feature vector to a salience score under the given weights.
pub fn score(features: &FeatureVector, w: &SalienceWeights) -> f64 {
    let dot: f64 = w
        .weights
        .iter()
        .zip(features.as_array())
        .map(|(wi, fi)| wi * fi)
        .sum();
    match w.mode {
        ScoreMode::WeightedSum => dot,
        ScoreMode::SigmoidLinear => sigmoid(dot + w.bias),
    }
}

/// Score a whole document's chunks; index i scores chunk_id i.
pub fn score_chunks(features: &[FeatureVector], w: &SalienceWeights) -> Vec<SalienceScore> {
    features
        .iter()
        .enumerate()
        .map(|(chunk_id, f)| SalienceScore {
            chunk_id,
            score: score(f, w),
        })
        .collect()
}

/// Positive x negative index pairs for the ranking loss: all pairs when
/// their count is at most [`MAX_RANK_PAIRS`], else that many sampled
/// uniformly (with replacement) from the seeded generator.
pub fn ranking_pairs(data: &[LabeledChunk], seed: u64) -> Result<Vec<(usize, usize)>> {
    let pos: Vec<usize> = (0..data.len()).filter(|&i| data[i].is_answer_bearing).collect();
    let neg: Vec<usize> = (0..data.len()).filter(|&i| !data[i].is_answer_bearing).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateTraining(
            "ranking loss needs at least one positive and one negative example".into(),
        ));
    }
    let total = pos.len() * neg.len();
    if total <= MAX_RANK_PAIRS {
        let mut pairs = Vec::with_capacity(total);
        for &i in &pos {
            for &j in &neg {
                pairs.push((i, j));
            }
        }
        Ok(pairs)
    } else {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut pairs = Vec::with_capacity(MAX_RANK_PAIRS);
        for _ in 0..MAX_RANK_PAIRS {
            let i = pos[rng.random_range(0..pos.len())];
            let j = neg[rng.random_range(0..neg.len())];
            pairs.push((i, j));
        }
        Ok(pairs)
    }
}

fn scores_sigmoid(weights: &[f64; FEATURE_DIM], bias: f64, data: &[LabeledChunk]) -> Vec<f64> {
    data.iter()
        .map(|d| {
            let z: f64 = weights
                .iter()
                .zip(d.features.as_array())
                .map(|(w, f)| w * f)
                .sum::<f64>()
                + bias;
            sigmoid(z)
        })
        .collect()
}

/// Write loss (mean binary cross-entropy over sigmoid scores) plus ranking
/// loss (mean hinge over the given pairs, margin `gamma`).
pub fn write_rank_loss(
    weights: &[f64; FEATURE_DIM],
    bias: f64,
    data: &[LabeledChunk],
    pairs: &[(usize, usize)],
    gamma: f64,
) -> f64 {
    const EPS: f64 = 1e-12;
    let s = scores_sigmoid(weights, bias, data);
    let n = data.len() as f64;
    let mut bce = 0.0;
    for (d, si) in data.iter().zip(&s) {
        let si = si.clamp(EPS, 1.0 - EPS);
        bce -= if d.is_answer_bearing { si.ln() } else { (1.0 - si).ln() };
    }
    bce /= n;

    let mut rank = 0.0;
    if !pairs.is_empty() {
        for &(i, j) in pairs {
            rank += (gamma + s[j] - s[i]).max(0.0);
        }
        rank /= pairs.len() as f64;
    }
    bce + rank
}

/// Analytic gradient of [`write_rank_loss`] in (weights, bias).
pub fn write_rank_gradient(
    weights: &[f64; FEATURE_DIM],
    bias: f64,
    data: &[LabeledChunk],
    pairs: &[(usize, usize)],
    gamma: f64,
) -> ([f64; FEATURE_DIM], f64) {
    let s = scores_sigmoid(weights, bias, data);
    let n = data.len() as f64;
    let mut gw = [0.0; FEATURE_DIM];
    let mut gb = 0.0;

    // d(bce)/dz_i = (s_i - y_i) / n
    for (d, si) in data.iter().zip(&s) {
        let y = if d.is_answer_bearing { 1.0 } else { 0.0 };
        let dz = (si - y) / n;
        for (g, f) in gw.iter_mut().zip(d.features.as_array()) {
            *g += dz * f;
        }
        gb += dz;
    }

    // hinge active when gamma + s_j - s_i > 0: d/dz_j = s_j(1-s_j), d/dz_i = -s_i(1-s_i)
    if !pairs.is_empty() {
        let m = pairs.len() as f64;
        for &(i, j) in pairs {
            if gamma + s[j] - s[i] > 0.0 {
                let dzi = -s[i] * (1.0 - s[i]) / m;
                let dzj = s[j] * (1.0 - s[j]) / m;
                for (g, f) in gw.iter_mut().zip(data[i].features.as_array()) {
                    *g += dzi * f;
                }
                for (g, f) in gw.iter_mut().zip(data[j].features.as_array()) {
                    *g += dzj * f;
                }
                gb += dzi + dzj;
            }
        }
    }
    (gw, gb)
}

/// Train sigmoid-linear weights by full-batch gradient descent on the
/// write + ranking loss. The loss must be non-increasing across epochs
/// (tolerance 1e-9) or training aborts with a divergence error.
pub fn train_scorer(
    data: &[LabeledChunk],
    gamma: f64,
    learning_rate: f64,
    epochs: usize,
    seed: u64,
) -> Result<SalienceWeights> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training data"));
    }
    let pairs = ranking_pairs(data, seed)?;

    let mut weights = [0.0; FEATURE_DIM];
    let mut bias = 0.0;
    let mut prev = f64::INFINITY;
    for epoch in 0..epochs {
        let loss = write_rank_loss(&weights, bias, data, &pairs, gamma);
        if loss > prev + 1e-9 {
            return Err(Error::TrainingDiverged {
                epoch,
                prev,
                curr: loss,
            });
        }
        prev = loss;
        let (gw, gb) = write_rank_gradient(&weights, bias, data, &pairs, gamma);
        for (w, g) in weights.iter_mut().zip(gw) {
            *w -= learning_rate * g;
        }
        bias -= learning_rate * gb;
    }
    SalienceWeights::sigmoid_linear(weights, bias)
}
