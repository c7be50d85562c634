//! BM25 sparse retrieval over stored memory, a deterministic hashed-trigram
//! dense stand-in, and hybrid score fusion.
//!
//! BM25 uses the Okapi form with the +1-inside-log IDF so scores stay
//! nonnegative on tiny stores:
//!
//! ```text
//! idf(t)  = ln((N - n_t + 0.5) / (n_t + 0.5) + 1)
//! s(d, q) = sum over query tokens t of
//!           idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
//! ```
//!
//! The dense side is a stand-in: hashed character trigrams folded into a
//! fixed-dimension vector and L2-normalized. Any `text -> DenseVector`
//! function can replace it; the fusion math never looks inside.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::memory::{MemoryEntry, MemoryStore};
use crate::text_prep::tokenize;

/// Canonical Okapi defaults.
pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;
/// Default dense weight in hybrid fusion.
pub const DEFAULT_ALPHA: f64 = 0.7;
/// Default retrieval depth.
pub const DEFAULT_TOP_K: usize = 3;
/// Default dense stand-in dimension.
pub const DEFAULT_EMBED_DIM: usize = 256;

/// Which scorer drives retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalMode {
    /// BM25 only — the experimental default.
    SparseOnly,
    /// Min-max normalized fusion of dense and sparse scores.
    Hybrid,
}

impl std::str::FromStr for RetrievalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse_only" | "sparse" => Ok(RetrievalMode::SparseOnly),
            "hybrid" => Ok(RetrievalMode::Hybrid),
            other => Err(Error::InvalidConfig {
                key: "retrieval_mode",
                reason: format!("expected sparse_only or hybrid, got {other:?}"),
            }),
        }
    }
}

/// Inverted index over lowercased word and number tokens.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    postings: HashMap<String, Vec<(usize, u32)>>,
    doc_lengths: Vec<usize>,
    avg_doc_length: f64,
    doc_count: usize,
    k1: f64,
    b: f64,
}

impl Bm25Index {
    /// Index plain texts; entry i scores as index i.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, k1: f64, b: f64) -> Self {
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_lengths = Vec::new();
        for (i, text) in texts.into_iter().enumerate() {
            let terms = index_terms(text);
            doc_lengths.push(terms.len());
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in terms {
                *counts.entry(t).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push((i, tf));
            }
        }
        let doc_count = doc_lengths.len();
        let avg_doc_length = if doc_count == 0 {
            0.0
        } else {
            doc_lengths.iter().sum::<usize>() as f64 / doc_count as f64
        };
        Bm25Index {
            postings,
            doc_lengths,
            avg_doc_length,
            doc_count,
            k1,
            b,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_lengths(&self) -> &[usize] {
        &self.doc_lengths
    }

    /// Term frequency of `term` in entry `i`, for inspection in tests.
    pub fn term_frequency(&self, term: &str, i: usize) -> u32 {
        self.postings
            .get(&term.to_lowercase())
            .and_then(|p| p.iter().find(|(d, _)| *d == i))
            .map(|(_, tf)| *tf)
            .unwrap_or(0)
    }
}

fn index_terms(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.is_lexical())
        .map(|t| t.text.to_lowercase())
        .collect()
}

/// Build a BM25 index over memory entries' chunk texts.
pub fn build_index<'a>(
    entries: impl IntoIterator<Item = &'a MemoryEntry>,
    k1: f64,
    b: f64,
) -> Bm25Index {
    Bm25Index::from_texts(entries.into_iter().map(|e| e.chunk.text.as_str()), k1, b)
}

/// Okapi BM25 scores for a query. Only entries sharing at least one term
/// with the query are returned, ordered by entry index.
pub fn bm25_scores(index: &Bm25Index, query: &str) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    if index.doc_count == 0 {
        return Vec::new();
    }
    let n = index.doc_count as f64;
    for term in index_terms(query) {
        let Some(postings) = index.postings.get(&term) else {
            continue;
        };
        let n_t = postings.len() as f64;
        let idf = ((n - n_t + 0.5) / (n_t + 0.5) + 1.0).ln();
        for &(doc, tf) in postings {
            let dl = index.doc_lengths[doc] as f64;
            let tf = tf as f64;
            let norm = tf * (index.k1 + 1.0)
                / (tf + index.k1 * (1.0 - index.b + index.b * dl / index.avg_doc_length));
            *acc.entry(doc).or_insert(0.0) += idf * norm;
        }
    }
    acc.into_iter().collect()
}

/// Unit-normalized dense vector (all-zero for empty input).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    pub values: Vec<f64>,
}

impl DenseVector {
    pub fn cosine(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x00000100000001b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic dense stand-in: hashed character trigram counts folded
/// into `dim` buckets, then L2-normalized. Identical text gives an
/// identical vector on every platform.
pub fn embed(text: &str, dim: usize) -> Result<DenseVector> {
    if dim < 16 {
        return Err(Error::InvalidConfig {
            key: "embed_dim",
            reason: format!("dimension must be at least 16, got {dim}"),
        });
    }
    let mut normalized = String::with_capacity(text.len());
    let mut last_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            if !last_space && !normalized.is_empty() {
                normalized.push(' ');
            }
            last_space = true;
        } else {
            for lc in c.to_lowercase() {
                normalized.push(lc);
            }
            last_space = false;
        }
    }
    while normalized.ends_with(' ') {
        normalized.pop();
    }

    let chars: Vec<char> = normalized.chars().collect();
    let mut values = vec![0.0; dim];
    if chars.is_empty() {
        return Ok(DenseVector { values });
    }
    let mut gram = String::new();
    if chars.len() < 3 {
        let bucket = (fnv1a(normalized.as_bytes()) % dim as u64) as usize;
        values[bucket] += 1.0;
    } else {
        for w in chars.windows(3) {
            gram.clear();
            gram.extend(w);
            let bucket = (fnv1a(gram.as_bytes()) % dim as u64) as usize;
            values[bucket] += 1.0;
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    Ok(DenseVector { values })
}

/// Min-max normalize both score lists over the union of their candidates
/// (missing scores count as 0 before normalization; a constant list maps
/// to all zeros), then fuse as `alpha * dense + (1 - alpha) * sparse`.
/// Returned in descending fused order, ties by lower entry index.
pub fn hybrid_fuse(
    dense: &[(usize, f64)],
    sparse: &[(usize, f64)],
    alpha: f64,
) -> Result<Vec<(usize, f64)>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig {
            key: "alpha",
            reason: format!("must be in [0, 1], got {alpha}"),
        });
    }
    let mut union: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for &(i, s) in dense {
        union.entry(i).or_insert((0.0, 0.0)).0 = s;
    }
    for &(i, s) in sparse {
        union.entry(i).or_insert((0.0, 0.0)).1 = s;
    }
    if union.is_empty() {
        return Ok(Vec::new());
    }
    let dense_vals: Vec<f64> = union.values().map(|v| v.0).collect();
    let sparse_vals: Vec<f64> = union.values().map(|v| v.1).collect();
    let dn = minmax_normalize(&dense_vals);
    let sn = minmax_normalize(&sparse_vals);
    let mut fused: Vec<(usize, f64)> = union
        .keys()
        .enumerate()
        .map(|(row, &i)| (i, alpha * dn[row] + (1.0 - alpha) * sn[row]))
        .collect();
    fused.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(fused)
}

fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// One retrieved entry with its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub mem_id: String,
    pub fused_score: f64,
    pub sparse_score: f64,
    pub dense_score: f64,
}

/// Ranked retrieval output. Episodic entries, when present, are prepended
/// ahead of the score-ranked semantic entries, so the non-increasing score
/// order holds over the semantic segment of the list.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub ranked: Vec<RankedEntry>,
}

impl RetrievalResult {
    pub fn mem_ids(&self) -> Vec<&str> {
        self.ranked.iter().map(|r| r.mem_id.as_str()).collect()
    }
}

/// Score every semantic entry, take the top `k` (ties broken by lower
/// stored_at), prepend all current episodic entries, and bump the access
/// count of every returned entry.
pub fn retrieve(
    store: &mut MemoryStore,
    query: &str,
    k: usize,
    mode: RetrievalMode,
    alpha: f64,
    k1: f64,
    b: f64,
) -> Result<RetrievalResult> {
    if k < 1 {
        return Err(Error::InvalidConfig {
            key: "top_k",
            reason: "must be at least 1".into(),
        });
    }

    let semantic: Vec<(String, u64)> = store
        .semantic_entries()
        .map(|e| (e.mem_id.clone(), e.stored_at))
        .collect();
    let index = build_index(store.semantic_entries(), k1, b);
    let sparse = bm25_scores(&index, query);
    let sparse_full: Vec<f64> = {
        let mut v = vec![0.0; semantic.len()];
        for &(i, s) in &sparse {
            v[i] = s;
        }
        v
    };

    let (fused_full, dense_full) = match mode {
        RetrievalMode::SparseOnly => (sparse_full.clone(), vec![0.0; semantic.len()]),
        RetrievalMode::Hybrid => {
            let q = embed(query, DEFAULT_EMBED_DIM)?;
            let dense: Vec<(usize, f64)> = store
                .semantic_entries()
                .enumerate()
                .map(|(i, e)| Ok((i, q.cosine(&embed(&e.chunk.text, DEFAULT_EMBED_DIM)?))))
                .collect::<Result<_>>()?;
            let fused = hybrid_fuse(&dense, &sparse, alpha)?;
            let mut fused_full = vec![0.0; semantic.len()];
            for &(i, s) in &fused {
                fused_full[i] = s;
            }
            let mut dense_full = vec![0.0; semantic.len()];
            for &(i, s) in &dense {
                dense_full[i] = s;
            }
            (fused_full, dense_full)
        }
    };

    let mut order: Vec<usize> = (0..semantic.len()).collect();
    order.sort_by(|&a, &b| {
        fused_full[b]
            .partial_cmp(&fused_full[a])
            .unwrap()
            .then(semantic[a].1.cmp(&semantic[b].1))
    });

    let mut ranked = Vec::new();
    let mut included: HashSet<String> = HashSet::new();
    for e in store.episodic_entries() {
        if included.insert(e.mem_id.clone()) {
            ranked.push(RankedEntry {
                mem_id: e.mem_id.clone(),
                fused_score: 0.0,
                sparse_score: 0.0,
                dense_score: 0.0,
            });
        }
    }
    for &i in order.iter().take(k) {
        if included.insert(semantic[i].0.clone()) {
            ranked.push(RankedEntry {
                mem_id: semantic[i].0.clone(),
                fused_score: fused_full[i],
                sparse_score: sparse_full[i],
                dense_score: dense_full[i],
            });
        }
    }

    for r in &ranked {
        store.record_access(&r.mem_id)?;
    }
    Ok(RetrievalResult { ranked })
}
