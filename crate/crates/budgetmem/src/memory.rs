//! Budget-constrained selection and the dual-tier memory store.
//!
//! Batch mode selects once per document (`select_budget`) and writes the
//! winners straight to the semantic tier; streaming mode appends to the
//! episodic ring (`write`), consolidates overflow into the semantic tier,
//! and evicts by LFU-with-salience priority when the semantic tier is full.
//!
//! Eviction removes the semantic entry minimizing
//! `alpha * access_count / max(1, max_access) + beta * salience`,
//! ties broken by oldest `stored_at`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{BufRead, Write as IoWrite};
use std::path::Path;

use crate::error::{Error, Result};
use crate::salience::SalienceScore;
use crate::text_prep::Chunk;

/// Default episodic ring capacity (recent-chunk window).
pub const DEFAULT_EPISODIC_CAPACITY: usize = 10;
/// Default semantic capacity before eviction kicks in.
pub const DEFAULT_SEMANTIC_CAPACITY: usize = 100_000;
/// Default eviction weights (access, salience).
pub const DEFAULT_EVICTION_PARAMS: (f64, f64) = (0.5, 0.5);

/// Storage budget configuration. When `threshold` is set it drives batch
/// selection instead of `budget_ratio`; both values are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetConfig {
    pub budget_ratio: f64,
    pub threshold: Option<f64>,
    pub episodic_capacity: usize,
    pub semantic_capacity: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            budget_ratio: 0.3,
            threshold: None,
            episodic_capacity: DEFAULT_EPISODIC_CAPACITY,
            semantic_capacity: DEFAULT_SEMANTIC_CAPACITY,
        }
    }
}

impl BudgetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget_ratio > 0.0 && self.budget_ratio <= 1.0) {
            return Err(Error::InvalidConfig {
                key: "budget_ratio",
                reason: format!("must be in (0, 1], got {}", self.budget_ratio),
            });
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfig {
                    key: "threshold",
                    reason: format!("must be in [0, 1], got {t}"),
                });
            }
        }
        if self.episodic_capacity < 1 {
            return Err(Error::InvalidConfig {
                key: "episodic_capacity",
                reason: "must be at least 1".into(),
            });
        }
        if self.semantic_capacity < 1 {
            return Err(Error::InvalidConfig {
                key: "semantic_capacity",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Which tier an entry lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Episodic,
    Semantic,
}

impl Tier {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Episodic => "episodic",
            Tier::Semantic => "semantic",
        }
    }
}

/// A stored chunk with bookkeeping. `mem_id` is `m<seq>` where `seq`
/// equals `stored_at`, a logical timestamp from the store clock.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub mem_id: String,
    pub chunk: Chunk,
    pub salience: f64,
    pub access_count: u64,
    pub stored_at: u64,
    pub tier: Tier,
}

/// Dual-tier memory: a temporal episodic ring plus a semantic map.
#[derive(Debug, Clone)]
pub struct MemoryStore {
    episodic: VecDeque<MemoryEntry>,
    semantic: BTreeMap<u64, MemoryEntry>,
    clock: u64,
    episodic_capacity: usize,
    semantic_capacity: usize,
    alpha_access: f64,
    beta_salience: f64,
}

impl MemoryStore {
    pub fn new(config: &BudgetConfig) -> Result<Self> {
        config.validate()?;
        Ok(MemoryStore {
            episodic: VecDeque::new(),
            semantic: BTreeMap::new(),
            clock: 0,
            episodic_capacity: config.episodic_capacity,
            semantic_capacity: config.semantic_capacity,
            alpha_access: DEFAULT_EVICTION_PARAMS.0,
            beta_salience: DEFAULT_EVICTION_PARAMS.1,
        })
    }

    pub fn with_eviction_params(mut self, alpha_access: f64, beta_salience: f64) -> Self {
        self.alpha_access = alpha_access;
        self.beta_salience = beta_salience;
        self
    }

    /// Streaming write: append to the episodic ring. Overflow consolidates
    /// the oldest episodic entry into the semantic tier verbatim; a full
    /// semantic tier then evicts until back within capacity.
    pub fn write(&mut self, chunk: Chunk, salience: f64) -> String {
        let entry = self.make_entry(chunk, salience, Tier::Episodic);
        let id = entry.mem_id.clone();
        self.episodic.push_back(entry);
        while self.episodic.len() > self.episodic_capacity {
            let mut oldest = self.episodic.pop_front().expect("ring not empty");
            oldest.tier = Tier::Semantic;
            self.semantic.insert(oldest.stored_at, oldest);
            while self.semantic.len() > self.semantic_capacity {
                self.evict().expect("semantic tier not empty");
            }
        }
        id
    }

    /// Batch write: place a selected chunk directly in the semantic tier.
    pub fn write_semantic(&mut self, chunk: Chunk, salience: f64) -> String {
        let entry = self.make_entry(chunk, salience, Tier::Semantic);
        let id = entry.mem_id.clone();
        self.semantic.insert(entry.stored_at, entry);
        while self.semantic.len() > self.semantic_capacity {
            self.evict().expect("semantic tier not empty");
        }
        id
    }

    fn make_entry(&mut self, chunk: Chunk, salience: f64, tier: Tier) -> MemoryEntry {
        let stored_at = self.clock;
        self.clock += 1;
        MemoryEntry {
            mem_id: format!("m{stored_at}"),
            chunk,
            salience,
            access_count: 0,
            stored_at,
            tier,
        }
    }

    /// Remove and return the id of the semantic entry with minimal priority
    /// `alpha * normalized_access + beta * salience`; ties evict the oldest.
    pub fn evict(&mut self) -> Result<String> {
        let max_access = self
            .semantic
            .values()
            .map(|e| e.access_count)
            .max()
            .ok_or(Error::EmptyStore)?
            .max(1);
        let mut victim: Option<(f64, u64)> = None;
        for e in self.semantic.values() {
            let priority = self.alpha_access * (e.access_count as f64 / max_access as f64)
                + self.beta_salience * e.salience;
            let candidate = (priority, e.stored_at);
            let better = match victim {
                None => true,
                Some(best) => candidate.0 < best.0 || (candidate.0 == best.0 && candidate.1 < best.1),
            };
            if better {
                victim = Some(candidate);
            }
        }
        let (_, stored_at) = victim.expect("checked non-empty");
        let removed = self.semantic.remove(&stored_at).expect("key exists");
        Ok(removed.mem_id)
    }

    /// Increment and return an entry's access count.
    pub fn record_access(&mut self, mem_id: &str) -> Result<u64> {
        let seq = parse_mem_id(mem_id)?;
        if let Some(e) = self.semantic.get_mut(&seq) {
            e.access_count += 1;
            return Ok(e.access_count);
        }
        if let Some(e) = self.episodic.iter_mut().find(|e| e.stored_at == seq) {
            e.access_count += 1;
            return Ok(e.access_count);
        }
        Err(Error::UnknownMemId(mem_id.to_string()))
    }

    pub fn get(&self, mem_id: &str) -> Option<&MemoryEntry> {
        let seq = parse_mem_id(mem_id).ok()?;
        self.semantic
            .get(&seq)
            .or_else(|| self.episodic.iter().find(|e| e.stored_at == seq))
    }

    /// Episodic entries in temporal (stored_at) order.
    pub fn episodic_entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.episodic.iter()
    }

    /// Semantic entries in stored_at order.
    pub fn semantic_entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.semantic.values()
    }

    pub fn episodic_len(&self) -> usize {
        self.episodic.len()
    }

    pub fn semantic_len(&self) -> usize {
        self.semantic.len()
    }

    pub fn len(&self) -> usize {
        self.episodic.len() + self.semantic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn episodic_capacity(&self) -> usize {
        self.episodic_capacity
    }

    pub fn semantic_capacity(&self) -> usize {
        self.semantic_capacity
    }

    /// Write the snapshot format: one entry per line, tab-separated fields
    /// `mem_id tier salience access_count stored_at doc_id token_start
    /// token_len text`, entries ordered by stored_at. Text has `\`, tab,
    /// CR and LF escaped.
    pub fn save_snapshot<W: IoWrite>(&self, mut out: W) -> Result<()> {
        let mut entries: Vec<&MemoryEntry> = self.episodic.iter().chain(self.semantic.values()).collect();
        entries.sort_by_key(|e| e.stored_at);
        for e in entries {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.mem_id,
                e.tier.as_str(),
                e.salience,
                e.access_count,
                e.stored_at,
                e.chunk.doc_id,
                e.chunk.token_start,
                e.chunk.token_len,
                escape_text(&e.chunk.text),
            )?;
        }
        Ok(())
    }

    pub fn save_snapshot_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.save_snapshot(std::io::BufWriter::new(file))
    }

    /// Load a snapshot written by [`save_snapshot`]. `chunk_stride` (chunk
    /// size minus overlap) recovers chunk ids from token starts; token
    /// offsets inside reloaded chunks are chunk-local.
    pub fn load_snapshot<R: BufRead>(reader: R, config: &BudgetConfig, chunk_stride: usize) -> Result<Self> {
        let mut store = MemoryStore::new(config)?;
        let mut max_seq = 0u64;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(9, '\t').collect();
            if fields.len() != 9 {
                return Err(Error::Parse {
                    location: format!("snapshot line {}", lineno + 1),
                    reason: format!("expected 9 tab-separated fields, got {}", fields.len()),
                });
            }
            let parse_err = |field: &str, what: &str| Error::Parse {
                location: format!("snapshot line {}", lineno + 1),
                reason: format!("bad {what}: {field:?}"),
            };
            let mem_id = fields[0].to_string();
            let stored_at = parse_mem_id(&mem_id)?;
            let tier = match fields[1] {
                "episodic" => Tier::Episodic,
                "semantic" => Tier::Semantic,
                other => return Err(parse_err(other, "tier")),
            };
            let salience: f64 = fields[2].parse().map_err(|_| parse_err(fields[2], "salience"))?;
            let access_count: u64 = fields[3].parse().map_err(|_| parse_err(fields[3], "access_count"))?;
            let stored_at_field: u64 = fields[4].parse().map_err(|_| parse_err(fields[4], "stored_at"))?;
            if stored_at_field != stored_at {
                return Err(parse_err(fields[4], "stored_at (does not match mem_id)"));
            }
            let token_start: usize = fields[6].parse().map_err(|_| parse_err(fields[6], "token_start"))?;
            let token_len: usize = fields[7].parse().map_err(|_| parse_err(fields[7], "token_len"))?;
            let text = unescape_text(fields[8]);
            let chunk = Chunk {
                chunk_id: if chunk_stride > 0 { token_start / chunk_stride } else { 0 },
                doc_id: fields[5].to_string(),
                tokens: crate::text_prep::tokenize(&text),
                token_start,
                token_len,
                section: None,
                text,
            };
            let entry = MemoryEntry {
                mem_id,
                chunk,
                salience,
                access_count,
                stored_at,
                tier,
            };
            max_seq = max_seq.max(stored_at + 1);
            match tier {
                Tier::Episodic => store.episodic.push_back(entry),
                Tier::Semantic => {
                    store.semantic.insert(stored_at, entry);
                }
            }
        }
        store.clock = max_seq;
        Ok(store)
    }

    pub fn load_snapshot_file(path: &Path, config: &BudgetConfig, chunk_stride: usize) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::load_snapshot(std::io::BufReader::new(file), config, chunk_stride)
    }
}

fn parse_mem_id(mem_id: &str) -> Result<u64> {
    mem_id
        .strip_prefix('m')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::UnknownMemId(mem_id.to_string()))
}

pub(crate) fn escape_text(text: &str) -> String {
    text.replace('\\', "\\\\")
        .replace('\t', "\\t")
        .replace('\n', "\\n")
        .replace('\r', "\\r")
}

pub(crate) fn unescape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Top-K batch selection: keep `K = max(1, floor(ratio * M))` chunk ids by
/// descending score, ties broken by lower chunk id. Selections nest: a
/// smaller ratio always yields a subset of a larger one.
pub fn select_budget(scores: &[SalienceScore], budget_ratio: f64) -> Result<BTreeSet<usize>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("scores"));
    }
    if !(budget_ratio > 0.0 && budget_ratio <= 1.0) {
        return Err(Error::InvalidConfig {
            key: "budget_ratio",
            reason: format!("must be in (0, 1], got {budget_ratio}"),
        });
    }
    let k = budget_count(scores.len(), budget_ratio);
    let mut order: Vec<&SalienceScore> = scores.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.chunk_id.cmp(&b.chunk_id))
    });
    Ok(order.into_iter().take(k).map(|s| s.chunk_id).collect())
}

/// `K = max(1, floor(ratio * M))`. The tiny epsilon compensates for decimal
/// ratios that are not exactly representable (0.3 * 60 must give 18).
pub fn budget_count(total_chunks: usize, budget_ratio: f64) -> usize {
    ((budget_ratio * total_chunks as f64 + 1e-9).floor() as usize).max(1)
}

/// Threshold gating for streaming mode: `{i : s_i > tau}`. May be empty.
pub fn select_threshold(scores: &[SalienceScore], tau: f64) -> BTreeSet<usize> {
    scores
        .iter()
        .filter(|s| s.score > tau)
        .map(|s| s.chunk_id)
        .collect()
}

/// Fraction of chunks stored.
pub fn storage_ratio(stored_chunks: usize, total_chunks: usize) -> f64 {
    stored_chunks as f64 / total_chunks as f64
}

/// The headline efficiency metric: 1 - storage ratio.
pub fn memory_saving(ratio: f64) -> f64 {
    1.0 - ratio
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_prep::TokenizedDoc;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn chunk(doc_id: &str, chunk_id: usize, text: &str) -> Chunk {
        let doc = TokenizedDoc::new(doc_id, text);
        Chunk {
            chunk_id,
            doc_id: doc_id.to_string(),
            tokens: doc.tokens.clone(),
            token_start: chunk_id * 120,
            token_len: doc.tokens.len(),
            section: None,
            text: text.to_string(),
        }
    }

    fn store(w: usize, cap: usize) -> MemoryStore {
        MemoryStore::new(&BudgetConfig {
            episodic_capacity: w,
            semantic_capacity: cap,
            ..BudgetConfig::default()
        })
        .unwrap()
    }

    fn scores(values: &[f64]) -> Vec<SalienceScore> {
        values
            .iter()
            .enumerate()
            .map(|(chunk_id, &score)| SalienceScore { chunk_id, score })
            .collect()
    }

    #[test]
    fn fifo_consolidation_moves_oldest_to_semantic() {
        let mut s = store(2, 100);
        let a = s.write(chunk("d", 0, "alpha"), 0.5);
        let _b = s.write(chunk("d", 1, "beta"), 0.5);
        let _c = s.write(chunk("d", 2, "gamma"), 0.5);
        assert_eq!(s.episodic_len(), 2);
        assert_eq!(s.semantic_len(), 1);
        let sem: Vec<&str> = s.semantic_entries().map(|e| e.mem_id.as_str()).collect();
        assert_eq!(sem, vec![a.as_str()]);
        let epi: Vec<&str> = s.episodic_entries().map(|e| e.chunk.text.as_str()).collect();
        assert_eq!(epi, vec!["beta", "gamma"]);
    }

    #[test]
    fn capacities_hold_after_many_writes() {
        let mut s = store(5, 10);
        for i in 0..100 {
            s.write(chunk("d", i, &format!("text {i}")), 0.1);
        }
        assert_eq!(s.episodic_len(), 5);
        assert_eq!(s.semantic_len(), 10);
    }

    #[test]
    fn single_write_stays_episodic() {
        let mut s = store(10, 10);
        let id = s.write(chunk("d", 0, "only"), 0.9);
        assert_eq!(s.episodic_len(), 1);
        assert_eq!(s.semantic_len(), 0);
        assert_eq!(s.get(&id).unwrap().tier, Tier::Episodic);
    }

    #[test]
    fn eviction_prefers_low_access() {
        let mut s = store(1, 100);
        let a = s.write_semantic(chunk("d", 0, "hot"), 0.5);
        let b = s.write_semantic(chunk("d", 1, "cold"), 0.5);
        for _ in 0..5 {
            s.record_access(&a).unwrap();
        }
        let evicted = s.evict().unwrap();
        assert_eq!(evicted, b);
    }

    #[test]
    fn eviction_prefers_low_salience_at_equal_access() {
        let mut s = store(1, 100);
        let _keep = s.write_semantic(chunk("d", 0, "important"), 0.9);
        let drop = s.write_semantic(chunk("d", 1, "filler"), 0.1);
        // alpha = beta = 0.5: priorities 0.45 vs 0.05
        let evicted = s.evict().unwrap();
        assert_eq!(evicted, drop);
    }

    #[test]
    fn eviction_matches_brute_force_scan() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..20 {
            let mut s = store(1, 1000);
            let n = rng.random_range(2..50);
            for i in 0..n {
                let id = s.write_semantic(chunk("d", i, &format!("t {i}")), rng.random_range(0.0..1.0));
                for _ in 0..rng.random_range(0..8) {
                    s.record_access(&id).unwrap();
                }
            }
            let max_access = s.semantic_entries().map(|e| e.access_count).max().unwrap().max(1);
            let expected = s
                .semantic_entries()
                .map(|e| {
                    let p = 0.5 * (e.access_count as f64 / max_access as f64) + 0.5 * e.salience;
                    (e.mem_id.clone(), p, e.stored_at)
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.2.cmp(&b.2)))
                .unwrap()
                .0;
            assert_eq!(s.evict().unwrap(), expected);
        }
    }

    #[test]
    fn evict_on_empty_semantic_fails() {
        let mut s = store(5, 5);
        assert!(matches!(s.evict(), Err(Error::EmptyStore)));
    }

    #[test]
    fn record_access_counts_up_and_rejects_unknown() {
        let mut s = store(5, 5);
        let id = s.write(chunk("d", 0, "x"), 0.5);
        assert_eq!(s.record_access(&id).unwrap(), 1);
        s.record_access(&id).unwrap();
        assert_eq!(s.record_access(&id).unwrap(), 3);
        assert!(matches!(s.record_access("m999"), Err(Error::UnknownMemId(_))));
        assert!(matches!(s.record_access("bogus"), Err(Error::UnknownMemId(_))));
    }

    #[test]
    fn select_budget_takes_floor_with_min_one() {
        let vals: Vec<f64> = (0..60).map(|i| i as f64 / 60.0).collect();
        let sel = select_budget(&scores(&vals), 0.3).unwrap();
        assert_eq!(sel.len(), 18);
        let all = select_budget(&scores(&vals), 1.0).unwrap();
        assert_eq!(all.len(), 60);
        let tiny = select_budget(&scores(&[0.2, 0.9]), 0.3).unwrap();
        assert_eq!(tiny.len(), 1);
        assert!(tiny.contains(&1));
    }

    #[test]
    fn select_budget_breaks_ties_by_lower_chunk_id() {
        let sel = select_budget(&scores(&[0.5, 0.5, 0.5, 0.5]), 0.5).unwrap();
        assert_eq!(sel.into_iter().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn select_budget_rejects_empty_and_bad_ratio() {
        assert!(select_budget(&[], 0.3).is_err());
        assert!(select_budget(&scores(&[0.1]), 0.0).is_err());
        assert!(select_budget(&scores(&[0.1]), 1.5).is_err());
    }

    #[test]
    fn selections_nest_across_ratios() {
        let mut rng = StdRng::seed_from_u64(37);
        for _ in 0..100 {
            let n = rng.random_range(1..200);
            let vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let sc = scores(&vals);
            let r1 = rng.random_range(0.01..1.0);
            let r2 = rng.random_range(r1..=1.0);
            let s1 = select_budget(&sc, r1).unwrap();
            let s2 = select_budget(&sc, r2).unwrap();
            assert!(s1.is_subset(&s2), "n={n} r1={r1} r2={r2}");
        }
    }

    #[test]
    fn select_threshold_filters_strictly_above() {
        let sc = scores(&[0.2, 0.5, 0.9]);
        let sel = select_threshold(&sc, 0.4);
        assert_eq!(sel.into_iter().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(select_threshold(&sc, 1.0).len(), 0);
        assert_eq!(select_threshold(&sc, 0.0).len(), 3);
    }

    #[test]
    fn storage_arithmetic() {
        assert!((memory_saving(0.276) - 0.724).abs() < 1e-12);
        assert_eq!(memory_saving(storage_ratio(60, 60)), 0.0);
        assert!((storage_ratio(18, 60) - 0.30).abs() < 1e-12);
        assert!((memory_saving(storage_ratio(18, 60)) - 0.70).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut s = store(2, 100);
        for i in 0..6 {
            let id = s.write(chunk("doc-1", i, &format!("line {i}\twith tab\nand newline")), 0.25 * i as f64 / 6.0);
            if i % 2 == 0 {
                s.record_access(&id).unwrap();
            }
        }
        let mut buf = Vec::new();
        s.save_snapshot(&mut buf).unwrap();
        let loaded = MemoryStore::load_snapshot(
            std::io::BufReader::new(buf.as_slice()),
            &BudgetConfig {
                episodic_capacity: 2,
                semantic_capacity: 100,
                ..BudgetConfig::default()
            },
            120,
        )
        .unwrap();
        assert_eq!(loaded.episodic_len(), s.episodic_len());
        assert_eq!(loaded.semantic_len(), s.semantic_len());
        let mut buf2 = Vec::new();
        loaded.save_snapshot(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn replayed_operation_sequence_is_identical() {
        let run = || {
            let mut s = store(3, 5);
            let mut ids = Vec::new();
            for i in 0..40 {
                ids.push(s.write(chunk("d", i, &format!("content {i}")), (i % 7) as f64 / 7.0));
                if i % 3 == 0 {
                    let _ = s.record_access(&ids[i / 2]);
                }
            }
            let mut buf = Vec::new();
            s.save_snapshot(&mut buf).unwrap();
            buf
        };
        assert_eq!(run(), run());
    }
}
