//! Deterministic tokenization and overlapping chunking.
//!
//! The tokenizer is intentionally simple so that token counts are stable
//! across runs and platforms — every budget computation in the pipeline
//! (chunk windows, context packing) counts tokens produced here.
//!
//! Grammar, applied left to right over each whitespace-free span:
//!
//! ```text
//! NUMBER  := [0-9]+ ('.' [0-9]+)?          e.g. "42", "0.72"
//! ORDINAL := [0-9]+ ("st"|"nd"|"rd"|"th")  kept whole, classified as a word
//! WORD    := maximal run of alphabetic chars
//! PUNCT   := any other single char
//! ```
//!
//! A decimal point is part of a number only when digits follow it; an
//! ordinal suffix is consumed only when no alphanumeric char follows it.
//! Original casing is preserved in `Token::text`; callers lowercase where
//! they need case-insensitive matching.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Default chunk window in tokens (the experimental configuration).
pub const DEFAULT_CHUNK_SIZE: usize = 150;
/// Default overlap between consecutive chunks, in tokens.
pub const DEFAULT_CHUNK_OVERLAP: usize = 30;

/// Lexical class of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Number,
    Punctuation,
}

/// One token with its byte offset into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Byte offset of the first char of the token in the source string.
    pub char_offset: usize,
}

impl Token {
    /// Byte offset one past the last char of this token.
    pub fn end_offset(&self) -> usize {
        self.char_offset + self.text.len()
    }

    /// True for word and number tokens — the classes indexed for retrieval.
    pub fn is_lexical(&self) -> bool {
        matches!(self.kind, TokenKind::Word | TokenKind::Number)
    }
}

/// A named section covering a token range of a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionSpan {
    pub name: String,
    pub token_start: usize,
    pub token_end: usize,
}

/// A tokenized document plus the metadata chunking needs.
#[derive(Debug, Clone)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub source_meta: BTreeMap<String, String>,
    /// Section spans in token coordinates; empty when the source has none.
    pub sections: Vec<SectionSpan>,
    /// The raw source text, kept so chunks can carry exact substrings.
    pub text: String,
}

impl TokenizedDoc {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        TokenizedDoc {
            doc_id: doc_id.into(),
            tokens,
            source_meta: BTreeMap::new(),
            sections: Vec::new(),
            text,
        }
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// A contiguous token window of a document — the unit of storage and retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    /// 0-based position index within the document.
    pub chunk_id: usize,
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub token_start: usize,
    pub token_len: usize,
    pub section: Option<String>,
    /// Exact source substring from the first to the last token.
    pub text: String,
}

/// Tokenize text per the module grammar. Total function, deterministic.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut i = 0;

    while i < n {
        let (off, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i + 1;
            while j < n && chars[j].1.is_ascii_digit() {
                j += 1;
            }
            // decimal point stays inside the number only when digits follow
            if j + 1 < n && chars[j].1 == '.' && chars[j + 1].1.is_ascii_digit() {
                j += 2;
                while j < n && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                tokens.push(make_token(text, &chars, off, i, j, TokenKind::Number));
                i = j;
                continue;
            }
            // ordinal suffix: digits + st/nd/rd/th with no alphanumeric after
            if let Some(jj) = ordinal_end(&chars, j) {
                tokens.push(make_token(text, &chars, off, i, jj, TokenKind::Word));
                i = jj;
                continue;
            }
            tokens.push(make_token(text, &chars, off, i, j, TokenKind::Number));
            i = j;
            continue;
        }
        if c.is_alphabetic() {
            let mut j = i + 1;
            while j < n && chars[j].1.is_alphabetic() {
                j += 1;
            }
            tokens.push(make_token(text, &chars, off, i, j, TokenKind::Word));
            i = j;
            continue;
        }
        tokens.push(make_token(text, &chars, off, i, i + 1, TokenKind::Punctuation));
        i += 1;
    }
    tokens
}

fn ordinal_end(chars: &[(usize, char)], digits_end: usize) -> Option<usize> {
    const SUFFIXES: [[char; 2]; 4] = [['s', 't'], ['n', 'd'], ['r', 'd'], ['t', 'h']];
    if digits_end + 1 >= chars.len() {
        return None;
    }
    let a = chars[digits_end].1.to_ascii_lowercase();
    let b = chars[digits_end + 1].1.to_ascii_lowercase();
    if !SUFFIXES.iter().any(|s| s[0] == a && s[1] == b) {
        return None;
    }
    let end = digits_end + 2;
    if end < chars.len() && chars[end].1.is_alphanumeric() {
        return None;
    }
    Some(end)
}

fn make_token(
    text: &str,
    chars: &[(usize, char)],
    start_off: usize,
    _start: usize,
    end: usize,
    kind: TokenKind,
) -> Token {
    let end_off = if end < chars.len() {
        chars[end].0
    } else {
        text.len()
    };
    Token {
        text: text[start_off..end_off].to_string(),
        kind,
        char_offset: start_off,
    }
}

/// Split a tokenized document into overlapping windows of `size` tokens with
/// `overlap` shared tokens between consecutive windows.
///
/// Chunk starts advance by the stride `size - overlap`; the final chunk may
/// be shorter. A document with at most `size` tokens (including an empty
/// document) yields exactly one chunk.
pub fn chunk_document(doc: &TokenizedDoc, size: usize, overlap: usize) -> Result<Vec<Chunk>> {
    if size == 0 {
        return Err(Error::InvalidConfig {
            key: "chunk_size",
            reason: "chunk size must be at least 1".into(),
        });
    }
    if overlap >= size {
        return Err(Error::InvalidConfig {
            key: "chunk_overlap",
            reason: format!("overlap {overlap} must be smaller than chunk size {size}"),
        });
    }
    let stride = size - overlap;
    let n = doc.tokens.len();
    let mut chunks = Vec::new();
    let mut start = 0usize;
    loop {
        let len = size.min(n - start);
        chunks.push(build_chunk(doc, chunks.len(), start, len));
        if start + size >= n {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}

fn build_chunk(doc: &TokenizedDoc, chunk_id: usize, token_start: usize, token_len: usize) -> Chunk {
    let tokens = doc.tokens[token_start..token_start + token_len].to_vec();
    let text = if token_len == 0 {
        String::new()
    } else {
        let first = tokens[0].char_offset;
        let last = tokens[token_len - 1].end_offset();
        doc.text[first..last].to_string()
    };
    let section = doc
        .sections
        .iter()
        .find(|s| token_start >= s.token_start && token_start < s.token_end)
        .map(|s| s.name.clone());
    Chunk {
        chunk_id,
        doc_id: doc.doc_id.clone(),
        tokens,
        token_start,
        token_len,
        section,
        text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn empty_input_yields_no_tokens() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn whitespace_split_with_offsets() {
        let toks = tokenize("Paris is big");
        assert_eq!(texts(&toks), vec!["Paris", "is", "big"]);
        let offsets: Vec<usize> = toks.iter().map(|t| t.char_offset).collect();
        assert_eq!(offsets, vec![0, 6, 9]);
        assert!(toks.iter().all(|t| t.kind == TokenKind::Word));
    }

    #[test]
    fn decimal_rule_keeps_fraction_whole() {
        // enumerated by hand against the module grammar
        let toks = tokenize("Eq. 4 gives 0.72");
        assert_eq!(texts(&toks), vec!["Eq", ".", "4", "gives", "0.72"]);
        assert_eq!(toks[2].kind, TokenKind::Number);
        assert_eq!(toks[4].kind, TokenKind::Number);
        assert_eq!(toks[1].kind, TokenKind::Punctuation);
    }

    #[test]
    fn ordinal_kept_whole_as_word() {
        let toks = tokenize("the 21st run, 3rd place");
        assert_eq!(texts(&toks), vec!["the", "21st", "run", ",", "3rd", "place"]);
        assert_eq!(toks[1].kind, TokenKind::Word);
        assert_eq!(toks[4].kind, TokenKind::Word);
        // suffix followed by another letter is not an ordinal
        let toks = tokenize("2nds");
        assert_eq!(texts(&toks), vec!["2", "nds"]);
        assert_eq!(toks[0].kind, TokenKind::Number);
    }

    #[test]
    fn trailing_dot_is_punctuation() {
        let toks = tokenize("score 72. done");
        assert_eq!(texts(&toks), vec!["score", "72", ".", "done"]);
        assert_eq!(toks[1].kind, TokenKind::Number);
    }

    #[test]
    fn non_whitespace_content_is_fully_covered() {
        let samples = [
            "Eq. 4 gives 0.72",
            "hello,   world!! 3.14159 and 21st",
            "unicode: café 12°C — naïve",
            "a.b.c 1.2.3",
        ];
        for s in samples {
            let joined: String = tokenize(s).iter().map(|t| t.text.as_str()).collect();
            let stripped: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            assert_eq!(joined, stripped, "coverage failed for {s:?}");
        }
    }

    #[test]
    fn kind_number_iff_integer_or_decimal() {
        let toks = tokenize("a1 2b 0.5 7 21st x.9");
        for t in &toks {
            let is_num_pattern = !t.text.is_empty()
                && t.text.chars().all(|c| c.is_ascii_digit() || c == '.')
                && t.text.chars().filter(|c| *c == '.').count() <= 1
                && !t.text.starts_with('.')
                && !t.text.ends_with('.');
            assert_eq!(
                t.kind == TokenKind::Number,
                is_num_pattern,
                "token {:?}",
                t.text
            );
        }
    }

    // purely alphabetic words so each contributes exactly one token
    fn alpha_word(i: usize) -> String {
        let digits: String = i
            .to_string()
            .chars()
            .map(|c| (b'a' + (c as u8 - b'0')) as char)
            .collect();
        format!("w{digits}")
    }

    fn doc_with_n_tokens(n: usize) -> TokenizedDoc {
        let words: Vec<String> = (0..n).map(alpha_word).collect();
        TokenizedDoc::new("d", words.join(" "))
    }

    #[test]
    fn paper_sized_doc_chunks_as_expected() {
        let doc = doc_with_n_tokens(237);
        let chunks = chunk_document(&doc, 150, 30).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!((chunks[0].token_start, chunks[0].token_len), (0, 150));
        assert_eq!((chunks[1].token_start, chunks[1].token_len), (120, 117));
    }

    #[test]
    fn short_doc_yields_single_chunk() {
        let doc = doc_with_n_tokens(100);
        let chunks = chunk_document(&doc, 150, 30).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].token_len, 100);
    }

    #[test]
    fn long_doc_chunk_starts_follow_stride() {
        // 7200 tokens, stride 120: starts 0, 120, ..., 7080
        let doc = doc_with_n_tokens(7200);
        let chunks = chunk_document(&doc, 150, 30).unwrap();
        assert_eq!(chunks.len(), 60);
        for (i, c) in chunks.iter().enumerate() {
            assert_eq!(c.chunk_id, i);
            assert_eq!(c.token_start, i * 120);
        }
        assert_eq!(chunks.last().unwrap().token_len, 120);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let doc = doc_with_n_tokens(10);
        assert!(chunk_document(&doc, 0, 0).is_err());
        assert!(chunk_document(&doc, 10, 10).is_err());
        assert!(chunk_document(&doc, 10, 15).is_err());
    }

    #[test]
    fn empty_doc_yields_one_empty_chunk() {
        let doc = TokenizedDoc::new("d", "");
        let chunks = chunk_document(&doc, 150, 30).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].token_len, 0);
        assert_eq!(chunks[0].text, "");
    }

    #[test]
    fn chunk_text_is_exact_source_substring() {
        let src = "The cat sat.  The dog ran!   A bird flew over the old barn today, twice.";
        let doc = TokenizedDoc::new("d", src);
        for c in chunk_document(&doc, 5, 2).unwrap() {
            assert_eq!(&src[c.tokens[0].char_offset..c.tokens.last().unwrap().end_offset()], c.text);
        }
    }

    /// Closed form: M = 1 if N <= L else 1 + ceil((N - L) / (L - O)).
    fn chunk_count_formula(n: usize, l: usize, o: usize) -> usize {
        if n <= l {
            1
        } else {
            1 + (n - l).div_ceil(l - o)
        }
    }

    #[test]
    fn chunk_count_matches_formula_on_random_configs() {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        for _ in 0..300 {
            let l = rng.random_range(1..=200);
            let o = rng.random_range(0..l);
            let n = rng.random_range(0..=2000);
            let doc = doc_with_n_tokens(n);
            let chunks = chunk_document(&doc, l, o).unwrap();
            assert_eq!(
                chunks.len(),
                chunk_count_formula(n, l, o),
                "n={n} l={l} o={o}"
            );
            // coverage: every token index appears in at least one chunk
            let mut covered = vec![false; n];
            for c in &chunks {
                for i in c.token_start..c.token_start + c.token_len {
                    covered[i] = true;
                }
            }
            assert!(covered.iter().all(|&b| b), "coverage gap n={n} l={l} o={o}");
            // stride: consecutive starts advance by exactly L - O
            for w in chunks.windows(2) {
                assert_eq!(w[1].token_start - w[0].token_start, l - o);
            }
        }
    }

    #[test]
    fn chunking_is_deterministic() {
        let doc = doc_with_n_tokens(500);
        let a = chunk_document(&doc, 150, 30).unwrap();
        let b = chunk_document(&doc, 150, 30).unwrap();
        assert_eq!(a, b);
    }
}
