//! Answer production from a packed context: a deterministic extractive
//! oracle (the default), and an optional chat-completion HTTP endpoint.
//!
//! The extractive path splits block bodies into sentences at `.`, `!` and
//! `?` boundaries and returns the sentence with the highest unigram-overlap
//! F1 against the question's content words (stopwords removed). Ties go to
//! the earlier block, then the earlier sentence. The returned answer cites
//! exactly the block its sentence came from.

use std::collections::HashMap;
use std::collections::HashSet;
use std::sync::OnceLock;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::packing::PackedContext;
use crate::text_prep::tokenize;

/// Where an answer came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerSource {
    Extractive,
    ExternalModel,
}

/// An answer with its citations.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub text: String,
    pub cited_mem_ids: Vec<String>,
    pub source: AnswerSource,
}

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        include_str!("../assets/stopwords.txt")
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Lowercased lexical tokens minus stopwords.
fn content_words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.is_lexical())
        .map(|t| t.text.to_lowercase())
        .filter(|w| !stopwords().contains(w.as_str()))
        .collect()
}

/// Bag-of-token overlap F1 between two content-word lists.
fn overlap_f1(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for w in a {
        *counts.entry(w.as_str()).or_insert(0) += 1;
    }
    let mut common = 0i64;
    for w in b {
        if let Some(c) = counts.get_mut(w.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / a.len() as f64;
    let r = common as f64 / b.len() as f64;
    2.0 * p * r / (p + r)
}

/// Split text into sentences at `.`, `!`, `?` boundaries; the terminator
/// stays with its sentence. A trailing fragment without a terminator is a
/// sentence too.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut start = 0usize;
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            let s = text[start..end].trim();
            if !s.is_empty() {
                sentences.push(s);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail);
    }
    sentences
}

/// Pick the packed-context sentence that best overlaps the question.
pub fn answer_extractive(context: &PackedContext, question: &str) -> Result<Answer> {
    if context.blocks.is_empty() {
        return Err(Error::EmptyContext);
    }
    let question_words = content_words(question);
    let mut best: Option<(f64, usize, usize, &str, &str)> = None;
    for (block_idx, block) in context.blocks.iter().enumerate() {
        for (sent_idx, sentence) in split_sentences(&block.body).into_iter().enumerate() {
            let words = content_words(sentence);
            let score = overlap_f1(&words, &question_words);
            let better = match &best {
                None => true,
                Some((s, bi, si, _, _)) => {
                    score > *s || (score == *s && (block_idx, sent_idx) < (*bi, *si))
                }
            };
            if better {
                best = Some((score, block_idx, sent_idx, sentence, &block.mem_id));
            }
        }
    }
    match best {
        Some((_, _, _, sentence, mem_id)) => Ok(Answer {
            text: sentence.to_string(),
            cited_mem_ids: vec![mem_id.to_string()],
            source: AnswerSource::Extractive,
        }),
        None => Err(Error::EmptyContext),
    }
}

/// Connection settings for a chat-completion endpoint. `base_url` is the
/// full completions URL (for example `http://localhost:8000/v1/chat/completions`).
#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://localhost:8000/v1/chat/completions".into(),
            model: "local-model".into(),
            api_key: None,
            timeout_secs: 30,
            retries: 2,
        }
    }
}

/// Extract `[CITE: <id>]` tags in order of first appearance.
pub fn parse_citations(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find("[CITE:") {
        rest = &rest[pos + "[CITE:".len()..];
        if let Some(end) = rest.find(']') {
            let id = rest[..end].trim();
            if !id.is_empty() && !out.iter().any(|o| o == id) {
                out.push(id.to_string());
            }
            rest = &rest[end + 1..];
        } else {
            break;
        }
    }
    out
}

/// Ask a chat-completion endpoint to answer from the packed context.
///
/// Request body: `{"model": ..., "messages": [{"role": "system", "content":
/// <system prompt>}, {"role": "user", "content": <blocks + question>}],
/// "temperature": 0}`. The response must contain
/// `choices[0].message.content`.
pub fn answer_external(
    context: &PackedContext,
    question: &str,
    endpoint: &EndpointConfig,
) -> Result<Answer> {
    if context.blocks.is_empty() {
        return Err(Error::EmptyContext);
    }
    let user_content = format!(
        "MEMORY_SNIPPETS:\n\n{}\n\nQuestion: {}",
        context.render_blocks(),
        question
    );
    let body = serde_json::json!({
        "model": endpoint.model,
        "messages": [
            {"role": "system", "content": context.system_prompt},
            {"role": "user", "content": user_content},
        ],
        "temperature": 0,
    });

    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(endpoint.timeout_secs))
        .build()
        .map_err(|e| Error::Network {
            attempts: 0,
            reason: e.to_string(),
        })?;

    let attempts = endpoint.retries + 1;
    let mut last_err = String::new();
    for _ in 0..attempts {
        let mut req = client.post(&endpoint.base_url).json(&body);
        if let Some(key) = &endpoint.api_key {
            req = req.bearer_auth(key);
        }
        match req.send() {
            Ok(resp) if resp.status().is_success() => {
                let value: serde_json::Value = resp
                    .json()
                    .map_err(|e| Error::MalformedResponse(e.to_string()))?;
                let content = value
                    .pointer("/choices/0/message/content")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| {
                        Error::MalformedResponse(
                            "missing choices[0].message.content".into(),
                        )
                    })?;
                return Ok(Answer {
                    text: content.to_string(),
                    cited_mem_ids: parse_citations(content),
                    source: AnswerSource::ExternalModel,
                });
            }
            Ok(resp) => {
                last_err = format!("http status {}", resp.status());
            }
            Err(e) => {
                last_err = e.to_string();
            }
        }
    }
    Err(Error::Network {
        attempts,
        reason: last_err,
    })
}
