//! Citation-tagged context assembly under a token budget.
//!
//! Episodic entries come first in temporal order, then semantic entries in
//! rank order. Blocks are included whole; packing stops before the first
//! block that would exceed the budget. If even the first block exceeds the
//! budget it is included truncated so the context is never empty. The
//! system prompt does not count against the budget.

use crate::error::{Error, Result};
use crate::memory::MemoryEntry;
use crate::text_prep::tokenize;

/// Fixed system prompt for the answering model.
pub const SYSTEM_PROMPT: &str = "You are a memory-augmented assistant. Use ONLY the provided \
MEMORY_SNIPPETS to answer questions. For each factual claim, include [CITE: MEM_ID] inline. \
If information is not in memory, state that you don't know.";

/// Default context token budget.
pub const DEFAULT_TOKEN_BUDGET: usize = 3000;

/// One packed block: citation header plus the chunk's original text.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedBlock {
    pub mem_id: String,
    pub header: String,
    pub body: String,
}

/// The token-budgeted context fed to an answerer.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedContext {
    pub system_prompt: String,
    pub blocks: Vec<PackedBlock>,
    pub total_tokens: usize,
    pub truncated: bool,
}

impl PackedContext {
    /// Blocks only: header, newline, body, blank line between blocks.
    pub fn render_blocks(&self) -> String {
        self.blocks
            .iter()
            .map(|b| format!("{}\n{}", b.header, b.body))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// Full context: system prompt, blank line, then the blocks.
    pub fn render(&self) -> String {
        format!("{}\n\n{}", self.system_prompt, self.render_blocks())
    }
}

/// Render the citation header for an entry:
/// `[MEM_ID: <mem_id>] | Source: <doc_id>:<chunk_id> | Time: <stored_at>`.
pub fn format_block(entry: &MemoryEntry) -> (String, String) {
    let header = format!(
        "[MEM_ID: {}] | Source: {}:{} | Time: {}",
        entry.mem_id, entry.chunk.doc_id, entry.chunk.chunk_id, entry.stored_at
    );
    (header, entry.chunk.text.clone())
}

fn block_tokens(header: &str, body: &str) -> usize {
    tokenize(header).len() + tokenize(body).len()
}

/// Cut text after its first `max_tokens` tokens, preserving original
/// spacing up to the cut.
fn truncate_text(text: &str, max_tokens: usize) -> String {
    if max_tokens == 0 {
        return String::new();
    }
    let tokens = tokenize(text);
    if tokens.len() <= max_tokens {
        return text.to_string();
    }
    text[..tokens[max_tokens - 1].end_offset()].to_string()
}

/// Pack episodic then semantic entries into whole blocks under
/// `token_budget` tokens.
pub fn pack(
    episodic: &[&MemoryEntry],
    semantic_ranked: &[&MemoryEntry],
    token_budget: usize,
) -> Result<PackedContext> {
    if token_budget < 1 {
        return Err(Error::InvalidConfig {
            key: "token_budget",
            reason: "must be at least 1".into(),
        });
    }
    let mut blocks = Vec::new();
    let mut total = 0usize;
    let mut truncated = false;

    for entry in episodic.iter().chain(semantic_ranked.iter()) {
        let (header, body) = format_block(entry);
        let cost = block_tokens(&header, &body);
        if total + cost > token_budget {
            if blocks.is_empty() {
                // first block alone exceeds the budget: keep it, cut to fit
                let header_tokens = tokenize(&header).len();
                let (header, body) = if header_tokens >= token_budget {
                    (truncate_text(&header, token_budget), String::new())
                } else {
                    (header.clone(), truncate_text(&body, token_budget - header_tokens))
                };
                total = block_tokens(&header, &body);
                blocks.push(PackedBlock {
                    mem_id: entry.mem_id.clone(),
                    header,
                    body,
                });
                truncated = true;
            }
            break;
        }
        total += cost;
        blocks.push(PackedBlock {
            mem_id: entry.mem_id.clone(),
            header,
            body,
        });
    }

    Ok(PackedContext {
        system_prompt: SYSTEM_PROMPT.to_string(),
        blocks,
        total_tokens: total,
        truncated,
    })
}
