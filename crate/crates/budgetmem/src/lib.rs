//! BudgetMem: budget-constrained selective memory for long-document QA.
//!
//! The pipeline chunks documents, scores chunk salience from lexical
//! features, stores a budgeted subset in a dual-tier memory, retrieves with
//! BM25 (optionally hybrid-fused with a deterministic dense stand-in), packs
//! citation-tagged context under a token budget, and answers extractively so
//! the whole loop runs without a model. The evaluation module reproduces the
//! budget-sweep / naive-baseline / length-scaling experiment protocol.

pub mod answer;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod memory;
pub mod packing;
pub mod retrieval;
pub mod salience;
pub mod text_prep;

pub use error::{Error, Result};
