//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid config `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },

    /// An operation that requires at least one element received none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A memory id was not found in the store.
    #[error("unknown memory id `{0}`")]
    UnknownMemId(String),

    /// Eviction was requested on an empty semantic tier.
    #[error("semantic memory is empty, nothing to evict")]
    EmptyStore,

    /// Training data cannot support the requested objective.
    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    /// Gradient descent increased the loss beyond tolerance.
    #[error("training diverged at epoch {epoch}: loss {prev} -> {curr}")]
    TrainingDiverged { epoch: usize, prev: f64, curr: f64 },

    /// The packed context contained no blocks to answer from.
    #[error("cannot answer from an empty context")]
    EmptyContext,

    /// A referenced document is missing from the corpus.
    #[error("document `{0}` not found in corpus")]
    MissingDocument(String),

    /// Input file violated the expected schema.
    #[error("parse error in {location}: {reason}")]
    Parse { location: String, reason: String },

    /// Input file declares a dataset schema version we do not read.
    #[error("unsupported schema version: {0}")]
    SchemaVersion(String),

    /// The completion endpoint could not be reached.
    #[error("endpoint request failed after {attempts} attempt(s): {reason}")]
    Network { attempts: u32, reason: String },

    /// The completion endpoint returned an unusable body.
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
