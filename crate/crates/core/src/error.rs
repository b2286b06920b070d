use std::path::PathBuf;

use thiserror::Error;

use crate::dialogue::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("corpus failed validation with {} violation(s)", .0.violations.len())]
    Validation(ValidationReport),

    #[error("argument {argument:?} is the head of several chains (chain indices {chains:?})")]
    AmbiguousHead { argument: String, chains: Vec<usize> },

    #[error("unknown edge kind {kind} for recipe {recipe}")]
    UnknownKind { kind: String, recipe: String },

    #[error("antecedent {antecedent} does not precede span {span}")]
    OrderViolation { span: usize, antecedent: usize },

    #[error("corpus contains no gold coreference chains")]
    NoGoldChains,

    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss { loss: f64, epoch: usize, step: usize },

    #[error("split {0} is empty")]
    EmptySplit(String),

    #[error("dialogue {0} has no utterances")]
    EmptyDialogue(String),

    #[error("node {0} has no state")]
    MissingState(usize),

    #[error("no prediction for pairs {0:?}")]
    MissingPrediction(Vec<PairKey>),

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("configuration error: {0}")]
    Config(String),
}

/// Identifies one argument pair: (dialogue id, pair index).
pub type PairKey = (String, usize);

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
