use alloc::boxed::Box;
use alloc::string::String;

use crate::cache::CacheError;
use crate::oracle::BackendError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("duplicate instance id `{0}`")]
    DuplicateId(String),

    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid attribute: {0}")]
    Attribute(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("cell ({instance}, {attr}) is still pending")]
    PendingCell { instance: String, attr: String },

    #[error("sampling stalled after {calls} filter calls with {positives} positive and {negatives} negative samples")]
    SamplingStalled {
        calls: u64,
        positives: usize,
        negatives: usize,
    },

    #[error("oracle backend failed after {attempts} attempt(s): {source}")]
    Backend {
        attempts: u32,
        #[source]
        source: BackendError,
    },

    #[error("malformed oracle response: {0}")]
    MalformedResponse(String),

    #[error(transparent)]
    Cache(#[from] CacheError),

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: u32) -> Self {
        match self {
            e @ Error::Iteration { .. } => e,
            e => Error::Iteration {
                iteration,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, skipping iteration tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Iteration { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures caused by the oracle (transport, malformed replies, replay misses).
    pub fn is_oracle(&self) -> bool {
        matches!(
            self.root(),
            Error::Backend { .. } | Error::MalformedResponse(_)
        )
    }
}
