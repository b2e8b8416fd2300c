use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("vocab_size {requested} too small: {minimum} initial symbols")]
    VocabTooSmall { requested: usize, minimum: usize },

    #[error("token id {0} out of range")]
    IdOutOfRange(u32),

    #[error("empty chunk list")]
    EmptyChunks,

    #[error("unknown chunk id {0}")]
    UnknownChunk(String),

    #[error("empty token list")]
    EmptyTokens,

    #[error("degenerate_embedding")]
    DegenerateEmbedding,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector")]
    ZeroVector,

    #[error("empty index")]
    EmptyIndex,

    #[error("missing embedding for id {0}")]
    MissingEmbedding(String),

    #[error("non-finite value in embedding for id {0}")]
    NonFinite(String),

    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(u32, u32),

    #[error("weights must be non-negative and sum to 1 (got {0}, {1})")]
    InvalidWeights(f64, f64),

    #[error("mode {0} requires a score that is absent for every candidate")]
    MissingScore(String),

    #[error("unknown fusion mode {0:?}")]
    UnknownMode(String),

    #[error("no queries")]
    NoQueries,

    #[error("no evaluable queries")]
    NoEvaluableQueries,

    #[error("query {0} missing from qrels")]
    MissingQrels(String),

    #[error("empty query")]
    EmptyQuery,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("digest mismatch for {0}")]
    DigestMismatch(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn format(what: impl Into<String>, detail: impl ToString) -> Self {
        Error::Format {
            what: what.into(),
            detail: detail.to_string(),
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
