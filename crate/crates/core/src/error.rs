use std::path::PathBuf;

use crate::lm::TokenId;
use crate::vocab::EntityId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("vocabulary {0} contains no entities")]
    EmptyVocabulary(PathBuf),

    #[error("vocabulary line {line}: {message}")]
    VocabularyLine { line: usize, message: String },

    #[error("training corpus is empty")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("token id {0} is outside the backend vocabulary")]
    UnknownTokenId(TokenId),

    #[error("prefix of {len} tokens exceeds the context limit of {limit}")]
    ContextOverflow { len: usize, limit: usize },

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("score vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("class name generation produced no text")]
    ClassNameGeneration,

    #[error("seeds not found in vocabulary: {}", .0.join(", "))]
    UnresolvedSeeds(Vec<String>),

    #[error("entity {0} ranked twice in one iteration")]
    DuplicateRank(EntityId),

    #[error("conditioning length {conditioning} must be shorter than the template ({total} tokens)")]
    TemplateTooShort { conditioning: usize, total: usize },

    #[error("{path} line {line}: {message}")]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("trie cache: {0}")]
    Cache(String),

    #[error("model file: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
