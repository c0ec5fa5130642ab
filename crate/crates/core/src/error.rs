use thiserror::Error;

/// Errors produced by corpus ingestion, model training, confidence
/// estimation, calibration, and triage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("score {score} out of range 0..={max_score} for {context}")]
    Range {
        context: String,
        score: i64,
        max_score: u32,
    },

    #[error("duplicate id '{id}' in {scope}")]
    DuplicateId { id: String, scope: String },

    #[error("unknown prompt '{prompt_id}' referenced by answer '{answer_id}'")]
    UnknownPrompt {
        prompt_id: String,
        answer_id: String,
    },

    #[error("insufficient data: prompt '{prompt_id}' has {available} records, requested {requested}")]
    InsufficientData {
        prompt_id: String,
        requested: usize,
        available: usize,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("training set is empty")]
    EmptyTrainSet,

    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("prediction for prompt '{expected}' requested on record from prompt '{actual}'")]
    PromptMismatch { expected: String, actual: String },

    #[error("reference bank is empty")]
    EmptyBank,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("embedding dimension {actual} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("input list is empty")]
    Empty,

    #[error("policy calibrated for method '{policy}' applied to '{given}' confidences")]
    MethodMismatch { policy: String, given: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("IGA analysis needs at least 2 prompts with second-rater scores, found {0}")]
    InsufficientRaterData(usize),

    #[error("unsupported model file version {found} (expected {expected})")]
    ModelVersion { expected: u32, found: u32 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
