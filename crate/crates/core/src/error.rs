use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: duplicate cell ({entity}, {year}, {feature})")]
    DuplicateCell {
        line: u64,
        entity: String,
        year: i32,
        feature: String,
    },

    #[error("incomplete panel: missing cell ({entity}, {year}, {feature})")]
    IncompletePanel {
        entity: String,
        year: i32,
        feature: String,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("entity not found: {0}")]
    NotFound(String),

    #[error("no candidates: panel holds only the self entity")]
    NoCandidates,

    #[error("insufficient history: need at least 2 years, got {0}")]
    InsufficientHistory(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no signal: every feature of the self is fully masked under the cosine measure")]
    NoSignal,

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient features: need at least 2, got {0}")]
    InsufficientFeatures(usize),

    #[error("undefined correlation: constant input vector")]
    UndefinedCorrelation,

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
