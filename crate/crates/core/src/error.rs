use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One utterance that failed during augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceFailure {
    pub id: String,
    /// Token span of the chunk being processed, when the failure is chunk-local.
    pub span: Option<(usize, usize)>,
    pub message: String,
    pub provider_failure: bool,
}

impl fmt::Display for UtteranceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some((start, end)) => write!(f, "{} [{}..{}]: {}", self.id, start, end, self.message),
            None => write!(f, "{}: {}", self.id, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record at {location}: {reason}")]
    MalformedRecord { location: String, reason: String },

    #[error(
        "illegal BIO transition at {location}: `{label}` at token {position} does not continue a `{slot_type}` span"
    )]
    IllegalBioTransition {
        location: String,
        position: usize,
        label: String,
        slot_type: String,
    },

    #[error("unknown format `{0}`")]
    UnknownFormat(String),

    #[error("I/O failure on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("chunks are not contiguous: expected start {expected}, found {found}")]
    NonContiguousChunks { expected: usize, found: usize },

    #[error("language pair {source_lang}->{target_lang} is not supported by provider {provider}")]
    UnsupportedLanguage {
        provider: String,
        source_lang: String,
        target_lang: String,
    },

    #[error("translation provider unavailable: {0}")]
    ProviderUnavailable(String),

    #[error("translation provider rate limited the request: {0}")]
    RateLimited(String),

    #[error("translation provider rejected the request with HTTP {status}: {message}")]
    ProviderRejected { status: u16, message: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("translation of `{0}` came back empty")]
    EmptyTranslation(String),

    #[error("unknown language family `{0}`")]
    UnknownFamily(String),

    #[error("augmentation failed for {} utterance(s): {}", .0.len(), join_failures(.0))]
    Augmentation(Vec<UtteranceFailure>),

    #[error("label `{0}` is not in the model's label inventory")]
    UnknownLabelInventory(String),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    DivergenceDetected { epoch: usize, loss: f64 },

    #[error("invalid model file: {0}")]
    ModelFormat(String),
}

fn join_failures(failures: &[UtteranceFailure]) -> String {
    const SHOWN: usize = 5;
    let mut parts: Vec<String> = failures.iter().take(SHOWN).map(|f| f.to_string()).collect();
    if failures.len() > SHOWN {
        parts.push(format!("... and {} more", failures.len() - SHOWN));
    }
    parts.join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error originates from a translation backend rather than
    /// from the input data or configuration.
    pub fn is_provider_failure(&self) -> bool {
        match self {
            Error::ProviderUnavailable(_)
            | Error::RateLimited(_)
            | Error::ProviderRejected { .. }
            | Error::UnsupportedLanguage { .. } => true,
            Error::Augmentation(failures) => failures.iter().any(|f| f.provider_failure),
            _ => false,
        }
    }
}
