use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("WAV decoding failed: {0}")]
    Wav(#[from] hound::Error),

    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pattern `{pattern}` spans {expected} measure(s) but {found} were supplied")]
    SpanMismatch {
        pattern: String,
        expected: usize,
        found: usize,
    },

    #[error("no pattern in the vocabulary can cover measure {measure}")]
    Infeasible { measure: usize },

    #[error("cannot decode a song with no measures")]
    EmptySong,

    #[error("transcription covers {transcription} measure(s) but the bar-line track has {bars}")]
    MeasureCountMismatch { transcription: usize, bars: usize },

    #[error("unknown pattern id `{0}`")]
    UnknownPattern(String),

    #[error("audio too short: {samples} samples, need at least {needed}")]
    AudioTooShort { samples: usize, needed: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Wav(hound::Error::IoError(_)))
    }
}
