use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by parsing, model IO, and inference entry points.
///
/// Numeric kernels (Viterbi, MRF decoding, grid searches) panic on broken
/// internal invariants instead of returning these; `Error` is reserved for
/// conditions caused by input data or caller configuration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A note id referenced by an alignment or evaluation pairing does not
    /// exist on the side it points into.
    #[error("unknown note id {id:?} referenced by {referrer}")]
    UnknownNote { id: String, referrer: String },

    /// Standard MIDI file data that cannot be decoded. `offset` is the byte
    /// position at which decoding failed.
    #[error("malformed MIDI data at byte {offset}: {msg}")]
    MidiParse { offset: usize, msg: String },

    /// A malformed line in one of the tab-separated corpus formats.
    /// `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Tsv { path: PathBuf, line: usize, msg: String },

    /// Structurally valid input that violates a documented precondition
    /// (empty performance, non-monotone onsets, zero-duration grid, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A serialized model file that fails validation after deserializing
    /// (dangling child ids, non-normalizable rows, wrong table sizes, ...).
    #[error("invalid model: {0}")]
    Model(String),

    /// Filesystem-level failure while reading or writing corpus/model files.
    /// The cause is folded into the message rather than exposed as a source,
    /// so callers that print error chains do not repeat it.
    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },

    /// JSON (de)serialization failure for model files.
    #[error("{path}: {cause}")]
    Json { path: PathBuf, cause: serde_json::Error },
}

impl Error {
    /// Convenience constructor used by file loaders.
    pub fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io { path: path.into(), cause }
    }

    /// Convenience constructor used by model loaders.
    pub fn json(path: impl Into<PathBuf>, cause: serde_json::Error) -> Self {
        Error::Json { path: path.into(), cause }
    }
}
