use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed caller input: bad dimensions, lengths, labels.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch at layer {layer}: {msg}")]
    Shape { layer: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("box out of bounds: {0}")]
    Bounds(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("lexicon error at line {line}: {msg}")]
    Lexicon { line: usize, msg: String },

    #[error("training error: {0}")]
    Training(String),

    /// A self-check (gradient check) failed.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class: 2 config/structure, 3 I/O and
    /// file formats, 4 training, 5 failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Shape { .. } | Error::Config(_) | Error::Bounds(_) => 2,
            Error::Format(_)
            | Error::Catalog(_)
            | Error::Lexicon { .. }
            | Error::Report(_)
            | Error::Io { .. } => 3,
            Error::Training(_) => 4,
            Error::Verification(_) => 5,
        }
    }
}
