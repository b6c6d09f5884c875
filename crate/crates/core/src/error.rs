use std::path::PathBuf;

/// Errors raised by every stage of the detector.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error at {location}: {msg}")]
    Format { location: String, msg: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("config error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("scale error: {0}")]
    Scale(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("degenerate event: {0}")]
    Degenerate(String),

    #[error("undefined rate: {0}")]
    UndefinedRate(&'static str),

    #[error("label error: channel {0:?} is not in the label space")]
    Label(String),

    #[error("precondition error: {0}")]
    Precondition(String),

    #[error("spec error: {0}")]
    Spec(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config { line: None, msg: msg.into() }
    }

    pub(crate) fn config_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Config { line: Some(line), msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short machine-readable category, used by the CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Integrity(_) => "integrity",
            Error::Range(_) => "range",
            Error::Config { .. } => "config",
            Error::Scale(_) => "scale",
            Error::Input(_) => "input",
            Error::Degenerate(_) => "degenerate",
            Error::UndefinedRate(_) => "undefined-rate",
            Error::Label(_) => "label",
            Error::Precondition(_) => "precondition",
            Error::Spec(_) => "spec",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
