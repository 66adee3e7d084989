use thiserror::Error;

/// Errors raised by the library. Each variant names the module that
/// produced it so batch front-ends can report provenance.
#[derive(Debug, Error)]
pub enum Error {
    #[error("[{module}] domain error: {msg}")]
    Domain { module: &'static str, msg: String },

    #[error("[{module}] shape mismatch: {msg}")]
    Shape { module: &'static str, msg: String },

    #[error("[{module}] numerical failure: {msg}")]
    Numerical { module: &'static str, msg: String },

    #[error("[{module}] tolerance error: {msg}")]
    Tolerance { module: &'static str, msg: String },

    #[error("[{module}] precondition violated: {msg}")]
    Precondition { module: &'static str, msg: String },

    #[error("[{module}] invalid input: {msg}")]
    Invalid { module: &'static str, msg: String },

    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Domain { module, .. }
            | Error::Shape { module, .. }
            | Error::Numerical { module, .. }
            | Error::Tolerance { module, .. }
            | Error::Precondition { module, .. }
            | Error::Invalid { module, .. } => module,
            Error::Parse { .. } | Error::Io { .. } => "cli",
        }
    }
}

macro_rules! err {
    ($kind:ident, $module:expr, $($arg:tt)*) => {
        $crate::error::Error::$kind { module: $module, msg: format!($($arg)*) }
    };
}
pub(crate) use err;
