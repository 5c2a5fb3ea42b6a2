use thiserror::Error;

/// Errors raised by the model, sampler and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A non-finite or otherwise invalid state surfaced inside a Gibbs sweep.
    #[error("sampler aborted at iteration {iteration} in block `{block}`: {detail}")]
    SamplerAbort {
        iteration: usize,
        block: &'static str,
        detail: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 for bad settings,
    /// 3 for unreadable or inconsistent files, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Parse { .. }
            | Error::Data(_)
            | Error::Shape(_)
            | Error::Range(_)
            | Error::Io { .. } => 3,
            Error::Numerical(_) | Error::SamplerAbort { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
