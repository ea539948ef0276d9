use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("format error at row {row}: {msg}")]
    Format { row: usize, msg: String },

    #[error("domain error at row {row}, column {col}: value {value} must be positive")]
    Domain { row: usize, col: usize, value: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("degenerate triangle (signed area {0})")]
    DegenerateGeometry(f64),

    #[error("matrix is not symmetric positive definite (pivot {pivot})")]
    NotSpd { pivot: usize },

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("iteration diverged at step {iteration}: {msg}")]
    Divergence { iteration: usize, msg: String },

    #[error("subdomain {index}: {source}")]
    Subdomain {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown table id {0:?}")]
    UnknownTable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_subdomain(self, index: usize) -> Error {
        Error::Subdomain { index, source: Box::new(self) }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotSpd { .. }
            | Error::Breakdown(_)
            | Error::Divergence { .. }
            | Error::DegenerateGeometry(_) => true,
            Error::Subdomain { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Process exit status used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            1
        } else {
            2
        }
    }
}
