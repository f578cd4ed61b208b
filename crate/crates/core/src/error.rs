use std::path::PathBuf;

/// Errors produced by the metric, the statistics and the evaluation tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The file could not be opened or read.
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file is readable but not in a raster format we decode.
    #[error("unsupported image format in {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },

    /// The stream claims a supported format but is damaged or truncated.
    #[error("corrupt image stream in {path}: {detail}")]
    CorruptImage { path: PathBuf, detail: String },

    #[error("cannot encode image to {path}: {detail}")]
    Encode { path: PathBuf, detail: String },

    /// Sample buffer and dimensions disagree, or a sample is not finite.
    #[error("invalid image plane: {0}")]
    InvalidPlane(String),

    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("image too small: {width}x{height}, need at least {min_width}x{min_height}")]
    TooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Correlation with a constant vector (zero variance, all pairs tied).
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// Manifest content errors. `row` is the 1-based data row number.
    #[error("manifest{}: {message}", row.map(|r| format!(" row {r}")).unwrap_or_default())]
    Manifest { row: Option<usize>, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// Tuning could not finish; `trace` holds every evaluation made so far.
    #[error("tuning failed: {message}")]
    Tuning {
        message: String,
        trace: Vec<crate::tuner::TracePoint>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn mismatch(a: (usize, usize), b: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_width: a.0,
            left_height: a.1,
            right_width: b.0,
            right_height: b.1,
        }
    }
}
