use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("sample rate {sample_rate_hz} Hz is below the required {required_hz} Hz")]
    Undersampled { sample_rate_hz: f64, required_hz: f64 },

    #[error("target at {position_m:?} lies outside the phantom bounds")]
    OutOfBounds { position_m: (f64, f64) },

    #[error("wire depths must be strictly increasing")]
    DepthsNotIncreasing,

    #[error("low/high transducers must be mounted Top/Bottom respectively")]
    MountMismatch,

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("regions file lacks required kinds: {kinds}")]
    MissingRegions { kinds: String },

    #[error("region does not intersect the image")]
    EmptyRegion,

    #[error("{metric} is undefined: {reason}")]
    UndefinedMetric { metric: &'static str, reason: &'static str },

    #[error("profile peak has no half-maximum crossing on the {side} side")]
    PeakAtBoundary { side: &'static str },

    #[error("patch set incomplete: missing origin {origin:?}")]
    IncompletePatchSet { origin: (usize, usize) },

    #[error("cannot split {n} items into {k} folds")]
    TooFewItems { n: usize, k: usize },

    #[error("pair `{0}` is misaligned")]
    MisalignedPair(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
