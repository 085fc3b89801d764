use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = NebiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NebiError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:?}, expected \"NEBI\"")]
    BadMagic([u8; 4]),
    #[error("unsupported tensor file version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported tensor dtype {0}")]
    UnsupportedDtype(u8),
    #[error("truncated tensor file: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("tensor file has {0} trailing bytes")]
    TrailingBytes(u64),
    #[error("invalid dimensions {0:?}")]
    InvalidDims(Vec<usize>),
    #[error("dimension product overflows")]
    DimsOverflow,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },
    #[error("dimensions {height}x{width} must be even")]
    OddDimensions { height: usize, width: usize },
    #[error("dimensions {height}x{width} not divisible by {factor}")]
    Indivisible {
        height: usize,
        width: usize,
        factor: usize,
    },
    #[error("expected {expected:?} image, got {got:?}")]
    SpaceMismatch {
        expected: crate::image::ColorSpace,
        got: crate::image::ColorSpace,
    },
    #[error("singular homography")]
    SingularHomography,
    #[error("negative pixel value {0}")]
    NegativePixel(f32),
    #[error("interval [{t0}, {t1}] outside gyro trace span [{start}, {end}]")]
    IntervalOutsideTrace { t0: f64, t1: f64, start: f64, end: f64 },
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("target is not one-hot")]
    NotOneHot,
    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("cannot ingest {path}: {msg}")]
    Ingest { path: PathBuf, msg: String },
    #[error("empty input: {0}")]
    Empty(String),
}

impl NebiError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NebiError::Io {
            path: path.into(),
            source,
        }
    }
}
