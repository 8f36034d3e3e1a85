use thiserror::Error;

/// Failures of the binary cache layer.
#[derive(Debug, Error)]
pub enum CacheError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("format version {found} does not match supported version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("cache fingerprint mismatch in {field}: file has {found}, requested {expected}")]
    FingerprintMismatch {
        field: &'static str,
        found: u64,
        expected: u64,
    },
    #[error("cache file truncated or corrupt: {0}")]
    Corrupt(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode count must be at least 1")]
    EmptyBasis,
    #[error("product order must be at least 2, got {0}")]
    ProductOrder(usize),
    #[error("mode index {index} is outside the basis (valid indices 1..={mode_count})")]
    ModeOutOfRange { index: usize, mode_count: usize },
    #[error("basis resolves products of {available} eigenfunctions, {required} are needed")]
    InsufficientProductOrder { required: usize, available: usize },
    #[error("grid has {got} values but the quadrature has {expected} nodes")]
    GridLength { got: usize, expected: usize },
    #[error("field with support bound {bound} needs {required} modes, the basis has {available}")]
    FieldExceedsBasis {
        bound: f64,
        required: usize,
        available: usize,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error(
        "relative {quantity} drift {drift:.3e} at t = {time} exceeds abort threshold {threshold:.1e}"
    )]
    ConservationDrift {
        quantity: &'static str,
        drift: f64,
        time: f64,
        threshold: f64,
    },
    #[error("no sample accepted after {attempts} attempts; use the importance-sampling estimator")]
    AcceptanceFailure { attempts: u32 },
    #[error("ensemble of {samples} samples is underpowered (need at least {required})")]
    Underpowered { samples: usize, required: usize },
    #[error("frequency bound {bound} exceeds the brute-force ceiling {ceiling}; use a sampled estimator")]
    CeilingExceeded { bound: f64, ceiling: f64 },
    #[error("time grid is not uniform")]
    NonUniformGrid,
    #[error("{0} is not a dyadic level")]
    NotDyadic(f64),
    #[error("divisor counting requires m != 0")]
    ZeroProduct,
    #[error("trajectory spans [{start}, {end}] but the window needs [{need_start}, {need_end}]")]
    WindowNotCovered {
        start: f64,
        end: f64,
        need_start: f64,
        need_end: f64,
    },
    #[error("ratio undefined for the zero field")]
    ZeroField,
    #[error("trajectory is in the {found} picture, expected {expected}")]
    WrongPicture {
        found: &'static str,
        expected: &'static str,
    },
    #[error("unknown observable {0:?}")]
    UnknownObservable(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
