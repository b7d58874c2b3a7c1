use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("requested {requested} primes but the sieve capacity is {capacity}")]
    Capacity { requested: usize, capacity: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range for a grid of {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("window [{lo}, {hi}] contains no consecutive grid pairs")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("row {0} is degenerate: a single-point grid has no divergence spread")]
    DegenerateRow(usize),

    #[error("target delta0 = {target} is outside the achievable open interval ({lo}, {hi})")]
    InfeasibleTarget { target: f64, lo: f64, hi: f64 },

    #[error("could not bracket delta0 = {target}: Phi({beta}) = {phi} after {iterations} expansions")]
    NonBracketing {
        target: f64,
        beta: f64,
        phi: f64,
        iterations: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("test-function support [{support_lo}, {support_hi}] leaves the grid window [{grid_lo}, {grid_hi}]")]
    SupportEscape {
        support_lo: f64,
        support_hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    #[error("matrix of order {n} exceeds the dense eigensolver cap {cap}")]
    EigenCap { n: usize, cap: usize },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("fit window holds {got} points, at least {need} required")]
    InsufficientPoints { got: usize, need: usize },

    #[error("ill-conditioned regression: {0}")]
    IllConditioned(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("lattice cap K = {cap} leaves tail exp(-t K^m) = {tail:e} at t = {t}, above {limit:e}")]
    TailTruncation {
        cap: usize,
        t: f64,
        tail: f64,
        limit: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("ordinates not strictly increasing at line {line}: {value} after {previous}")]
    Monotonicity {
        line: usize,
        previous: f64,
        value: f64,
    },

    #[error("sanity gate: first ordinate {0} is not in (14.0, 14.2)")]
    SanityGate(f64),

    #[error("network error: {0}")]
    Network(String),

    #[error("checksum mismatch: expected {expected}, got {actual}")]
    ChecksumMismatch { expected: String, actual: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation guard: t = {t} is below 10/gamma_max = {t_min}")]
    TruncationGuard { t: f64, t_min: f64 },

    #[error("range error: {0}")]
    Range(String),

    #[error("unknown format '{0}'")]
    UnknownFormat(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),

    #[error("type mismatch for key '{key}': expected {expected}, found '{found}'")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: String,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Usage and configuration problems map to exit code 2, everything else to 1.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::UnknownKey(_)
            | Error::Config { .. }
            | Error::TypeMismatch { .. }
            | Error::UnknownFormat(_)
            | Error::InvalidInput(_) => true,
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Stage { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
