use thiserror::Error;

/// Failures reported by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("non-finite value {what} at index {index}")]
    NonFinite { what: String, index: usize },

    #[error("order {order} exceeds the configured maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("invalid exponent input: {0}")]
    InvalidExponents(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid coefficient input: {0}")]
    InvalidCoefficients(String),

    #[error("coefficient blow-up: the solution exists only for t < {t_max}, requested T = {t_end}")]
    BlowUp { t_max: f64, t_end: f64 },

    #[error("time {t} outside the sampled window [{lo}, {hi}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },

    #[error("singular pivot in column {column} at t = {t}")]
    Singular { column: usize, t: f64 },

    #[error("solve residual {residual:e} exceeds {bound:e} at t = {t}")]
    ResidualTooLarge { residual: f64, bound: f64, t: f64 },

    #[error("coercivity probe {probe:.4} below threshold {threshold} at t = {t}; reduce k")]
    CoercivityViolated { probe: f64, threshold: f64, t: f64 },

    #[error("truncation radius too small: {0}")]
    BoundaryContaminated(String),

    #[error("watched seminorm ({n_weight},{n_diff}) = {value:e} exceeds threshold {threshold:e} at t = {t}")]
    SeminormBlowUp {
        n_weight: usize,
        n_diff: usize,
        value: f64,
        threshold: f64,
        t: f64,
    },

    #[error("envelope blow-up at t = {t}")]
    EnvelopeBlowUp { t: f64 },

    #[error("insufficient history: {have} levels, need {need}")]
    InsufficientHistory { have: usize, need: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
