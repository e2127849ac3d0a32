use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("operator is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("conditioning on null event (probability {probability:.3e})")]
    NullEvent { probability: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("trajectory too short: need {needed} steps, have {available}")]
    TrajectoryTooShort { needed: usize, available: usize },

    #[error("grid too coarse: step size measure {value:.3e} exceeds {limit}")]
    GridTooCoarse { value: f64, limit: f64 },

    #[error("dimension cap exceeded: {dim} > {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("enumeration cap exceeded: {count} trajectories > {cap}")]
    EnumerationCap { count: usize, cap: usize },

    #[error("model is not Markov: {0}")]
    NotMarkov(String),

    #[error("degenerate trajectory: norm vanished at step {step}")]
    VanishedNorm { step: usize },

    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
