use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} must be even and at least 4")]
    InvalidGrid(usize),

    #[error("grid mismatch: {0} vs {1} points")]
    GridMismatch(usize, usize),

    #[error("antiderivative input has non-zero mean {mean:e}")]
    NonZeroMean { mean: f64 },

    #[error("degenerate curve: integral of cos(theta) is {0:e}")]
    DegenerateCurve(f64),

    #[error("closure violated: mean of sin(theta) is {0:e}")]
    ClosureViolated(f64),

    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("gamma_t fixed-point iteration diverged after {iterations} iterations (last update {update:e})")]
    FixedPointDiverged { iterations: usize, update: f64 },

    #[error("chord-arc monitor failed at t = {time}: minimum ratio {value:e}")]
    ChordArcFailed { time: f64, value: f64 },

    #[error("step at t = {time} blew up: norm {after:e} after vs {before:e} before")]
    StabilityViolated { time: f64, before: f64, after: f64 },

    #[error("no constraint-satisfying log bound found")]
    InfeasibleFit,

    #[error("parameter list contains the (0,0) pair {0} times; exactly one required")]
    DuplicateZeroPair(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed record: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable variant name used in failure records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::GridMismatch(..) => "GridMismatch",
            Error::NonZeroMean { .. } => "NonZeroMean",
            Error::DegenerateCurve(_) => "DegenerateCurve",
            Error::ClosureViolated(_) => "ClosureViolated",
            Error::InvalidParams(_) => "InvalidParams",
            Error::FixedPointDiverged { .. } => "FixedPointDiverged",
            Error::ChordArcFailed { .. } => "ChordArcFailed",
            Error::StabilityViolated { .. } => "StabilityViolated",
            Error::InfeasibleFit => "InfeasibleFit",
            Error::DuplicateZeroPair(_) => "DuplicateZeroPair",
            Error::InsufficientData(_) => "InsufficientData",
            Error::Config(_) => "Config",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}
