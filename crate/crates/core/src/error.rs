use thiserror::Error;

/// Errors raised by every operation in the crate.
///
/// The variant names are part of the public contract: the CLI prints
/// [`Error::name`] on failure and maps each variant to a fixed exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cutoff {cutoff} too large for grid of {grid_size} samples (need 2K+2 <= M)")]
    CutoffTooLarge { cutoff: usize, grid_size: usize },

    #[error("symbol is singular at grid node {node} (smallest singular value {margin:e})")]
    SingularSymbol { node: usize, margin: f64 },

    #[error("block size mismatch: {left} vs {right}")]
    BlockSizeMismatch { left: usize, right: usize },

    #[error("grid too coarse: phase jump {jump:.3} rad at node {node}")]
    GridTooCoarse { node: usize, jump: f64 },

    #[error("decay fit degenerate: {0}")]
    FitDegenerate(String),

    #[error("correction-term truncation m={m} too small: tail bound {bound:e}")]
    TruncationTooSmall { m: usize, bound: f64 },

    #[error("finite section of order {n} is numerically singular (condition estimate {cond:e})")]
    NumericallySingularSection { n: usize, cond: f64 },

    #[error("eigenvalue computation failed: {0}")]
    EigFailure(String),

    #[error("symbol has winding number {0}; factorization is not canonical")]
    NonZeroWinding(i64),

    #[error("no canonical factorization: {0}")]
    NonCanonical(String),

    #[error("factorization section of order {m} is ill-conditioned (condition estimate {cond:e})")]
    IllConditionedSection { m: usize, cond: f64 },

    #[error("contour node {node} too close to the spectrum (condition estimate {cond:e})")]
    SpectrumTooClose { node: usize, cond: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("contour too tight: clearance {clearance:e} below required {required:e}")]
    ContourTooTight { clearance: f64, required: f64 },

    #[error("function is not analytic at {0}")]
    FNotAnalyticAtSample(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable error name, printed by the CLI on the diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Error::CutoffTooLarge { .. } => "CutoffTooLarge",
            Error::SingularSymbol { .. } => "SingularSymbol",
            Error::BlockSizeMismatch { .. } => "BlockSizeMismatch",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::FitDegenerate(_) => "FitDegenerate",
            Error::TruncationTooSmall { .. } => "TruncationTooSmall",
            Error::NumericallySingularSection { .. } => "NumericallySingularSection",
            Error::EigFailure(_) => "EigFailure",
            Error::NonZeroWinding(_) => "NonZeroWinding",
            Error::NonCanonical(_) => "NonCanonical",
            Error::IllConditionedSection { .. } => "IllConditionedSection",
            Error::SpectrumTooClose { .. } => "SpectrumTooClose",
            Error::NoConvergence(_) => "NoConvergence",
            Error::ContourTooTight { .. } => "ContourTooTight",
            Error::FNotAnalyticAtSample(_) => "FNotAnalyticAtSample",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }

    /// Process exit code for the CLI. The table is frozen; see the README.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid(_) => 2,
            Error::Io(_) => 3,
            Error::Json(_) => 4,
            Error::Csv(_) => 5,
            Error::CutoffTooLarge { .. } => 10,
            Error::SingularSymbol { .. } => 11,
            Error::BlockSizeMismatch { .. } => 12,
            Error::GridTooCoarse { .. } => 13,
            Error::NonZeroWinding(_) => 14,
            Error::TruncationTooSmall { .. } => 20,
            Error::NumericallySingularSection { .. } => 21,
            Error::EigFailure(_) => 22,
            Error::NonCanonical(_) => 30,
            Error::IllConditionedSection { .. } => 31,
            Error::SpectrumTooClose { .. } => 32,
            Error::NoConvergence(_) => 40,
            Error::ContourTooTight { .. } => 41,
            Error::FNotAnalyticAtSample(_) => 42,
            Error::FitDegenerate(_) => 50,
        }
    }
}
