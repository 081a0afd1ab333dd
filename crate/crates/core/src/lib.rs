pub mod error;
pub mod factor;
pub mod fit;
pub mod analytic;
pub mod approx;
pub mod asymptotics;
pub mod cli;
pub mod linalg;
pub mod symbol;
pub mod toeplitz;
pub mod traces;
