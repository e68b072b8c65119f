use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("refinement {0} is too coarse (need at least 3 nodes per unit cell)")]
    RefinementTooCoarse(usize),
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    Dimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("cube is not aligned with the field grid")]
    Misaligned,
    #[error("cube lies outside the field box")]
    OutOfBox,
    #[error("time step {dt} violates the CFL bound {bound}")]
    Cfl { dt: f64, bound: f64 },
    #[error("grid has fewer than 3 interior nodes per axis")]
    EmptyInterior,
    #[error("non-finite values at step {step}: unstable configuration")]
    NonFinite { step: usize },
    #[error("slope step must be positive, got {0}")]
    SlopeStep(f64),
    #[error("invalid environment: {0}")]
    Environment(&'static str),
    #[error("boundary data varies in time; streaming fiber measure needs time-independent data")]
    TimeDependentBoundary,
    #[error("bracket [{lo}, {hi}] does not contain a crossing of E and E*")]
    Bracket { lo: f64, hi: f64 },
    #[error("effective table has a gap or is empty")]
    TableGap,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
