use thiserror::Error;

/// Errors shared across the crate. Preconditions are enforced eagerly: a
/// value that violates its documented tolerance is rejected, never silently
/// repaired.
#[derive(Debug, Error)]
pub enum Error {
    #[error("distribution not normalized: sum = {sum}, tolerance {tol}")]
    NotNormalized { sum: f64, tol: f64 },

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("operator is not doubly stochastic: {axis} {index} sums to {sum}")]
    NotDoublyStochastic {
        axis: &'static str,
        index: usize,
        sum: f64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("filter bank is empty")]
    EmptyBank,

    #[error("bank centers not strictly increasing at index {index}")]
    UnorderedCenters { index: usize },

    #[error("weight ratio degenerate for filter {index}: min ratio {value} below floor {floor}")]
    DegenerateRatio { index: usize, value: f64, floor: f64 },

    #[error("grid under-resolves the narrowest feature: {points:.2} points per width, need {required}")]
    UnderResolved { points: f64, required: f64 },

    #[error("filter banks cover only {coverage:.6} of the density mass (hard floor 0.99)")]
    Coverage { coverage: f64 },

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("bin width {bin} incompatible with grid step {step}: {detail}")]
    Incommensurate { bin: f64, step: f64, detail: String },

    #[error("w0 = {0} outside (0, 1]")]
    W0OutOfRange(f64),

    #[error("entropy bound kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: &'static str, got: String },

    #[error("wing mean {wing_mean} exceeds 10% of histogram maximum {max}; peak leaks into wings")]
    PeakInWings { wing_mean: f64, max: f64 },

    #[error("refinement needs at least 3 resolutions, got {got}")]
    InsufficientResolutions { got: usize },

    #[error("bootstrap needs at least 100 resamples, got {got}")]
    InsufficientResamples { got: usize },

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
