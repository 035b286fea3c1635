//! Error type shared by all modules of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point outside the admissible domain: {0}")]
    OutOfDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear system ill-conditioned (condition estimate {condition:.3e}); try fewer vanishing moments or a wider support")]
    IllConditioned { condition: f64 },

    #[error("quadrature sample left the admissible region: {0}")]
    QuadratureOutsideDomain(String),

    #[error("adaptive quadrature did not reach tolerance {tol:.3e} within depth {max_depth}")]
    QuadratureDidNotConverge { tol: f64, max_depth: u32 },

    #[error("derivative order {order} unsupported (maximum {max})")]
    UnsupportedOrder { order: u32, max: u32 },

    #[error("computational box contains no exterior region")]
    NoExteriorRegion,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("insufficient boundary sampling: {0}")]
    InsufficientSampling(String),

    #[error("partition of unity inconsistent: {0}")]
    PartitionConsistency(String),

    #[error("grid fields do not share box and validity mask")]
    MaskMismatch,

    #[error("no admissible norm centers inside the domain")]
    EmptyCenterSet,

    #[error("finite-difference stencil leaves the evaluable region at {0}")]
    StencilOutOfRange(String),
}
