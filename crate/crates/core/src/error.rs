use thiserror::Error;

/// Errors raised anywhere in the billiard pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("erosion radius {radius} is too large: {reason}")]
    ErosionTooLarge { radius: f64, reason: String },

    #[error("degenerate offset at vertex {vertex}: {reason}")]
    DegenerateOffset { vertex: usize, reason: String },

    #[error("rounding radius {radius} overlaps at vertex {vertex}")]
    OverlappingRounding { radius: f64, vertex: usize },

    #[error("domain is not symmetric under {0}")]
    Asymmetric(&'static str),

    #[error("no collision found (geometry leak): {0}")]
    GeometryLeak(String),

    #[error("initial condition rejected: {0}")]
    BadInitialCondition(String),

    #[error("{invalid} of {total} samples invalid (limit 1%)")]
    TooManyInvalidSamples { invalid: usize, total: usize },

    #[error("mesh generation failed: {0}")]
    Mesh(String),

    #[error("eigensolver did not converge: {converged} of {requested} eigenpairs found")]
    NoConvergence { converged: usize, requested: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("captured norm {captured:.6} below threshold {threshold}; use more states or a larger hbar_eff")]
    InsufficientBasis { captured: f64, threshold: f64 },

    #[error("dense decomposition of dimension {dim} at {times} times exceeds budget; use a coarser time grid or fewer states")]
    TooLarge { dim: usize, times: usize },

    #[error("growth fit: {0}")]
    Fit(String),

    #[error("Ehrenfest time undefined for non-positive Lyapunov exponent {0}")]
    NonChaotic(f64),

    #[error("basis container: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
