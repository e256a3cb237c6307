use thiserror::Error;

/// Errors surfaced by kernel evaluation, flows, quadrature and simulation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A phase point (or coordinate) lies outside the open domain D.
    #[error("domain violation: {0}")]
    Domain(String),

    /// A parameter is outside the range where the operation is defined,
    /// e.g. |lambda| >= eps*mu for the hyperbolic II system.
    #[error("range violation: {0}")]
    Range(String),

    /// A theorem hypothesis is not met; the run is refused rather than failed.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    /// An integrator stage left the domain.
    #[error("integration step left the domain: {0}")]
    Step(String),

    /// Panel doubling (or an iterative solve) failed to stabilize.
    #[error("failed to converge: {0}")]
    Convergence(String),

    /// Strict-mode simulation recorded boundary violations.
    #[error("boundary breached {violations} time(s) in strict mode")]
    BoundaryBreach { violations: u64 },

    /// Invalid configuration (sizes, steps, sample counts).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Operation is only defined for a specific system kind.
    #[error("unsupported system for this operation: {0}")]
    UnsupportedSystem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
