use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// The coupling lies outside the domain where the requested evaluator
    /// converges (e.g. `Re λ <= 0` for the standard representation).
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature refinement stalled before reaching the requested
    /// tolerance.
    #[error("quadrature did not converge: {0}")]
    Convergence(String),

    /// `det(1 - g M)` vanished (or came numerically too close to zero)
    /// somewhere the integrand was evaluated.
    #[error("singular determinant: {0}")]
    SingularDeterminant(String),

    /// An argument hit (or crossed) a branch cut of the closed-form
    /// radical expressions.
    #[error("branch region error: {0}")]
    BranchRegion(String),

    /// Tensor-product integration was requested in more dimensions than
    /// the configured cap.
    #[error("dimension cap exceeded: {0}")]
    DimensionCap(String),

    /// A series/pairing expansion was requested beyond the configured
    /// order cap (cost grows factorially).
    #[error("order cap exceeded: {0}")]
    OrderCap(String),

    /// Not enough data points for a requested fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Finite-difference step control failed to produce consistent
    /// derivative estimates.
    #[error("step-size failure: {0}")]
    StepSize(String),

    /// A Padé denominator root lies on (or too close to) the inverse-
    /// transform integration path.
    #[error("pole on contour: {0}")]
    PoleOnContour(String),

    /// The Padé linear system is singular (degenerate table entry).
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// Malformed input (sizes, unsupported parameter combinations).
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
