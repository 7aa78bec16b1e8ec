use thiserror::Error;

/// Errors raised by the lab's numeric operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// `w + eta * s` vanished, so the hinge projection has no direction.
    #[error("degenerate projection: updated hypothesis is the zero vector")]
    DegenerateProjection,

    /// `x == 0`, so `{w : x.w = y}` is not a hyperplane.
    #[error("degenerate hyperplane: data vector has zero norm")]
    DegenerateHyperplane,

    /// `w_t == w_bar`; the zenith direction is undefined.
    #[error("pole degeneracy: current and optimal hypotheses coincide (lambda = {lambda:e})")]
    PoleDegeneracy { lambda: f64 },

    /// `sin(theta) ~ 0`; the two-axis hinge frame is undefined.
    #[error("frame degeneracy: sin(theta) = {sin_theta:e}")]
    FrameDegeneracy { sin_theta: f64 },

    #[error("loss is not differentiable at this point (hinge margin {margin})")]
    NonDifferentiable { margin: f64 },

    #[error("unsupported conditioning: {0}")]
    UnsupportedConditioning(String),

    #[error("density-difference ratio undefined: all four densities are zero")]
    UndefinedNabla,

    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    #[error("density is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("non-finite value produced: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
