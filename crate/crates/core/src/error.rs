use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: expected {expected} samples, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("radius {r} outside admissible domain [{lo}, {hi}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("metric is not embeddable as a surface of revolution (A - rho'^2 <= 0 at theta = {theta})")]
    NotRevolutionEmbeddable { theta: f64 },

    #[error("Gaussian curvature {curvature} <= 0 at theta = {theta}")]
    PositiveCurvatureViolation { theta: f64, curvature: f64 },

    #[error("mean curvature vector is not spacelike at theta = {theta} (|H|^2 = {norm_sq})")]
    NotSpacelike { theta: f64, norm_sq: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("degenerate measurement: {0}")]
    DegenerateMeasurement(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("conformal factor lost positivity (u = {u} at r = {r})")]
    MaximumPrincipleViolation { r: f64, u: f64 },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::NumericalDomain(msg.into())
    }

    /// Stable kebab-case tag, used in JSON reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::GridMismatch { .. } => "grid-mismatch",
            Error::OutOfRange { .. } => "out-of-range",
            Error::NumericalDomain(_) => "numerical-domain",
            Error::NotRevolutionEmbeddable { .. } => "not-revolution-embeddable",
            Error::PositiveCurvatureViolation { .. } => "positive-curvature-violation",
            Error::NotSpacelike { .. } => "not-spacelike",
            Error::LinearSolveFailure(_) => "linear-solve-failure",
            Error::DegenerateMeasurement(_) => "degenerate-measurement",
            Error::SolverFailure { .. } => "solver-failure",
            Error::MaximumPrincipleViolation { .. } => "maximum-principle-violation",
            Error::InternalConsistency(_) => "internal-consistency",
            Error::UnsupportedMetric(_) => "unsupported-metric",
        }
    }
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::domain(format!("{what}: non-finite sample at index {i}"))),
        None => Ok(()),
    }
}
