//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Evaluation point outside the family's admissible region.
    #[error("point at radius {r} is outside the domain (minimum radius {r_min})")]
    Domain { r: f64, r_min: f64 },

    /// Metric failed positive-definiteness.
    #[error("metric is not positive definite at radius {r}")]
    DegenerateMetric { r: f64 },

    /// The graph {t = f(x)} fails to be spacelike at the evaluation point.
    #[error("graph slice is not spacelike at radius {r} (1 - N^2 |df|^2 = {radicand})")]
    NonSpacelikeSlice { r: f64, radicand: f64 },

    /// Nested finite differencing could not meet the requested accuracy.
    #[error("differentiation budget exceeded: error estimate {estimate} > tolerance {tolerance}")]
    DifferentiationBudgetExceeded { estimate: f64, tolerance: f64 },

    /// Center-of-mass quantities are undefined for |E| below threshold.
    #[error("energy {energy} too small to normalize center-of-mass integrals")]
    EnergyTooSmall { energy: f64 },

    /// Sequence-limit fit could not be performed.
    #[error("extrapolation fit failed: {reason}")]
    FitFailed { reason: String },

    /// avalos_diagnostics requires K = 0.
    #[error("family is not time-symmetric: max |K| = {max_k} on the ladder")]
    NotTimeSymmetric { max_k: f64 },

    /// Induced surface metric failed positive-definiteness.
    #[error("degenerate surface metric at node ({theta}, {phi})")]
    DegenerateSurface { theta: f64, phi: f64 },

    /// The STCMC radicand H^2 - (tr_S K)^2 is non-positive somewhere.
    #[error("mean curvature vector not spacelike: H^2 - (tr K)^2 = {radicand} at a node")]
    NonSpacelikeMeanCurvature { radicand: f64 },

    /// Newton iteration residual increased twice in a row.
    #[error("Newton iteration diverged at sigma = {sigma} (residual {residual})")]
    NewtonDiverged { sigma: f64, residual: f64 },

    /// The outer translation loop failed to converge; expected when the
    /// energy vanishes and the translation kernel is exact.
    #[error("translation kernel handling failed at sigma = {sigma}: {reason}")]
    KernelStuck { sigma: f64, reason: String },

    /// Eigenvalue extraction from the solver Jacobian failed.
    #[error("eigenvalue solver failed: {reason}")]
    EigSolverFailed { reason: String },

    /// Orthogonality or other input validation failed.
    #[error("invalid input: {0}")]
    Invalid(String),
}
