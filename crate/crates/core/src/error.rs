//! Error types for the numerical pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Failures of the Beltrami solver and of map-level operations.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("fixed-point iteration exhausted after {iterations} steps (last update {last_delta:.3e})")]
    NoConvergence { iterations: usize, last_delta: f64 },
    #[error("coefficient sup-norm {sup:.4} outside the solver regime (<= {limit})")]
    NormTooLarge { sup: f64, limit: f64 },
    #[error("inverse interpolation left the evaluable region at {point}")]
    InverseInterpolationFailure { point: num_complex::Complex64 },
    #[error("derivative vanishes on the grid (min |f_z| = {min_abs:.3e})")]
    VanishingDerivative { min_abs: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum GaussError {
    #[error("Newton iteration diverged; last residual {last_residual:.3e}")]
    NewtonDivergence { last_residual: f64 },
    #[error("inner linear solve stalled at relative residual {relative:.3e}")]
    LinearSolveFailure { relative: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("Beltrami coefficient reached sup-norm {sup:.4} >= 1; conformal factor not converged")]
    NormViolation { sup: f64 },
    #[error(transparent)]
    Gauss(#[from] GaussError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum MessError {
    #[error("pointwise Newton diverged at node {node}")]
    PointwiseDivergence { node: usize },
    #[error("two admissible branches at node {node}; tolerance too loose")]
    NonUniqueCandidate { node: usize },
    #[error("target coefficient sup-norm {sup:.4} >= 1")]
    NormViolation { sup: f64 },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Gauss(#[from] GaussError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Umbrella error for scenario-level drivers.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Gauss(#[from] GaussError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Mess(#[from] MessError),
    #[error("{0}")]
    Scenario(String),
}
