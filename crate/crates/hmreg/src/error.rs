//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by geometric primitives.
#[derive(Debug, Clone, Error)]
pub enum GeomError {
    /// The target point lies at or beyond the cut locus of the base point,
    /// so the logarithmic map has no unique value. Callers decide the
    /// fallback (step halving in the optimizers).
    #[error("log map undefined: target at or beyond the cut locus (dist {dist:.6})")]
    CutLocus { dist: f64 },

    /// Argument outside the domain of a closed-form formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// No well-defined nearest point on the manifold (e.g. projecting the
    /// zero vector onto a sphere).
    #[error("projection singularity: {0}")]
    Singular(String),

    /// Points or vectors from different manifolds, or wrong coordinate length.
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
}

/// Errors raised by the fitting routines.
#[derive(Debug, Clone, Error)]
pub enum FitError {
    #[error(transparent)]
    Geom(#[from] GeomError),

    /// Iteration cap reached before the gradient tolerance.
    #[error("did not converge within {iters} iterations (grad norm {grad_norm:.3e})")]
    NotConverged { iters: usize, grad_norm: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Too few distinct design points for the requested fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

/// Errors raised by the topological diagnostics.
#[derive(Debug, Clone, Error)]
pub enum TopologyError {
    /// Some adjacent pair of nodal values sits at distance >= L/2, so the
    /// shortest angular increment is ambiguous.
    #[error("ambiguous increment between knots {left} and {right} (dist {dist:.6})")]
    AmbiguousIncrement { left: usize, right: usize, dist: f64 },

    /// Raw winding displacement is too far from an integer to assign a class.
    #[error("no class: fractional winding {frac:.3} exceeds the rounding guard")]
    NoClass { raw: f64, frac: f64 },

    #[error("unsupported manifold for homotopy diagnostics: {0}")]
    UnsupportedManifold(String),
}
