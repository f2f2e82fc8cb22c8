//! Intrinsic nonparametric regression for manifold-valued responses.
//!
//! The central object is a penalized least-squares estimator whose
//! minimizer is a geodesic spline: piecewise constant-speed geodesics
//! between the design points, with derivative jumps at the data. The
//! crate provides
//!
//! - [`manifold`]: exponential/logarithm maps, distances, tangent bases
//!   and projections for six concrete manifolds plus a Euclidean oracle;
//! - [`spline`]: the discrete objective, its Riemannian gradient, a
//!   Polak-Ribiere conjugate-gradient fitter with Armijo backtracking,
//!   and geodesic-spline evaluation;
//! - [`baselines`]: global Frechet regression, geodesic regression,
//!   TV-regularized Frechet regression, and an extrinsic cubic smoothing
//!   spline with projection;
//! - [`topology`]: winding numbers, Dirichlet energies, and homotopy
//!   energy barriers for circle- and torus-valued fits;
//! - [`sim`]: seeded test-curve generators, noise model, MISE, cross
//!   validation, and the experiment protocols;
//! - [`wind`]: a wind-direction case-study pipeline on the circle.
//!
//! The narrative guide in `book/` walks through the same modules with
//! worked examples; the snippets there are kept in sync with the
//! doc-tests in this crate.

pub mod baselines;
pub mod config;
pub mod error;
pub mod manifold;
pub mod sim;
pub mod spline;
pub mod topology;
pub mod wind;

pub use error::{FitError, GeomError, TopologyError};
pub use manifold::{curvature_factor, ManifoldKind, ManifoldPoint, TangentVector};
pub use spline::{Dataset, FitConfig, FitReport, GeodesicSpline};
