//! Spectral and Monte Carlo machinery for non-local operators of
//! Bernstein-function type `psi(-Laplacian) + V` on convex domains with
//! exterior (complement) zero conditions, plus an executable battery of the
//! eigenfunction-extremum, survival, exit-moment, volume and potential-well
//! inequalities those operators satisfy.
//!
//! Layout:
//! - [`bernstein`]: symbol catalog, inverse, scaling diagnostics, the
//!   universal constant `theta`, Mittag-Leffler diagnostic.
//! - [`domain`]: convex domains with exact boundary-distance oracles.
//! - [`subordination`]: subordinator/path sampling and Monte Carlo
//!   estimators for exit times, survival and Feynman-Kac functionals.
//! - [`spectral`]: grid discretization by Fourier multiplier restriction,
//!   eigensolves, extremum location, torsion and heat kernels.
//! - [`bounds`]: each inequality as an executable check emitting a
//!   [`bounds::BoundReport`].
//! - [`battery`]: manifest-driven experiment runner shared by the CLI and
//!   the acceptance suite.

pub mod bernstein;
pub mod bounds;
pub mod battery;
pub mod domain;
pub mod error;
pub mod spectral;
pub mod subordination;

pub use bernstein::{BernsteinKind, BernsteinSpec, ScalingDiagnostics, ThetaResult};
pub use bounds::{BoundReport, WellSpec};
pub use domain::ConvexDomain;
pub use error::{Error, Result};
pub use spectral::{DiscreteOperator, EigenPair, GridDomain};
pub use subordination::{McEstimate, PathConfig, SubordinatePath};
