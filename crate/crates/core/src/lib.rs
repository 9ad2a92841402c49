//! Minimization of strictly convex functionals of probability densities.
//!
//! The sample space is a closed interval discretized by a quadrature [`Grid`].
//! Objectives and constraints are [`FunctionalSpec`]s carrying values and
//! pointwise functional derivatives. The [`kkt`] module builds primal
//! candidates from Lagrange multipliers and certifies optimality, and the
//! [`solver`] module searches for multipliers whose candidate certifies.
//!
//! ```
//! use std::sync::Arc;
//! use densopt::{Grid, ProblemSpec, functionals, solver::{self, SolveOptions}};
//!
//! let grid = Arc::new(Grid::uniform(0.0, 1.0, 101).unwrap());
//! let problem = ProblemSpec::new(grid.clone(), functionals::neg_shannon(grid)).unwrap();
//! let result = solver::solve(&problem, &SolveOptions::default()).unwrap();
//! assert!(result.certificate.pass);
//! assert!((result.density.values()[50] - 1.0).abs() < 1e-9);
//! ```

pub mod constraints;
pub mod density;
mod error;
pub mod ext;
pub mod functionals;
pub mod io;
pub mod kkt;
pub mod sampling;
pub mod solver;


pub use density::{Density, Grid};
pub use error::{Error, Result};
pub use ext::ExtReal;
pub use functionals::{Convexity, FunctionalSpec};
pub use constraints::{InequalityConstraint, LinearEqualityConstraint, ProblemSpec};
pub use kkt::{KktCertificate, Multipliers};

