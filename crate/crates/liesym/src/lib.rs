//! Linear-algebraic tools for working with Lie-group symmetry in models built
//! from finite-dimensional function dictionaries.
//!
//! The crate is organized around three tasks:
//!
//! - **enforce**: compute bases of exactly equivariant models by solving the
//!   linear constraints imposed by the Lie-derivative and finite-transform
//!   operators ([`enforce`]);
//! - **discover**: identify the connected symmetry subgroup of a model, point
//!   cloud, input-output dataset, or dynamical system as the nullspace of a
//!   linear operator ([`discover`]);
//! - **promote**: fit models with convex symmetry-promoting penalties
//!   (sum-of-norms over discrete elements, nuclear norm over the Lie algebra)
//!   using ADMM with singular-value soft-thresholding ([`promote`]).
//!
//! Supporting modules provide matrix Lie groups and their algebras
//! ([`liegroup`]), polynomial dictionaries with analytic Jacobians
//! ([`fnspace`]), Monte-Carlo discretization of the fundamental operators
//! ([`operators`]), and trajectory data generation for the dynamical-system
//! experiments ([`dynamics`]).

pub mod discover;
pub mod dynamics;
pub mod enforce;
pub mod error;
pub mod experiments;
pub mod fnspace;
pub mod liegroup;
pub mod linalg;
pub mod operators;
pub mod poly;
pub mod promote;
pub mod rng;

pub use discover::{PointCloud, SymmetryReport};
pub use error::{Error, Result};
pub use fnspace::Dictionary;
pub use liegroup::{GroupDescriptor, GroupKind, LieAlgebraElement, MatrixLieGroup};
pub use operators::{ActionPair, Cube, LieOperatorTensor, Representation, SampledInnerProduct};
pub use promote::{FitResult, SolverOptions};
