//! Convergent spectral lower bounds for polynomial optimization on spheres.
//!
//! Minimizing a real homogeneous form over the unit sphere is reduced to a
//! sequence of sparse symmetric-definite generalized eigenvalue problems
//! `P_k psi = lambda N_k psi`: at each level `k` the smallest generalized
//! eigenvalue is a lower bound on the sphere minimum, the bounds are
//! nondecreasing in `k`, and they converge at rate O(1/k) with an explicit
//! a-priori constant. The same machinery covers multi-homogeneous forms over
//! products of spheres (with an odd-degree lift for odd factors) and yields a
//! nonincreasing sequence of upper bounds on the spectral norm of a real
//! tensor.
//!
//! Module map:
//! - [`combinat`]: multi-index bases, ranking, exact and log-space coefficients;
//! - [`polyform`]: forms, parsing, coefficient normalization, lifts;
//! - [`gram`]: the maximally symmetric Gram operator and the sparse pencil
//!   matrices in the orthonormal symmetric-subspace basis;
//! - [`eigsolve`]: dense and matrix-free solvers for the definite pencil;
//! - [`hierarchy`]: level drivers, monotonicity contracts, a-priori gaps;
//! - [`oracle`]: independent reference values for testing (projected
//!   gradient, grid scan, SVD);
//! - [`report`]: JSON problem/result schemas shared with the CLI.

pub mod combinat;
pub mod error;
pub mod polyform;
pub mod gram;
pub mod eigsolve;
pub mod hierarchy;
pub mod oracle;
pub mod report;

pub use error::{Error, Result};
