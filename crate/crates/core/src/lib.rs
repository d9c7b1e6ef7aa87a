//! Optimal union-of-subspaces models for finite data.
//!
//! Given vectors `F = {f₁,…,f_m}` the crate searches for `l` subspaces of
//! dimension at most `n` minimizing `e(F, V) = Σ_f min_j d²(f, V_j)`, and turns
//! the result into a sparsity certificate: a dictionary of at most `l·n` atoms
//! in which every vector has an `n`-sparse code. The same search runs over
//! finite shift-invariant spaces, where the best single space and its error
//! come from per-frequency Gramian eigendecompositions.

pub mod bundle;
pub mod cli;
pub mod error;
pub mod sis;
pub mod solver;
pub mod sparsity;
pub mod spectral;
pub mod subspace;

pub use bundle::{Bundle, Euclidean, ModelFamily, Partition};
pub use error::{Error, Result};
pub use solver::{brute_force, solve, sparsity_curve, InitStrategy, SolveConfig, SolveReport};
pub use subspace::{best_fit_subspace, total_error, DataSet, Subspace};
