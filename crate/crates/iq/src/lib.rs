//! Importance quadrature: deterministic Gauss-Hermite nodes reweighted by
//! importance ratios.
//!
//! The core idea is to rewrite an intractable expectation under an
//! unnormalized density `pi` as an expectation under a Gaussian proposal `q`,
//! place the nodes of a Gauss-Hermite rule on `q`, and correct the mismatch
//! with importance weights `w_n = pi(x_n) / q(x_n)`. The combined weights
//! `w'_n = w_n * v_n * N` support an unnormalized estimator (when the
//! normalizing constant is known), a self-normalized estimator, and an
//! estimator of the normalizing constant itself.
//!
//! Modules:
//! - [`rules`]: one-dimensional classical quadrature rules, tensor-product
//!   grids, and their affine mapping onto Gaussian proposals.
//! - [`proposal`]: Gaussian and equal-weight Gaussian-mixture proposals.
//! - [`target`]: a zoo of evaluable log-unnormalized target densities with
//!   optional ground-truth oracles.
//! - [`igh`]: single-proposal weighting, the three estimators, resampling
//!   thinning and the quadrature error bound.
//! - [`migh`]: multiple-proposal weighting schemes (per-proposal and
//!   deterministic-mixture denominators).
//! - [`adapt`]: adaptive single-proposal and population schemes driven by
//!   weighted moment matching.
//! - [`baselines`]: Monte Carlo and randomized-QMC competitors sharing the
//!   same estimator interfaces.
//! - [`diagnostics`]: the quadrature-aware effective-sample-size metric.
//! - [`experiments`]: the file-based experiment harness behind the `iq` CLI.
//!
//! With the default `parallel` feature, node weighting and seed replication
//! fan out over a rayon pool; reductions always use a fixed pairwise order so
//! results are bit-identical across thread counts and with the sequential
//! fallback (`--no-default-features`).

pub mod adapt;
pub mod baselines;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod igh;
pub mod math;
pub mod migh;
mod par;
pub mod proposal;
pub mod rules;
pub mod target;

pub use error::{IqError, Result};
pub use igh::{Estimates, WeightedSet};
pub use proposal::{GaussianProposal, MixtureProposal};
pub use rules::{GridRule, PointSet, Rule1D, RuleKind};
pub use target::TargetDensity;
