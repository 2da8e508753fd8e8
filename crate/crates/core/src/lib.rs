//! Inexact adaptive cubic regularization and trust-region methods on
//! Riemannian manifolds, with exact and sub-sampled derivative oracles.
//!
//! The solvers minimize finite-sum objectives `f = (1/n) Σ f_i` over a
//! [`Manifold`](manifold::Manifold). Each outer iteration draws fixed samples
//! for the gradient and the Hessian, builds a local model, and accepts or
//! rejects the step by comparing actual and predicted decrease.

// `!(a < b)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arc;
pub mod error;
pub mod jd;
pub mod manifold;
pub mod operator;
pub mod oracle;
pub mod problems;
pub mod rng;
pub mod subsolver;
pub mod trace;
pub mod trust_region;

pub use error::{Error, Result};
