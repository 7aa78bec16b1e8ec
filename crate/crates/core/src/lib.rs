//! Curriculum-ordered SGD on least squares and hinge loss, with samplers
//! conditioned on difficulty scores and estimators of the expected one-step
//! convergence rate.
//!
//! Conventions used throughout: every vector lives in `R^(d+1)` with the bias
//! slot last; data vectors carry `1` there. See the guide under `book/` for
//! the geometry and the statements each estimator checks.

// Guards are written `!(x > 0.0)` so that NaN is rejected along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterexamples;
pub mod curriculum;
pub mod difficulty;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod losses;
pub mod samplers;
pub mod stats;
pub mod vecspace;

pub use error::{LabError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scores.md")]
    mod scores {}
    #[doc = include_str!("../../../book/src/regression.md")]
    mod regression {}
    #[doc = include_str!("../../../book/src/local.md")]
    mod local {}
    #[doc = include_str!("../../../book/src/hinge.md")]
    mod hinge {}
    #[doc = include_str!("../../../book/src/counterexamples.md")]
    mod counterexamples {}
    #[doc = include_str!("../../../book/src/races.md")]
    mod races {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
