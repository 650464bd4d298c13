//! Sparse A-optimal experimental designs.
//!
//! Candidate design points are turned into a model matrix, each candidate
//! receives a penalty weight from a greedy subspace construction, and the
//! design is selected by solving a group-lasso problem whose groups are the
//! candidates. The [`analysis`] module checks the outcome against
//! least-squares and orthogonal-array oracles.
//!
//! All indices in the library API are 0-based. The command-line front end
//! speaks 1-based indices.

// negated comparisons reject NaN; index loops mirror the block notation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod design;
pub mod error;
pub mod linalg;
pub mod solver;
pub mod weights;

pub use error::{DesignError, Result};
