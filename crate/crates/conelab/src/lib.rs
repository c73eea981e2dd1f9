//! Generalized power functions, index ranges, integral identities and
//! operator-norm experiments on matrix-realized homogeneous cones.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chart;
pub mod cli;
pub mod cone_algebra;
pub mod error;
pub mod geometry;
pub mod halton;
pub mod indices;
pub mod linalg;
pub mod operator_lab;
pub mod par;
pub mod quadrature;
pub mod rational;
pub mod weights;

pub use error::{Error, Result};
