//! Quasilocal mass toolkit: Brown-York and Liu-Yau masses of 2-surfaces,
//! surfaces of revolution in Euclidean space, warped-product model metrics,
//! light-cone surfaces in Minkowski space and static-metric criticality.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod discretization;
pub mod error;
pub mod lightcone;
pub mod mass;
pub mod static_variation;
pub mod warped_ambient;
pub mod weyl_embedding;

pub use error::{Error, Result};
