//! Heterogeneous multiscale finite elements for fourth-order singularly
//! perturbed elliptic homogenization problems.

pub mod cell;
pub mod coefficients;
pub mod elements;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linsys;
pub mod macro_hmm;

pub use error::{Error, Result};
