//! Local finite-element kernels.

pub mod p1;
pub mod quadrature;
pub mod specht;

pub use p1::{p1_gradients, p1_local_diffusion};
pub use quadrature::{micro_rule, QuadratureRule};
pub use specht::{hess_dot, LocalMatrices, ShapeEval, SpanTable, SpechtBasis, N_DOF};
