//! Shared numerical kernels.

pub mod cheb;
pub mod fit;
pub mod jet;
pub mod ode;
pub mod quad;
pub mod tridiag;
