//! Desk-scale numerical laboratory for scattering theory on manifolds with
//! warped-product ends: moderate-decay weights, β-equivalence of metrics,
//! greedy coverings, mode operators on cusps and cylinders, wave-propagator
//! functional calculus, heat-trace differences, cusp scattering and resonances.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cli;
pub mod continuation;
pub mod covering;
pub mod decay;
pub mod error;
pub mod funcalc;
pub mod geometry;
pub mod numerics;
pub mod operators;
pub mod scattering;
pub mod trace;

pub use error::{LabError, Result};
