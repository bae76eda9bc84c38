//! Strong-stability-preserving stochastic Runge–Kutta methods with
//! bounded increments, plus the finite-volume machinery and experiments
//! that exercise them.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fv2d;
pub mod increments;
pub mod integrators;
pub mod parallel;
pub mod sdebench;
pub mod tableau;

pub use error::{Error, Result};
