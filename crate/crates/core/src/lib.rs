//! Levenberg-Marquardt iteration with a (possibly singular) scaling term `λ‖Ld‖²`.
//!
//! - [`scaling`]: difference operators and their 2D Kronecker assemblies.
//! - [`gsvd`]: GSVD of `(J, L)` and step-norm diagnostics.
//! - [`solver`]: the damped iteration with Armijo line search and tracing.
//! - [`pde`]: Chebyshev collocation models for the bioheat and conduction benchmarks.
//! - [`experiments`]: noise, discrepancy stopping, error metrics and campaigns.

pub mod error;
pub mod experiments;
pub mod gsvd;
pub mod linalg;
pub mod pde;
pub mod scaling;
pub mod solver;

pub use error::{Error, Result};
pub use scaling::ScalingOperator;
