//! Precoder design for multi-group multicasting with a system-wide common
//! message, using rate-splitting and a weighted-MSE alternating optimization.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or a concrete conic solver lives in the `rsmulticast` crate; here
//! the per-iteration convex problem is emitted as a [`cone::ConeProgram`] and
//! handed to any [`cone::ConeSolver`] implementation.
//!
//! Module map:
//!
//! - [`model`]: group layouts, coding schemes, precoders, power accounting.
//! - [`metrics`]: closed-form rates, MSEs, MMSE receivers and WMSE weights.
//! - [`cone`]: a small sparse second-order-cone program representation.
//! - [`subproblem`]: assembly of the per-iteration precoder update.
//! - [`ao`]: the alternating-optimization loop and the power-split search.
//! - [`oracle`]: slow brute-force verifiers used by the test suites.

#![no_std]

extern crate alloc;

pub mod ao;
pub mod cone;
mod error;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod subproblem;

pub use error::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Complex baseband sample type used throughout.
pub type C64 = num_complex::Complex<f64>;
