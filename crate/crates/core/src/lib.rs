//! Mean-field dynamics, stability and quantum fluctuations of the open Dicke
//! model under time-delayed (Pyragas-type) coherent optical feedback.
//!
//! The crate is `no_std` and only needs `alloc`. Rates are angular
//! frequencies in rad/μs and times are in μs throughout; see [`units`] for
//! conversions from the customary `2π·MHz` notation.
//!
//! Layout:
//!
//! - [`model`]: parameters, the mean-field vector field, fixed points and the
//!   feedback-loop optics.
//! - [`dde`]: method-of-steps integration of the delayed mean-field equations.
//! - [`stability`]: linearization, characteristic determinant and rightmost
//!   characteristic roots.
//! - [`fluctuations`]: Holstein–Primakoff coefficients, Fourier-space
//!   transfer functions and the steady-state photon fluctuation integral.

#![cfg_attr(not(feature = "std"), no_std)]
// Small fixed-size matrices read best with explicit indices, and `!(x < tol)`
// is the NaN-rejecting comparison used throughout.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod linalg;
mod math;

pub mod dde;
pub mod fluctuations;
pub mod model;
pub mod quadrature;
pub mod stability;
pub mod units;

pub use error::{Error, Result};
pub use model::{FeedbackParams, FixedPointKind, MeanFieldState, ModelParams};

pub use num_complex::Complex64;
