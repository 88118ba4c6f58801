//! Unit conventions.
//!
//! Internally every rate is an angular frequency in rad/μs and every time is
//! in μs. Physical parameters are usually quoted as `x · 2π MHz`, which maps
//! to `x · 2π` rad/μs.

use core::f64::consts::TAU;

/// `x · 2π MHz` expressed in rad/μs.
pub fn from_2pi_mhz(x: f64) -> f64 {
    x * TAU
}

/// rad/μs expressed as a multiple of `2π MHz`.
pub fn to_2pi_mhz(rate: f64) -> f64 {
    rate / TAU
}

/// `x · 2π Hz` expressed in rad/μs.
pub fn from_2pi_hz(x: f64) -> f64 {
    x * TAU * 1e-6
}

/// rad/μs expressed as a multiple of `2π Hz`.
pub fn to_2pi_hz(rate: f64) -> f64 {
    rate / (TAU * 1e-6)
}

/// Milliseconds to μs.
pub fn ms(t: f64) -> f64 {
    t * 1e3
}
