use alloc::format;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::sqrt;

/// Tolerance on the beam-splitter normalization `r² + s² = 2`.
const NORMALIZATION_TOL: f64 = 1e-12;

/// A 2×2 beam-splitter transfer matrix acting on `(port 1, port 2)`.
pub type BeamSplitter = [[Complex64; 2]; 2];

/// Description of the delayed optical loop from mirror `c` back to mirror
/// `b`, plus the derived feedback gain `k = r s sqrt(κ_b κ_c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackParams {
    pub kappa_b: f64,
    pub kappa_c: f64,
    pub r: f64,
    pub s: f64,
    /// Phase on the delayed arm. It cancels from the deterministic loop
    /// equation for the beam-splitter pair used here.
    pub phi: f64,
    /// Loop delay in μs.
    pub tau: f64,
    k: f64,
}

impl FeedbackParams {
    pub fn new(kappa_b: f64, kappa_c: f64, r: f64, s: f64, phi: f64, tau: f64) -> Result<Self> {
        let mut f = Self {
            kappa_b,
            kappa_c,
            r,
            s,
            phi,
            tau,
            k: 0.0,
        };
        if !(kappa_b >= 0.0 && kappa_c >= 0.0) {
            return Err(Error::InvariantViolation(format!(
                "mirror decay rates must be >= 0, got {kappa_b}, {kappa_c}"
            )));
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvariantViolation(format!(
                "tau must be finite and >= 0, got {tau}"
            )));
        }
        if !phi.is_finite() {
            return Err(Error::InvariantViolation(format!("phi must be finite, got {phi}")));
        }
        f.k = feedback_gain(&f)?;
        Ok(f)
    }

    /// Symmetric cavity (`κ_b = κ_c = κ/2`) with the loop set so that
    /// `k = fraction · κ/2`, `0 ≤ fraction ≤ 1`. `fraction = 1` is the lossless
    /// loop `r = s = 1`.
    pub fn symmetric(kappa: f64, fraction: f64, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvariantViolation(format!(
                "gain fraction must lie in [0, 1], got {fraction}"
            )));
        }
        let (r, s) = split_for_product(fraction);
        Self::new(0.5 * kappa, 0.5 * kappa, r, s, 0.0, tau)
    }

    /// Loop with no light fed back (`r = 0`).
    pub fn open_loop(kappa: f64) -> Self {
        Self::symmetric(kappa, 0.0, 0.0).expect("open loop is always valid")
    }

    /// Derived gain `k` in rad/μs.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Same loop with a different delay.
    pub fn with_tau(self, tau: f64) -> Result<Self> {
        Self::new(self.kappa_b, self.kappa_c, self.r, self.s, self.phi, tau)
    }

    /// `true` when the feedback force vanishes identically.
    pub fn is_open(&self) -> bool {
        self.k == 0.0 || self.tau == 0.0
    }
}

/// Beam-splitter amplitudes with `r s = product` and `r² + s² = 2`, `r ≤ s`.
fn split_for_product(product: f64) -> (f64, f64) {
    let sum = sqrt(2.0 + 2.0 * product);
    let diff = sqrt((2.0 - 2.0 * product).max(0.0));
    (0.5 * (sum - diff), 0.5 * (sum + diff))
}

/// `k = r s sqrt(κ_b κ_c)`, bounded by `sqrt(κ_b κ_c)` with equality at `r = s = 1`.
pub fn feedback_gain(f: &FeedbackParams) -> Result<f64> {
    if !(f.r >= 0.0 && f.s >= 0.0) {
        return Err(Error::InvariantViolation(format!(
            "beam-splitter amplitudes must be >= 0, got r = {}, s = {}",
            f.r, f.s
        )));
    }
    let norm = f.r * f.r + f.s * f.s;
    if (norm - 2.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvariantViolation(format!("r² + s² must equal 2, got {norm}")));
    }
    Ok(f.r * f.s * sqrt(f.kappa_b * f.kappa_c))
}

/// First beam splitter, mapping `(ν1, c_out)` to the two loop arms `(f1, f2)`.
pub fn beam_splitter_1(f: &FeedbackParams) -> BeamSplitter {
    let half = Complex64::from_polar(1.0, 0.5 * f.phi);
    let pre = half.conj() / sqrt(2.0);
    [[pre * f.s, -pre * f.r * half], [pre * f.r * half.conj(), pre * f.s]]
}

/// Second beam splitter, mapping `(e^{iφ} f2(t - τ), f1(t))` to `(b_in, ν2)`.
pub fn beam_splitter_2(f: &FeedbackParams) -> BeamSplitter {
    let half = Complex64::from_polar(1.0, 0.5 * f.phi);
    let pre = half.conj() / sqrt(2.0);
    [[-pre * f.r, -pre * f.s * half], [pre * f.s * half.conj(), -pre * f.r]]
}

/// Coherent (non-vacuum) part of the field incident on mirror `b`,
/// `(r s / 2) (c_out(t) - c_out(t - τ))`. It vanishes whenever the output is
/// stationary.
pub fn effective_input_transform(f: &FeedbackParams, c_out_now: Complex64, c_out_delayed: Complex64) -> Complex64 {
    (c_out_now - c_out_delayed) * (0.5 * f.r * f.s)
}
