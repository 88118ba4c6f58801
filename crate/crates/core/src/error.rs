use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("requested fixed point does not exist: {0}")]
    NotAFixedPoint(String),
    #[error("step h = {h} exceeds the delay tau = {tau}")]
    StepTooLarge { h: f64, tau: f64 },
    #[error("state became non-finite at t = {t} us")]
    NonFiniteState { t: f64 },
    #[error("fixed point has |jz| = {jz:e}; the reduced linearization divides by jz")]
    DegenerateFixedPoint { jz: f64 },
    #[error("no characteristic root converged ({} candidates tried)", candidates.len())]
    SearchFailed {
        /// Every seed that was tried, with the residual reached from it.
        candidates: Vec<(Complex64, f64)>,
    },
    #[error("root search failed at grid index {index}: {source}")]
    ScanFailed {
        index: usize,
        source: alloc::boxed::Box<Error>,
    },
    #[error("transfer matrix singular at nu = {nu} rad/us")]
    SingularAtFrequency { nu: f64 },
    #[error("fluctuations diverge: unstable mode near nu = {nu} rad/us (Re lambda1 = {re_lambda:e})")]
    DivergentFluctuations { nu: f64, re_lambda: f64 },
    #[error("quadrature did not reach tolerance (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },
}
