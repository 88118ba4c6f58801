use alloc::format;

use crate::error::{Error, Result};
use crate::units::from_2pi_mhz;

/// Constants of the open Dicke model, all rates in rad/μs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Collective atomic frequency.
    pub omega0: f64,
    /// Cavity detuning.
    pub omega: f64,
    /// Dispersive shift.
    pub u: f64,
    /// Cavity field decay rate.
    pub kappa: f64,
    /// Atom–cavity coupling.
    pub g: f64,
    /// Atom number; only used to build near-normal initial states.
    pub n_atoms: f64,
}

impl ModelParams {
    pub fn new(omega0: f64, omega: f64, u: f64, kappa: f64, g: f64, n_atoms: f64) -> Result<Self> {
        let p = Self {
            omega0,
            omega,
            u,
            kappa,
            g,
            n_atoms,
        };
        p.validate()?;
        Ok(p)
    }

    /// `{ω0, ω, U, κ} = {8.3e-3, 14.0, -8.0, 1.25} · 2π MHz` with `N = 1e5`,
    /// the values of the BEC cavity experiment this model is usually
    /// compared against.
    pub fn reference(g: f64) -> Self {
        Self {
            omega0: from_2pi_mhz(8.3e-3),
            omega: from_2pi_mhz(14.0),
            u: from_2pi_mhz(-8.0),
            kappa: from_2pi_mhz(1.25),
            g,
            n_atoms: 1e5,
        }
    }

    pub fn with_g(self, g: f64) -> Self {
        Self { g, ..self }
    }

    pub fn with_omega(self, omega: f64) -> Self {
        Self { omega, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega0, self.omega, self.u, self.kappa, self.g, self.n_atoms];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "non-finite model parameter in {self:?}"
            )));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvariantViolation(format!(
                "kappa must be > 0, got {}",
                self.kappa
            )));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvariantViolation(format!(
                "omega0 must be > 0, got {}",
                self.omega0
            )));
        }
        if self.n_atoms < 1.0 {
            return Err(Error::InvariantViolation(format!(
                "N must be >= 1, got {}",
                self.n_atoms
            )));
        }
        Ok(())
    }
}
