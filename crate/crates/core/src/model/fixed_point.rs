use alloc::format;

use num_complex::Complex64;

use super::{MeanFieldState, ModelParams, U_ZERO_THRESHOLD};
use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FixedPointKind {
    /// All atoms down, empty cavity.
    Normal,
    /// All atoms up, empty cavity.
    Inverted,
    /// Super-radiant branch with `jx > 0`.
    SuperRadiantPlus,
    /// Super-radiant branch with `jx < 0`, the parity image of the `+` branch.
    SuperRadiantMinus,
}

impl FixedPointKind {
    pub const ALL: [Self; 4] = [
        Self::Normal,
        Self::Inverted,
        Self::SuperRadiantPlus,
        Self::SuperRadiantMinus,
    ];

    pub fn is_super_radiant(self) -> bool {
        matches!(self, Self::SuperRadiantPlus | Self::SuperRadiantMinus)
    }
}

/// Coupling at which the normal phase (`jz = -1/2`) gives way to the
/// super-radiant pair:
///
/// `g_c = sqrt(ω0 [(ω - U/2)² + κ²] / (4 (ω - U/2)))`.
///
/// Only defined for `ω - U/2 > 0`.
pub fn critical_coupling(p: &ModelParams) -> Result<f64> {
    let detuning = p.omega - 0.5 * p.u;
    if detuning <= 0.0 {
        return Err(Error::Domain(format!(
            "critical coupling needs omega - U/2 > 0, got {detuning}"
        )));
    }
    Ok(sqrt(
        p.omega0 * (detuning * detuning + p.kappa * p.kappa) / (4.0 * detuning),
    ))
}

/// Coupling at which the super-radiant pair branches off the inverted phase
/// (`jz = +1/2`): `sqrt(ω0 [(ω + U/2)² + κ²] / (-4 (ω + U/2)))`.
///
/// Only defined for `ω + U/2 < 0`, the red-detuned regime where the normal
/// phase is already unstable below threshold.
pub fn inverted_critical_coupling(p: &ModelParams) -> Result<f64> {
    let detuning = p.omega + 0.5 * p.u;
    if detuning >= 0.0 {
        return Err(Error::Domain(format!(
            "inverted-phase threshold needs omega + U/2 < 0, got {detuning}"
        )));
    }
    Ok(sqrt(
        p.omega0 * (detuning * detuning + p.kappa * p.kappa) / (-4.0 * detuning),
    ))
}

/// The super-radiant threshold for whichever regime `p` is in: the normal
/// phase threshold when `ω - U/2 > 0`, otherwise the inverted phase one.
pub fn threshold_coupling(p: &ModelParams) -> Result<f64> {
    critical_coupling(p).or_else(|_| inverted_critical_coupling(p))
}

/// Closed-form fixed points of the mean-field equations. Fixed points do not
/// depend on the feedback parameters.
pub fn fixed_point(kind: FixedPointKind, p: &ModelParams) -> Result<MeanFieldState> {
    match kind {
        FixedPointKind::Normal => Ok(MeanFieldState::NORMAL),
        FixedPointKind::Inverted => Ok(MeanFieldState::INVERTED),
        FixedPointKind::SuperRadiantPlus => super_radiant(p, 1.0),
        FixedPointKind::SuperRadiantMinus => super_radiant(p, -1.0),
    }
}

fn super_radiant(p: &ModelParams, sign: f64) -> Result<MeanFieldState> {
    let g = p.g;
    if let Ok(gc) = threshold_coupling(p) {
        if g <= gc {
            return Err(Error::NotAFixedPoint(format!(
                "super-radiant phase needs g > g_c = {gc}, got g = {g}"
            )));
        }
    }
    let jz = super_radiant_jz(p)?;
    if !(jz.abs() < 0.5) {
        return Err(Error::NotAFixedPoint(format!(
            "super-radiant jz = {jz} is off the Bloch sphere"
        )));
    }
    let jx = sign * sqrt(0.25 - jz * jz);
    let alpha = -2.0 * g * jx / Complex64::new(p.omega + p.u * jz, -p.kappa);
    Ok(MeanFieldState::new(alpha.re, alpha.im, jx, 0.0, jz))
}

/// Inversion of the super-radiant pair.
///
/// For `U ≠ 0` the stationarity conditions give a quadratic in `jz` with roots
/// `-ω/U ± sqrt(r)`, `r = [g²(4ω² - U²) - ω0 U κ²] / [U²(ω0 U + 4g²)]`; the root
/// closer to zero is the one that connects to the threshold (it is the `-`
/// root whenever `-ω/U > 0`). For `U = 0` the root is `-g_c² / (2 g²)`.
fn super_radiant_jz(p: &ModelParams) -> Result<f64> {
    let (g, w, u) = (p.g, p.omega, p.u);
    if u.abs() < U_ZERO_THRESHOLD {
        let gc = critical_coupling(p)?;
        return Ok(-gc * gc / (2.0 * g * g));
    }
    let denom = u * u * (p.omega0 * u + 4.0 * g * g);
    let radicand = (g * g * (4.0 * w * w - u * u) - p.omega0 * u * p.kappa * p.kappa) / denom;
    if !(radicand >= 0.0) {
        return Err(Error::Domain(format!(
            "super-radiant radicand is negative ({radicand})"
        )));
    }
    let centre = -w / u;
    let root = sqrt(radicand);
    Ok(if centre >= 0.0 { centre - root } else { centre + root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mean_field_rhs;
    use crate::units::{from_2pi_mhz, to_2pi_mhz};
    use approx::assert_relative_eq;

    #[test]
    fn critical_coupling_reference_value() {
        // Quoted to two significant figures as 0.19 · 2π MHz; the exact value
        // below was evaluated independently in extended precision.
        let gc = to_2pi_mhz(critical_coupling(&ModelParams::reference(0.0)).unwrap());
        assert_eq!(libm::round(gc * 100.0) / 100.0, 0.19);
        assert_relative_eq!(gc, 0.193_726_925_149_236_26, max_relative = 1e-14);
    }

    #[test]
    fn critical_coupling_without_dissipation_or_shift() {
        let p = ModelParams {
            u: 0.0,
            kappa: 1e-300,
            ..ModelParams::reference(0.0)
        };
        let gc = critical_coupling(&p).unwrap();
        assert_relative_eq!(gc, sqrt(p.omega0 * p.omega) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn critical_coupling_exact_rational_case() {
        // {ω0, ω, U, κ} = {1, 10, 0, 1}·2π: g_c² = (2π)² · 1·(100 + 1)/(4·10) = (2π)² · 101/40.
        let tau = core::f64::consts::TAU;
        let p = ModelParams::new(tau, 10.0 * tau, 0.0, tau, 0.0, 1.0).unwrap();
        let expected = tau * sqrt(101.0 / 40.0);
        assert_relative_eq!(critical_coupling(&p).unwrap(), expected, max_relative = 1e-15);
    }

    #[test]
    fn critical_coupling_outside_regime() {
        let p = ModelParams::reference(0.0).with_omega(from_2pi_mhz(-10.0));
        assert!(matches!(critical_coupling(&p), Err(Error::Domain(_))));
        let gc = inverted_critical_coupling(&p).unwrap();
        assert_relative_eq!(threshold_coupling(&p).unwrap(), gc);
        // (ω + U/2) = -14·2π: g_c² = ω0 (14² + 1.25²)/(4·14) in (2π)² units.
        let expected = from_2pi_mhz(sqrt(8.3e-3 * (196.0 + 1.5625) / 56.0));
        assert_relative_eq!(gc, expected, max_relative = 1e-13);
    }

    #[test]
    fn trivial_fixed_points() {
        let p = ModelParams::reference(1.0);
        assert_eq!(
            fixed_point(FixedPointKind::Normal, &p).unwrap().as_array(),
            [0.0, 0.0, 0.0, 0.0, -0.5]
        );
        assert_eq!(
            fixed_point(FixedPointKind::Inverted, &p).unwrap().as_array(),
            [0.0, 0.0, 0.0, 0.0, 0.5]
        );
    }

    #[test]
    fn super_radiant_without_shift_at_twice_threshold() {
        let base = ModelParams {
            u: 0.0,
            ..ModelParams::reference(0.0)
        };
        let p = base.with_g(2.0 * critical_coupling(&base).unwrap());
        let x = fixed_point(FixedPointKind::SuperRadiantPlus, &p).unwrap();
        assert_relative_eq!(x.jz, -0.125, max_relative = 1e-14);
        assert!(mean_field_rhs(&x, &p).max_abs() < 1e-12);
    }

    #[test]
    fn super_radiant_residual_and_constraint() {
        let base = ModelParams::reference(0.0);
        let gc = critical_coupling(&base).unwrap();
        for ratio in [1.001, 1.1, 1.5, 3.0, 10.0] {
            let p = base.with_g(ratio * gc);
            for kind in [FixedPointKind::SuperRadiantPlus, FixedPointKind::SuperRadiantMinus] {
                let x = fixed_point(kind, &p).unwrap();
                assert!(mean_field_rhs(&x, &p).max_abs() < 1e-12, "{ratio} {kind:?}");
                assert!(x.spin_norm_error() < 1e-15);
            }
            let plus = fixed_point(FixedPointKind::SuperRadiantPlus, &p).unwrap();
            let minus = fixed_point(FixedPointKind::SuperRadiantMinus, &p).unwrap();
            assert_eq!(plus.parity(), minus);
            assert!(plus.jx > 0.0);
        }
    }

    #[test]
    fn super_radiant_matches_bisection_of_stationarity() {
        // With jy = 0 and the cavity slaved to jx, stationarity of jy divided
        // by jx reads  ω0 (ω̃² + κ²) + 4 U g² (1/4 - jz²) + 8 g² jz ω̃ = 0,
        // ω̃ = ω + U jz. Solve it by bisection on (-1/2, 0).
        let base = ModelParams::reference(0.0);
        let p = base.with_g(1.1 * critical_coupling(&base).unwrap());
        let h = |jz: f64| {
            let wt = p.omega + p.u * jz;
            p.omega0 * (wt * wt + p.kappa * p.kappa)
                + 4.0 * p.u * p.g * p.g * (0.25 - jz * jz)
                + 8.0 * p.g * p.g * jz * wt
        };
        let (mut lo, mut hi) = (-0.5, 0.0);
        assert!(h(lo) * h(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(lo) * h(mid) <= 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let x = fixed_point(FixedPointKind::SuperRadiantPlus, &p).unwrap();
        assert_relative_eq!(x.jz, 0.5 * (lo + hi), max_relative = 1e-12);
    }

    #[test]
    fn super_radiant_below_threshold_is_rejected() {
        let base = ModelParams::reference(0.0);
        let p = base.with_g(0.9 * critical_coupling(&base).unwrap());
        assert!(matches!(
            fixed_point(FixedPointKind::SuperRadiantPlus, &p),
            Err(Error::NotAFixedPoint(_))
        ));
    }

    #[test]
    fn super_radiant_red_detuned_branch() {
        let base = ModelParams::reference(0.0).with_omega(from_2pi_mhz(-10.0));
        let gc = threshold_coupling(&base).unwrap();
        let p = base.with_g(1.5 * gc);
        let x = fixed_point(FixedPointKind::SuperRadiantPlus, &p).unwrap();
        assert!(x.jz > -0.5 && x.jz < 0.5);
        assert!(mean_field_rhs(&x, &p).max_abs() < 1e-12);
        // branches off the inverted phase
        let near = fixed_point(FixedPointKind::SuperRadiantPlus, &base.with_g(1.0001 * gc)).unwrap();
        assert!(near.jz > 0.49);
    }

    #[test]
    fn super_radiant_approaches_normal_at_threshold() {
        let base = ModelParams::reference(0.0);
        let gc = critical_coupling(&base).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let x = fixed_point(FixedPointKind::SuperRadiantPlus, &base.with_g((1.0 + eps) * gc)).unwrap();
            let d = x.distance(&MeanFieldState::NORMAL);
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-3);
    }
}
