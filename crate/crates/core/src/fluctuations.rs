//! Linearized quantum fluctuations about a fixed point.
//!
//! The collective spin is bosonized (Holstein–Primakoff) about the mean
//! field, leaving two coupled modes `δa` (cavity) and `δb` (atoms). In
//! Fourier space the delayed loop enters through `k (e^{iντ} - 1)` and
//! colours the input noise by
//! `S_in(ν) = 1 + (k/κ)(1 - cos ντ)`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, Lu, ZERO};
use crate::math::{cos, ln, sqrt};
use crate::model::{critical_coupling, fixed_point, FixedPointKind, MeanFieldState, ModelParams};
use crate::quadrature::{self, QuadOptions};
use crate::stability::{characteristic_roots, linearize, SearchOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPCoefficients {
    /// Cavity frequency `ω + U jz`.
    pub omega_a: f64,
    /// Atomic mode frequency.
    pub omega_b: f64,
    pub lambda1_c: f64,
    pub lambda2_c: f64,
    /// Atomic squeezing term.
    pub chi: f64,
}

impl HPCoefficients {
    /// `G = λ1ᶜ - i λ2ᶜ`.
    pub fn coupling(&self) -> Complex64 {
        Complex64::new(self.lambda1_c, -self.lambda2_c)
    }
}

/// Coefficients of the quadratic fluctuation Hamiltonian, valid in the normal
/// and super-radiant phases:
///
/// ```text
/// ω_a = ω + U jz
/// ω_b = ω0 + 4g² ω_a/(ω_a² + κ²) (½ + jz) + U |α|²
/// λ1ᶜ = -2g jz/√(½ - jz) - 2g U ω_a/(ω_a² + κ²) (½ + jz) √(½ - jz)
/// λ2ᶜ = 2g U κ/(ω_a² + κ²) (½ + jz) √(½ - jz)
/// χ   = 4g² ω_a/(ω_a² + κ²) (½ + jz)(3/2 - jz)/(½ - jz)
/// ```
pub fn hp_coefficients(p: &ModelParams, fp: &MeanFieldState) -> Result<HPCoefficients> {
    p.validate()?;
    if !(fp.jz < 0.5) {
        return Err(Error::Domain(alloc::format!(
            "bosonization needs jz < 1/2, got {}",
            fp.jz
        )));
    }
    let (g, u, kappa) = (p.g, p.u, p.kappa);
    let jz = fp.jz;
    let omega_a = p.omega + u * jz;
    let lorentz = omega_a * omega_a + kappa * kappa;
    let up = 0.5 + jz;
    let down = 0.5 - jz;
    let root = sqrt(down);
    Ok(HPCoefficients {
        omega_a,
        omega_b: p.omega0 + 4.0 * g * g * omega_a / lorentz * up + u * fp.photon_number(),
        lambda1_c: -2.0 * g * jz / root - 2.0 * g * u * omega_a / lorentz * up * root,
        lambda2_c: 2.0 * g * u * kappa / lorentz * up * root,
        chi: 4.0 * g * g * omega_a / lorentz * up * (1.5 - jz) / down,
    })
}

/// Macroscopic amplitudes `a0 = √N ᾱ`, `b0 = √N √(½ + jz)` on the positive
/// `b0` branch. A fixed point with `jx < 0` is mapped to its parity image,
/// which has identical fluctuation spectra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldAmplitudes {
    pub a0: Complex64,
    pub b0: f64,
    pub n_atoms: f64,
}

impl MeanFieldAmplitudes {
    pub fn from_fixed_point(p: &ModelParams, fp: &MeanFieldState) -> Result<Self> {
        p.validate()?;
        if !(fp.jz.abs() <= 0.5) {
            return Err(Error::Domain(alloc::format!("|jz| must be <= 1/2, got {}", fp.jz)));
        }
        let fp = if fp.jx < 0.0 { fp.parity() } else { *fp };
        let n = p.n_atoms;
        Ok(Self {
            a0: fp.alpha() * sqrt(n),
            b0: sqrt(n) * sqrt(0.5 + fp.jz),
            n_atoms: n,
        })
    }

    pub fn alpha(&self) -> Complex64 {
        self.a0 / sqrt(self.n_atoms)
    }

    pub fn b0_normalized(&self) -> f64 {
        self.b0 / sqrt(self.n_atoms)
    }

    /// Coefficient of `(δb + δb†)` in the expanded Hamiltonian,
    /// `2g (a0 + a0*)(N/2 - b0²)/√(N k̃) + ω0 b0 + (U/N) b0 |a0|²` with
    /// `k̃ = N - b0²`. Vanishes at a fixed point.
    pub fn linear_term(&self, p: &ModelParams) -> f64 {
        let n = self.n_atoms;
        let kt = n - self.b0 * self.b0;
        2.0 * p.g * (2.0 * self.a0.re) * (0.5 * n - self.b0 * self.b0) / sqrt(n * kt)
            + p.omega0 * self.b0
            + p.u / n * self.b0 * self.a0.norm_sqr()
    }
}

pub fn input_noise_spectrum(nu: f64, kappa: f64, k: f64, tau: f64) -> f64 {
    1.0 + k / kappa * (1.0 - cos(nu * tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFunctions {
    pub coeffs: HPCoefficients,
    pub kappa: f64,
    pub k: f64,
    pub tau: f64,
}

pub fn spectral_functions(c: HPCoefficients, kappa: f64, k: f64, tau: f64) -> SpectralFunctions {
    SpectralFunctions {
        coeffs: c,
        kappa,
        k,
        tau,
    }
}

impl SpectralFunctions {
    /// `κ - iν - k (e^{iντ} - 1)`.
    fn damping(&self, nu: f64) -> Complex64 {
        let loop_term = Complex64::from_polar(1.0, nu * self.tau) - 1.0;
        Complex64::new(self.kappa, -nu) - loop_term * self.k
    }

    /// `N(ν) = ω_a + i [κ - iν - k (e^{iντ} - 1)]`.
    pub fn n(&self, nu: f64) -> Complex64 {
        I * self.damping(nu) + self.coeffs.omega_a
    }

    /// `D(ν) = (ω_a² + q²)(ν² - ω_b(ω_b + χ)) + 4 |G|² ω_a ω_b` with `q` the
    /// delayed damping.
    pub fn d(&self, nu: f64) -> Complex64 {
        let c = &self.coeffs;
        let q = self.damping(nu);
        (q * q + c.omega_a * c.omega_a) * (nu * nu - c.omega_b * (c.omega_b + c.chi))
            + 4.0 * c.coupling().norm_sqr() * c.omega_a * c.omega_b
    }

    pub fn input_noise(&self, nu: f64) -> f64 {
        input_noise_spectrum(nu, self.kappa, self.k, self.tau)
    }

    /// `4 ω_b² |G²/D(ν)|² S_in(ν)`.
    pub fn photon_integrand(&self, nu: f64) -> f64 {
        let c = &self.coeffs;
        let g2 = c.coupling().norm_sqr();
        let d = self.d(nu).norm_sqr();
        4.0 * c.omega_b * c.omega_b * g2 * g2 / d * self.input_noise(nu)
    }

    /// Closed-form response of `δã(ν)` and `δb̃(ν)` to `(ã_in(ν), ã_in†(-ν))`.
    pub fn closed_form_rows(&self, nu: f64) -> [[Complex64; 2]; 2] {
        let c = &self.coeffs;
        let g = c.coupling();
        let pre = I * sqrt(2.0 * self.kappa) / self.d(nu);
        let spin = nu * nu - c.omega_b * (c.omega_b + c.chi);
        let n = self.n(nu);
        [
            [
                pre * (n * spin + 2.0 * c.omega_b * g.norm_sqr()),
                pre * g * g * (2.0 * c.omega_b),
            ],
            [
                pre * (nu + c.omega_b) * g.conj() * n,
                -pre * (nu + c.omega_b) * g * self.n(-nu).conj(),
            ],
        ]
    }
}

/// `[iν + A - Γ + Σ K_i e^{iντ_i}]⁻¹ · √(2Γ)`.
pub fn fourier_generic<const N: usize>(
    a: &CMat<N>,
    gamma: &[f64; N],
    feedback: &[(CMat<N>, f64)],
    nu: f64,
) -> Result<CMat<N>> {
    let mut m = *a;
    for i in 0..N {
        m[i][i] += I * nu - gamma[i];
    }
    for (kmat, tau) in feedback {
        let phase = Complex64::from_polar(1.0, nu * tau);
        for i in 0..N {
            for j in 0..N {
                m[i][j] += kmat[i][j] * phase;
            }
        }
    }
    let lu = Lu::new(m);
    if lu.pivot_ratio() < 1e-12 {
        return Err(Error::SingularAtFrequency { nu });
    }
    let mut t = lu.inverse().ok_or(Error::SingularAtFrequency { nu })?;
    for row in t.iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= sqrt(2.0 * gamma[j]);
        }
    }
    Ok(t)
}

/// Coupling matrix, damping and loop matrix of the fluctuation equations in
/// the basis `(δa, δa†, δb, δb†)`.
pub fn dicke_fourier_system(s: &SpectralFunctions) -> (CMat<4>, [f64; 4], CMat<4>) {
    let c = &s.coeffs;
    let g = c.coupling();
    let (l1, l2, wa, wb, chi, k) = (c.lambda1_c, c.lambda2_c, c.omega_a, c.omega_b, c.chi, s.k);
    let re = |x: f64| Complex64::new(x, 0.0);
    let a = [
        [-I * wa - k, ZERO, -I * g, -I * g],
        [ZERO, I * wa - k, I * g.conj(), I * g.conj()],
        [-I * l1 + l2, -I * l1 - l2, -I * (wb + 0.5 * chi), -I * (0.5 * chi)],
        [I * l1 - l2, I * l1 + l2, I * (0.5 * chi), I * (wb + 0.5 * chi)],
    ];
    let mut kmat = [[ZERO; 4]; 4];
    kmat[0][0] = re(k);
    kmat[1][1] = re(k);
    (a, [s.kappa, s.kappa, 0.0, 0.0], kmat)
}

pub fn dicke_transfer(s: &SpectralFunctions, nu: f64) -> Result<CMat<4>> {
    let (a, gamma, kmat) = dicke_fourier_system(s);
    fourier_generic(&a, &gamma, &[(kmat, s.tau)], nu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctOptions {
    pub quad: QuadOptions,
    /// Bound on the neglected `ν⁻⁷` tail relative to the accumulated integral.
    pub tail_tol: f64,
    pub search: SearchOptions,
}

impl Default for FluctOptions {
    fn default() -> Self {
        Self {
            quad: QuadOptions::default(),
            tail_tol: 1e-9,
            search: SearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonFluct {
    /// `⟨δa†δa⟩` in steady state.
    pub value: f64,
    /// Quadrature error estimate plus the tail bound, both absolute.
    pub error: f64,
    /// Upper integration limit in rad/μs.
    pub nu_max: f64,
    /// Rightmost characteristic root of the matching mean-field linearization.
    pub lambda1: Complex64,
}

fn push_panels(edges: &mut Vec<f64>, lo: f64, hi: f64, max_width: Option<f64>) {
    edges.push(lo);
    if let Some(w) = max_width {
        let n = libm::ceil((hi - lo) / w) as usize;
        for i in 1..n {
            edges.push(lo + (hi - lo) * i as f64 / n as f64);
        }
    }
    edges.push(hi);
}

fn finalize_edges(mut edges: Vec<f64>) -> Vec<f64> {
    edges.retain(|x| x.is_finite());
    edges.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(edges.len());
    for x in edges {
        match out.last() {
            Some(&last) if x - last <= 1e-14 * x.abs().max(1e-300) => {}
            _ => out.push(x),
        }
    }
    out
}

/// Steady-state photon-number fluctuation
///
/// `⟨δa†δa⟩ = (κ/π) ∫ 4 ω_b² |G²/D(ν)|² S_in(ν) dν`
///
/// over the real line, evaluated as twice the integral over `ν ≥ 0`.
/// The zeros of `D` are the characteristic roots `λ` of the mean-field
/// linearization at `ν = iλ`; they set the resonances refined by the
/// quadrature and the stability precondition.
pub fn steady_state_photon_fluct_with(
    p: &ModelParams,
    fp: &MeanFieldState,
    k: f64,
    tau: f64,
    opts: &FluctOptions,
) -> Result<PhotonFluct> {
    let coeffs = hp_coefficients(p, fp)?;
    let spec = spectral_functions(coeffs, p.kappa, k, tau);
    let sys = linearize(p, fp)?.with_feedback(k, tau)?;
    let roots = characteristic_roots(&sys, &opts.search, &[])?;
    let lambda1 = roots[0].lambda;
    if lambda1.re >= 0.0 {
        return Err(Error::DivergentFluctuations {
            nu: lambda1.im,
            re_lambda: lambda1.re,
        });
    }

    let panel = if k > 0.0 && tau > 0.0 {
        Some(core::f64::consts::PI / tau)
    } else {
        None
    };
    let c = &coeffs;
    let mut nu_max = 4.0 * (c.omega_a.abs() + p.kappa + 2.0 * k + c.omega_b.abs() + c.chi.abs());
    for r in &roots {
        nu_max = nu_max.max(2.0 * r.lambda.im.abs());
    }

    let mut edges = Vec::new();
    push_panels(&mut edges, 0.0, nu_max, panel);
    for r in &roots {
        let centre = r.lambda.im.abs();
        let width = r.lambda.re.abs().max(1e-300);
        for m in [0.0, 1.0, 4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0] {
            for s in [-1.0, 1.0] {
                let x = centre + s * m * width;
                if x > 0.0 && x < nu_max {
                    edges.push(x);
                }
            }
        }
    }
    let wa = c.omega_a.abs();
    for m in [-4.0, -1.0, 0.0, 1.0, 4.0] {
        let x = wa + m * p.kappa;
        if x > 0.0 && x < nu_max {
            edges.push(x);
        }
    }
    let edges = finalize_edges(edges);
    let f = |nu: f64| spec.photon_integrand(nu);
    let head = quadrature::integrate(f, &edges, &opts.quad)?;
    let mut value = head.value;
    let mut error = head.error;

    // Beyond all resonances the integrand falls off as ν⁻⁸ under the
    // bounded factor S_in ≤ 1 + 2k/κ.
    let envelope = 1.0 + 2.0 * k / p.kappa;
    let tail = |v: f64| spec.photon_integrand(v) / spec.input_noise(v) * envelope * v / 7.0;
    let mut doublings = 0;
    while tail(nu_max) > opts.tail_tol * value.abs() {
        if doublings == 40 {
            return Err(Error::Quadrature {
                estimate: value,
                error: tail(nu_max),
            });
        }
        let mut more = Vec::new();
        push_panels(&mut more, nu_max, 2.0 * nu_max, panel);
        let r = quadrature::integrate(f, &finalize_edges(more), &opts.quad)?;
        value += r.value;
        error += r.error;
        nu_max *= 2.0;
        doublings += 1;
    }
    error += tail(nu_max);

    let scale = 2.0 * p.kappa / core::f64::consts::PI;
    Ok(PhotonFluct {
        value: scale * value,
        error: scale * error,
        nu_max,
        lambda1,
    })
}

pub fn steady_state_photon_fluct(p: &ModelParams, fp: &MeanFieldState, k: f64, tau: f64) -> Result<f64> {
    Ok(steady_state_photon_fluct_with(p, fp, k, tau, &FluctOptions::default())?.value)
}

/// Which side of the transition a coupling lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Normal,
    SuperRadiant,
}

impl Side {
    pub fn of(p: &ModelParams) -> Result<Self> {
        let gc = critical_coupling(p)?;
        if p.g < gc {
            Ok(Self::Normal)
        } else if p.g > gc {
            Ok(Self::SuperRadiant)
        } else {
            Err(Error::Domain("coupling sits exactly at the critical point".into()))
        }
    }

    pub fn fixed_point_kind(self) -> FixedPointKind {
        match self {
            Self::Normal => FixedPointKind::Normal,
            Self::SuperRadiant => FixedPointKind::SuperRadiantPlus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::SuperRadiant => "super-radiant",
        }
    }
}

/// Photon fluctuation at the stable fixed point on the side of `g_c` where
/// `p.g` lies.
pub fn photon_fluct_at(p: &ModelParams, k: f64, tau: f64, opts: &FluctOptions) -> Result<PhotonFluct> {
    let side = Side::of(p)?;
    let fp = fixed_point(side.fixed_point_kind(), p)?;
    steady_state_photon_fluct_with(p, &fp, k, tau, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    /// `-2 ×` the least-squares slope of `ln[(g_c/g)√⟨δa†δa⟩]` against
    /// `ln|1 - g/g_c|`, so that `⟨δa†δa⟩ ∝ |1 - g/g_c|^{-exponent}`.
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Least-squares power law through `(ε_i, y_i)` with `y = ln[(g_c/g)√f]`.
pub fn fit_exponent(eps: &[f64], y: &[f64]) -> Result<ExponentFit> {
    let n = eps.len();
    if n < 3 || y.len() != n {
        return Err(Error::InvariantViolation(
            "exponent fit needs >= 3 matched points".into(),
        ));
    }
    let x: Vec<f64> = eps.iter().map(|e| ln(*e)).collect();
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvariantViolation(
            "exponent fit needs distinct |1 - g/g_c|".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let se = sqrt(ssr / (n as f64 - 2.0) / sxx);
    Ok(ExponentFit {
        exponent: -2.0 * slope,
        stderr: 2.0 * se,
        intercept,
    })
}

/// Rescaled amplitude `ln[(g_c/g)√f]` used by the exponent fit.
pub fn rescaled_log_amplitude(g_over_gc: f64, fluct: f64) -> f64 {
    ln(sqrt(fluct) / g_over_gc)
}

/// Fits the critical power law of the photon fluctuations over couplings on
/// one side of `g_c`.
pub fn photon_flux_exponent(
    p: &ModelParams,
    k: f64,
    tau: f64,
    g_grid: &[f64],
    opts: &FluctOptions,
) -> Result<ExponentFit> {
    let gc = critical_coupling(p)?;
    let below = g_grid.iter().all(|&g| g < gc);
    let above = g_grid.iter().all(|&g| g > gc);
    if !(below || above) {
        return Err(Error::InvariantViolation(
            "coupling grid must lie on one side of g_c".into(),
        ));
    }
    if g_grid.iter().any(|&g| !((1.0 - g / gc).abs() < 0.5)) {
        return Err(Error::InvariantViolation(
            "couplings must satisfy |1 - g/g_c| < 1/2".into(),
        ));
    }
    let mut eps = Vec::with_capacity(g_grid.len());
    let mut y = Vec::with_capacity(g_grid.len());
    for &g in g_grid {
        let f = photon_fluct_at(&p.with_g(g), k, tau, opts)?.value;
        eps.push((1.0 - g / gc).abs());
        y.push(rescaled_log_amplitude(g / gc, f));
    }
    fit_exponent(&eps, &y)
}
