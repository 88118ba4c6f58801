//! Linear stability of fixed points under delayed feedback.
//!
//! Eliminating `jz` through the spin constraint leaves four coordinates
//! `z = (δx1, δx2, δjx, δjy)` obeying
//!
//! `dz/dt = A′ z(t) + k B′ (z(t - τ) - z(t))`,  `B′ = diag(1, 1, 0, 0)`,
//!
//! whose exponential solutions `e^{λt}` satisfy `det Δ(λ) = 0` with
//! `Δ(λ) = λ I - A′ - k (e^{-λτ} - 1) B′`.
//!
//! Roots are seeded from a Chebyshev collocation of the delay generator and
//! polished by Newton's method on the determinant.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{det4, hadamard_bound, principal_minor4, CMat, ONE, ZERO};
use crate::math::{cos, sqrt};
use crate::model::{fixed_point, mean_field_rhs, FixedPointKind, MeanFieldState, ModelParams};

/// Fixed points with `|jz|` at or below this are rejected by [`linearize`].
pub const DEGENERATE_JZ: f64 = 1e-9;

/// Largest `‖rhs‖∞` accepted as a fixed point by [`linearize`].
pub const FIXED_POINT_TOL: f64 = 1e-9;

/// Diagonal of `B′`: the feedback acts on the cavity quadratures only.
pub const B_PRIME: [f64; 4] = [1.0, 1.0, 0.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedSystem {
    pub a_prime: [[f64; 4]; 4],
    /// Feedback gain in rad/μs.
    pub k: f64,
    /// Delay in μs.
    pub tau: f64,
    /// `ω + U jz`.
    pub omega_tilde: f64,
    /// `ω0 + U |α|²`.
    pub omega0_tilde: f64,
    pub fixed_point: MeanFieldState,
    pub params: ModelParams,
}

/// Builds `A′` at `fp`, without feedback (`k = τ = 0`).
pub fn linearize(p: &ModelParams, fp: &MeanFieldState) -> Result<LinearizedSystem> {
    p.validate()?;
    if !(fp.jz.abs() > DEGENERATE_JZ) {
        return Err(Error::DegenerateFixedPoint { jz: fp.jz });
    }
    let res = mean_field_rhs(fp, p).max_abs();
    if !(res < FIXED_POINT_TOL) {
        return Err(Error::NotAFixedPoint(alloc::format!(
            "mean-field residual {res:e} at {fp:?}"
        )));
    }
    let MeanFieldState { x1, x2, jx, jy, jz } = *fp;
    let (g, u, kappa) = (p.g, p.u, p.kappa);
    let wt = p.omega + u * jz;
    let w0t = p.omega0 + u * fp.photon_number();
    let a_prime = [
        [-kappa, wt, -u * x2 * jx / jz, -u * x2 * jy / jz],
        [-wt, -kappa, -2.0 * g + u * x1 * jx / jz, u * x1 * jy / jz],
        [-2.0 * u * x1 * jy, -2.0 * u * x2 * jy, 0.0, -w0t],
        [
            2.0 * u * x1 * jx - 4.0 * g * jz,
            2.0 * u * x2 * jx,
            w0t + 4.0 * g * x1 * jx / jz,
            4.0 * g * x1 * jy / jz,
        ],
    ];
    Ok(LinearizedSystem {
        a_prime,
        k: 0.0,
        tau: 0.0,
        omega_tilde: wt,
        omega0_tilde: w0t,
        fixed_point: *fp,
        params: *p,
    })
}

impl LinearizedSystem {
    pub fn with_feedback(mut self, k: f64, tau: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvariantViolation(alloc::format!(
                "gain k must be >= 0, got {k}"
            )));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvariantViolation(alloc::format!(
                "delay must be >= 0, got {tau}"
            )));
        }
        self.k = k;
        self.tau = tau;
        Ok(self)
    }

    /// True when the delayed term vanishes identically.
    pub fn is_open(&self) -> bool {
        self.k == 0.0 || self.tau == 0.0
    }

    fn feedback_factor(&self, lambda: Complex64) -> Complex64 {
        if self.is_open() {
            ZERO
        } else {
            (-lambda * self.tau).exp() - ONE
        }
    }

    pub fn char_matrix(&self, lambda: Complex64) -> [[Complex64; 4]; 4] {
        let fb = self.feedback_factor(lambda) * self.k;
        let mut m = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = Complex64::new(-self.a_prime[i][j], 0.0);
            }
            m[i][i] += lambda - fb * B_PRIME[i];
        }
        m
    }

    /// `d det Δ / dλ = Σ_j Δ′_jj · minor_jj` since `Δ′(λ) = I + k τ e^{-λτ} B′`
    /// is diagonal.
    pub fn char_det_derivative(&self, lambda: Complex64) -> Complex64 {
        let m = self.char_matrix(lambda);
        self.derivative_from(&m, lambda)
    }

    fn derivative_from(&self, m: &CMat<4>, lambda: Complex64) -> Complex64 {
        let delay = if self.is_open() {
            ZERO
        } else {
            (-lambda * self.tau).exp() * (self.k * self.tau)
        };
        let mut d = ZERO;
        for j in 0..4 {
            d += (ONE + delay * B_PRIME[j]) * principal_minor4(m, j);
        }
        d
    }

    /// `|det Δ(λ)|` relative to the Hadamard bound of `Δ(λ)`.
    pub fn normalized_residual(&self, lambda: Complex64) -> f64 {
        let m = self.char_matrix(lambda);
        let b = hadamard_bound(&m);
        if b == 0.0 {
            0.0
        } else {
            det4(&m).norm() / b
        }
    }

    /// Eigenvalues of `A′ - c B′`.
    fn shifted_eigenvalues(&self, c: f64) -> Vec<Complex64> {
        let mut a = Matrix4::<f64>::zeros();
        for i in 0..4 {
            for j in 0..4 {
                a[(i, j)] = self.a_prime[i][j];
            }
            a[(i, i)] -= c * B_PRIME[i];
        }
        match nalgebra::linalg::Schur::try_new(a, f64::EPSILON, 10_000) {
            Some(s) => s.complex_eigenvalues().iter().copied().collect(),
            None => Vec::new(),
        }
    }
}

pub fn char_det(sys: &LinearizedSystem, lambda: Complex64) -> Complex64 {
    det4(&sys.char_matrix(lambda))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharRoot {
    /// Complex rate in rad/μs; `Im ≥ 0` representative of a conjugate pair.
    pub lambda: Complex64,
    /// `|det Δ(λ)|` over the Hadamard bound of `Δ(λ)`.
    pub residual: f64,
    /// Number of distinct converged roots within `1e-6 κ`, this one included.
    pub multiplicity_hint: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Chebyshev degree of the collocation used for seeding.
    pub collocation_degree: usize,
    /// Window on `Re λ` in units of κ, symmetric about zero.
    pub re_window_kappa: f64,
    /// Window on `|Im λ|` in units of `|ω̃| + κ`.
    pub im_window_factor: f64,
    /// Roots closer than this (in units of κ) are merged.
    pub dedup_tol_kappa: f64,
    pub residual_tol: f64,
    pub max_newton: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            collocation_degree: 40,
            re_window_kappa: 5.0,
            im_window_factor: 3.0,
            dedup_tol_kappa: 1e-9,
            residual_tol: 1e-10,
            max_newton: 80,
        }
    }
}

impl SearchOptions {
    fn in_window(&self, sys: &LinearizedSystem, z: Complex64) -> bool {
        let kappa = sys.params.kappa;
        z.re.abs() <= self.re_window_kappa * kappa
            && z.im.abs() <= self.im_window_factor * (sys.omega_tilde.abs() + kappa)
    }
}

/// Chebyshev differentiation matrix on the `M + 1` extremal nodes
/// `x_j = cos(jπ/M)`.
fn cheb_diff(m: usize) -> (Vec<f64>, Vec<f64>) {
    let n = m + 1;
    let x: Vec<f64> = (0..n)
        .map(|j| cos(core::f64::consts::PI * j as f64 / m as f64))
        .collect();
    let c = |i: usize| {
        let base = if i == 0 || i == m { 2.0 } else { 1.0 };
        if i.is_multiple_of(2) {
            base
        } else {
            -base
        }
    };
    let mut d = alloc::vec![0.0; n * n];
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = c(i) / c(j) / (x[i] - x[j]);
                d[i * n + j] = v;
                row_sum += v;
            }
        }
        d[i * n + i] = -row_sum;
    }
    (x, d)
}

/// Eigenvalues of the collocated generator of `z′ = L0 z(t) + L1 z(t - τ)`
/// with `L0 = A′ - k B′`, `L1 = k B′`.
fn collocation_eigenvalues(sys: &LinearizedSystem, degree: usize) -> Vec<Complex64> {
    let m = degree.max(2);
    let nodes = m + 1;
    let dim = 4 * nodes;
    let (_, d) = cheb_diff(m);
    let scale = 2.0 / sys.tau;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..4 {
        for j in 0..4 {
            a[(i, j)] = sys.a_prime[i][j];
        }
        a[(i, i)] -= sys.k * B_PRIME[i];
        a[(i, 4 * m + i)] += sys.k * B_PRIME[i];
    }
    for row in 1..nodes {
        for col in 0..nodes {
            let v = scale * d[row * nodes + col];
            if v != 0.0 {
                for c in 0..4 {
                    a[(4 * row + c, 4 * col + c)] = v;
                }
            }
        }
    }
    match nalgebra::linalg::Schur::try_new(a, f64::EPSILON, 100_000) {
        Some(s) => s.complex_eigenvalues().iter().copied().collect(),
        None => Vec::new(),
    }
}

fn newton(sys: &LinearizedSystem, seed: Complex64, opts: &SearchOptions) -> (Complex64, f64) {
    let mut z = seed;
    for _ in 0..opts.max_newton {
        let m = sys.char_matrix(z);
        let f = det4(&m);
        let df = sys.derivative_from(&m, z);
        if df == ZERO || !df.is_finite() {
            break;
        }
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON * z.norm() {
            break;
        }
    }
    let r = sys.normalized_residual(z);
    (z, if r.is_finite() { r } else { f64::INFINITY })
}

/// Seeds for the root search: caller-supplied warm starts, the small-delay
/// approximation, the spectra of `A′` and `A′ - k B′`, and (when the delay is
/// active) the collocation spectrum.
fn seeds(sys: &LinearizedSystem, opts: &SearchOptions, warm: &[Complex64]) -> Vec<Complex64> {
    let mut s: Vec<Complex64> = warm.to_vec();
    if let Ok(r) = approx_rightmost(sys) {
        s.push(r.lambda);
    }
    s.extend(sys.shifted_eigenvalues(0.0));
    if !sys.is_open() {
        s.extend(sys.shifted_eigenvalues(sys.k));
        s.extend(collocation_eigenvalues(sys, opts.collocation_degree));
    }
    s.retain(|z| z.is_finite());
    s
}

/// Every distinct characteristic root reached from the seeds and lying in the
/// search window, sorted by decreasing real part.
pub fn characteristic_roots(sys: &LinearizedSystem, opts: &SearchOptions, warm: &[Complex64]) -> Result<Vec<CharRoot>> {
    let kappa = sys.params.kappa;
    let dedup = opts.dedup_tol_kappa * kappa;
    let mut candidates = Vec::new();
    let mut found: Vec<(Complex64, f64)> = Vec::new();
    for seed in seeds(sys, opts, warm) {
        if !opts.in_window(sys, seed) {
            continue;
        }
        let (z, r) = newton(sys, seed, opts);
        candidates.push((z, r));
        if !(r < opts.residual_tol) || !opts.in_window(sys, z) {
            continue;
        }
        let z = if z.im < 0.0 { z.conj() } else { z };
        match found.iter_mut().find(|(w, _)| (*w - z).norm() <= dedup) {
            Some(slot) => {
                if r < slot.1 {
                    *slot = (z, r);
                }
            }
            None => found.push((z, r)),
        }
    }
    if found.is_empty() {
        return Err(Error::SearchFailed { candidates });
    }
    found.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
    let cluster = 1e-6 * kappa;
    let roots = found
        .iter()
        .map(|&(z, r)| CharRoot {
            lambda: z,
            residual: r,
            multiplicity_hint: found.iter().filter(|(w, _)| (*w - z).norm() <= cluster).count(),
        })
        .collect();
    Ok(roots)
}

pub fn rightmost_root_with(sys: &LinearizedSystem, opts: &SearchOptions, warm: &[Complex64]) -> Result<CharRoot> {
    Ok(characteristic_roots(sys, opts, warm)?[0])
}

/// Root of `det Δ(λ) = 0` with the largest real part.
pub fn rightmost_root(sys: &LinearizedSystem) -> Result<CharRoot> {
    rightmost_root_with(sys, &SearchOptions::default(), &[])
}

/// Closed-form estimate `λ⁽⁰⁾ + λ⁽¹⁾` of the slow atomic root, valid for small
/// `λ τ` at fixed points with `jy = 0`:
///
/// `λ⁽⁰⁾ = i sqrt(ω̃0² + 4 g ω̃0 x1 jx / jz + 2 ω̃ ω̃0 S / ((κ² + ω̃²) jz))`,
/// `λ⁽¹⁾ = κ (1 + k τ) 2 ω̃ ω̃0 S / ((κ² + ω̃²)² jz)`,
///
/// with `S = |2 g jz - U ᾱ jx|²`.
pub fn approx_rightmost(sys: &LinearizedSystem) -> Result<CharRoot> {
    let fp = sys.fixed_point;
    if fp.jy.abs() > 1e-12 {
        return Err(Error::Domain(alloc::format!(
            "small-delay approximation needs jy = 0, got {}",
            fp.jy
        )));
    }
    let p = &sys.params;
    let (wt, w0t) = (sys.omega_tilde, sys.omega0_tilde);
    let lorentz = p.kappa * p.kappa + wt * wt;
    let s = (Complex64::new(2.0 * p.g * fp.jz, 0.0) - fp.alpha() * (p.u * fp.jx)).norm_sqr();
    let coupling = 2.0 * wt * w0t * s / fp.jz;
    let radicand = w0t * w0t + 4.0 * p.g * w0t * fp.x1 * fp.jx / fp.jz + coupling / lorentz;
    let scale = w0t * w0t + (coupling / lorentz).abs();
    if radicand < -1e-12 * scale {
        return Err(Error::Domain(alloc::format!(
            "small-delay approximation has negative radicand {radicand:e}"
        )));
    }
    let lambda0 = Complex64::new(0.0, sqrt(radicand.max(0.0)));
    let lambda1 = p.kappa * (1.0 + sys.k * sys.tau) * coupling / (lorentz * lorentz);
    let lambda = lambda0 + lambda1;
    Ok(CharRoot {
        lambda,
        residual: sys.normalized_residual(lambda),
        multiplicity_hint: 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub k: f64,
    pub tau: f64,
    /// `None` when no root converged at this cell.
    pub root: Option<CharRoot>,
    /// `Re λ₁` moved by more than half its previous magnitude since the
    /// previous grid point, typically where two branches exchange dominance.
    pub branch_jump: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauScan {
    pub points: Vec<ScanPoint>,
    /// Index of the most negative `Re λ₁`.
    pub argmin: usize,
}

fn continue_along(
    sys: &LinearizedSystem,
    k: f64,
    tau_grid: &[f64],
    opts: &SearchOptions,
    mut on_cell: impl FnMut(usize, Result<CharRoot>) -> Result<()>,
) -> Result<Vec<ScanPoint>> {
    let mut out = Vec::with_capacity(tau_grid.len());
    let mut prev: Option<CharRoot> = None;
    for (i, &tau) in tau_grid.iter().enumerate() {
        let cell = sys.with_feedback(k, tau)?;
        let warm: Vec<Complex64> = prev.iter().map(|r| r.lambda).collect();
        let res = rightmost_root_with(&cell, opts, &warm);
        let root = res.as_ref().ok().copied();
        on_cell(i, res)?;
        let branch_jump = match (prev, root) {
            (Some(a), Some(b)) => (b.lambda.re - a.lambda.re).abs() > 0.5 * a.lambda.re.abs(),
            _ => false,
        };
        out.push(ScanPoint {
            k,
            tau,
            root,
            branch_jump,
        });
        if root.is_some() {
            prev = root;
        }
    }
    Ok(out)
}

fn linearize_kind(p: &ModelParams, kind: FixedPointKind) -> Result<LinearizedSystem> {
    linearize(p, &fixed_point(kind, p)?)
}

/// `Re λ₁` along a delay grid at fixed gain, continuing the root from one
/// grid point to the next.
pub fn scan_tau(
    p: &ModelParams,
    kind: FixedPointKind,
    k: f64,
    tau_grid: &[f64],
    opts: &SearchOptions,
) -> Result<TauScan> {
    if tau_grid.is_empty() {
        return Err(Error::InvariantViolation("empty delay grid".into()));
    }
    if tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvariantViolation(
            "delay grid must be strictly increasing".into(),
        ));
    }
    let sys = linearize_kind(p, kind)?;
    let points = continue_along(&sys, k, tau_grid, opts, |index, res| {
        res.map(|_| ()).map_err(|e| Error::ScanFailed {
            index,
            source: alloc::boxed::Box::new(e),
        })
    })?;
    let argmin = points
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let re = |s: &ScanPoint| s.root.map_or(f64::INFINITY, |r| r.lambda.re);
            re(a.1).total_cmp(&re(b.1))
        })
        .map_or(0, |(i, _)| i);
    Ok(TauScan { points, argmin })
}

/// One row (fixed gain) of a `(k, τ)` surface. Cells whose search fails are
/// recorded with `root = None`.
pub fn scan_k_tau_row(
    p: &ModelParams,
    kind: FixedPointKind,
    k: f64,
    tau_grid: &[f64],
    opts: &SearchOptions,
) -> Result<Vec<ScanPoint>> {
    let sys = linearize_kind(p, kind)?;
    continue_along(&sys, k, tau_grid, opts, |_, _| Ok(()))
}

/// Full `(k, τ)` surface, one row per gain. Rows are independent; callers
/// wanting parallelism can map [`scan_k_tau_row`] over `k_grid` themselves.
pub fn scan_k_tau(
    p: &ModelParams,
    kind: FixedPointKind,
    k_grid: &[f64],
    tau_grid: &[f64],
    opts: &SearchOptions,
) -> Result<Vec<Vec<ScanPoint>>> {
    if k_grid.is_empty() || tau_grid.is_empty() {
        return Err(Error::InvariantViolation("empty scan grid".into()));
    }
    k_grid
        .iter()
        .map(|&k| scan_k_tau_row(p, kind, k, tau_grid, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::critical_coupling;
    use crate::units::{from_2pi_hz, to_2pi_hz};
    use proptest::prelude::*;

    fn params(ratio: f64) -> ModelParams {
        let p = ModelParams::reference(0.0);
        p.with_g(ratio * critical_coupling(&p).unwrap())
    }

    fn system(ratio: f64, kind: FixedPointKind) -> LinearizedSystem {
        let p = params(ratio);
        linearize(&p, &fixed_point(kind, &p).unwrap()).unwrap()
    }

    /// Right-hand side of the four-coordinate flow with `jz` slaved to the
    /// spin constraint on the fixed point's hemisphere.
    fn reduced_rhs(p: &ModelParams, z: [f64; 4], sign: f64) -> [f64; 4] {
        let jz = sign * sqrt(0.25 - z[2] * z[2] - z[3] * z[3]);
        let d = mean_field_rhs(&MeanFieldState::new(z[0], z[1], z[2], z[3], jz), p);
        [d.x1, d.x2, d.jx, d.jy]
    }

    fn fd_jacobian(p: &ModelParams, fp: &MeanFieldState) -> [[f64; 4]; 4] {
        let base = [fp.x1, fp.x2, fp.jx, fp.jy];
        let sign = fp.jz.signum();
        let h = 1e-6;
        let mut j = [[0.0; 4]; 4];
        for col in 0..4 {
            let mut up = base;
            let mut dn = base;
            up[col] += h;
            dn[col] -= h;
            let fu = reduced_rhs(p, up, sign);
            let fd = reduced_rhs(p, dn, sign);
            for row in 0..4 {
                j[row][col] = (fu[row] - fd[row]) / (2.0 * h);
            }
        }
        j
    }

    #[test]
    fn a_prime_matches_finite_differences() {
        for (ratio, kind) in [
            (0.74, FixedPointKind::Normal),
            (1.1, FixedPointKind::SuperRadiantPlus),
            (1.1, FixedPointKind::SuperRadiantMinus),
            (1.4, FixedPointKind::Inverted),
        ] {
            let sys = system(ratio, kind);
            let fd = fd_jacobian(&sys.params, &sys.fixed_point);
            for i in 0..4 {
                for j in 0..4 {
                    let a = sys.a_prime[i][j];
                    assert!(
                        (fd[i][j] - a).abs() <= 1e-6 * (a.abs() + 1e-2),
                        "{kind:?} entry ({i},{j}): {a} vs {}",
                        fd[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn normal_phase_matrix_has_only_bare_entries() {
        let sys = system(0.74, FixedPointKind::Normal);
        let p = sys.params;
        let wt = p.omega - 0.5 * p.u;
        let want = [
            [-p.kappa, wt, 0.0, 0.0],
            [-wt, -p.kappa, -2.0 * p.g, 0.0],
            [0.0, 0.0, 0.0, -p.omega0],
            [2.0 * p.g, 0.0, p.omega0, 0.0],
        ];
        assert_eq!(sys.a_prime, want);
    }

    #[test]
    fn degenerate_and_non_fixed_points_are_rejected() {
        let p = params(1.0);
        let bad = MeanFieldState::new(0.1, 0.0, 0.0, 0.0, -0.5);
        assert!(matches!(linearize(&p, &bad), Err(Error::NotAFixedPoint(_))));
        let equator = MeanFieldState::new(0.0, 0.0, 0.5, 0.0, 0.0);
        assert!(matches!(
            linearize(&p, &equator),
            Err(Error::DegenerateFixedPoint { .. })
        ));
    }

    #[test]
    fn open_loop_determinant_is_characteristic_polynomial() {
        let sys = system(1.1, FixedPointKind::SuperRadiantPlus);
        let mut a = Matrix4::<f64>::zeros();
        for i in 0..4 {
            for j in 0..4 {
                a[(i, j)] = sys.a_prime[i][j];
            }
        }
        // Coefficients of det(λI - A) via Faddeev–LeVerrier.
        let mut m = Matrix4::<f64>::identity();
        let mut c = [1.0; 5];
        for n in 1..=4 {
            let am = a * m;
            c[n] = -am.trace() / n as f64;
            m = am + Matrix4::identity() * c[n];
        }
        for i in 0..100 {
            let t = i as f64;
            let lambda = Complex64::new(libm::sin(1.7 * t) * 3.0, libm::cos(0.3 * t * t) * 40.0);
            let poly = c.iter().fold(ZERO, |acc, &ci| acc * lambda + ci);
            let det = char_det(&sys, lambda);
            assert!((det - poly).norm() <= 1e-10 * poly.norm(), "{det} vs {poly}");
        }
    }

    /// Printed factorized form of the determinant at `jy = 0` fixed points.
    fn explicit_det(sys: &LinearizedSystem, lambda: Complex64) -> Complex64 {
        let fp = sys.fixed_point;
        let p = sys.params;
        let (wt, w0t) = (sys.omega_tilde, sys.omega0_tilde);
        let fb = if sys.is_open() {
            ZERO
        } else {
            ONE - (-lambda * sys.tau).exp()
        };
        let cav = lambda + p.kappa + fb * sys.k;
        let s = (Complex64::new(2.0 * p.g * fp.jz, 0.0) - fp.alpha().conj() * (p.u * fp.jx)).norm_sqr();
        (cav * cav + wt * wt) * (lambda * lambda + w0t * w0t + 4.0 * p.g * w0t * fp.x1 * fp.jx / fp.jz)
            + 2.0 * wt * w0t * s / fp.jz
    }

    proptest! {
        #[test]
        fn determinant_matches_factorized_form(
            ratio in 1.01f64..1.5,
            minus in proptest::bool::ANY,
            k in 0.0f64..4.0,
            tau in 0.0f64..150.0,
            re in -5.0f64..5.0,
            im in -100.0f64..100.0,
        ) {
            let kind = if minus { FixedPointKind::SuperRadiantMinus } else { FixedPointKind::SuperRadiantPlus };
            let sys = system(ratio, kind).with_feedback(k, tau).unwrap();
            let lambda = Complex64::new(re * 1e-2, im * 1e-2);
            let a = char_det(&sys, lambda);
            let b = explicit_det(&sys, lambda);
            let scale = hadamard_bound(&sys.char_matrix(lambda));
            prop_assert!((a - b).norm() <= 1e-10 * scale.max(b.norm()), "{} vs {}", a, b);
        }

        #[test]
        fn derivative_matches_finite_difference(
            k in 0.0f64..4.0,
            tau in 0.0f64..150.0,
            re in -1.0f64..1.0,
            im in -1.0f64..1.0,
        ) {
            let sys = system(1.1, FixedPointKind::SuperRadiantPlus).with_feedback(k, tau).unwrap();
            let lambda = Complex64::new(re * 1e-2, im * 1e-1);
            let h = 1e-7;
            let fd = (char_det(&sys, lambda + h) - char_det(&sys, lambda - h)) / (2.0 * h);
            let d = sys.char_det_derivative(lambda);
            prop_assert!((fd - d).norm() <= 1e-5 * d.norm().max(1.0), "{} vs {}", fd, d);
        }
    }

    #[test]
    fn open_loop_roots_are_eigenvalues() {
        for (ratio, kind) in [(0.74, FixedPointKind::Normal), (1.1, FixedPointKind::SuperRadiantPlus)] {
            let sys = system(ratio, kind);
            let roots = characteristic_roots(&sys, &SearchOptions::default(), &[]).unwrap();
            let mut eig = sys.shifted_eigenvalues(0.0);
            eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
            // Roots are Im >= 0 representatives of conjugate pairs.
            for e in &eig {
                let e = if e.im < 0.0 { e.conj() } else { *e };
                assert!(roots.iter().any(|r| (r.lambda - e).norm() <= 1e-8 * e.norm().max(1e-3)));
            }
        }
    }

    #[test]
    fn reference_open_loop_rates() {
        let n = rightmost_root(&system(0.74, FixedPointKind::Normal)).unwrap();
        let sr = rightmost_root(&system(1.1, FixedPointKind::SuperRadiantPlus)).unwrap();
        assert!((to_2pi_hz(n.lambda.re) + 0.14).abs() < 0.15 * 0.14);
        assert!((to_2pi_hz(sr.lambda.re) + 0.35).abs() < 0.15 * 0.35);
    }

    #[test]
    fn feedback_speeds_up_relaxation() {
        let k = params(1.0).kappa / 2.0;
        let n = system(0.74, FixedPointKind::Normal).with_feedback(k, 52.0).unwrap();
        let sr = system(1.1, FixedPointKind::SuperRadiantPlus)
            .with_feedback(k, 50.0)
            .unwrap();
        let rn = to_2pi_hz(rightmost_root(&n).unwrap().lambda.re);
        let rs = to_2pi_hz(rightmost_root(&sr).unwrap().lambda.re);
        assert!((rn + 26.0).abs() < 2.6, "{rn}");
        assert!((rs + 58.0).abs() < 5.8, "{rs}");
    }

    #[test]
    fn long_delay_destabilizes_normal_phase() {
        let k = params(1.0).kappa / 2.0;
        let sys = system(0.74, FixedPointKind::Normal).with_feedback(k, 100.0).unwrap();
        let r = rightmost_root(&sys).unwrap();
        assert!(r.lambda.re > from_2pi_hz(0.1), "{}", to_2pi_hz(r.lambda.re));
    }

    #[test]
    fn approximation_tracks_exact_root_at_short_delay() {
        let k = params(1.0).kappa / 2.0;
        for (ratio, kind) in [(0.74, FixedPointKind::Normal), (1.1, FixedPointKind::SuperRadiantPlus)] {
            for tau in [0.0, 1.0, 2.5, 5.0] {
                let sys = system(ratio, kind).with_feedback(k, tau).unwrap();
                let exact = rightmost_root(&sys).unwrap().lambda.re;
                let approx = approx_rightmost(&sys).unwrap().lambda.re;
                assert!(
                    (approx - exact).abs() < 0.05 * exact.abs(),
                    "{kind:?} {tau}: {approx} {exact}"
                );
            }
        }
    }

    #[test]
    fn approximation_at_threshold_is_sub_hertz() {
        let sys = system(1.0, FixedPointKind::Normal);
        let l = approx_rightmost(&sys).unwrap().lambda;
        let p = sys.params;
        let wt = p.omega - 0.5 * p.u;
        let printed = -4.0 * p.kappa * wt * p.omega0 * p.g * p.g / libm::pow(p.kappa * p.kappa + wt * wt, 2.0);
        assert!((l.re - printed).abs() <= 1e-14 * printed.abs());
        assert!((to_2pi_hz(l.re).abs() - 0.3).abs() < 0.15 * 0.3);
    }

    #[test]
    fn zero_gain_column_is_flat() {
        let p = params(1.1);
        let taus: Vec<f64> = (0..8).map(|i| 20.0 * i as f64).collect();
        let rows = scan_k_tau(
            &p,
            FixedPointKind::SuperRadiantPlus,
            &[0.0],
            &taus,
            &SearchOptions::default(),
        )
        .unwrap();
        let r0 = rows[0][0].root.unwrap().lambda;
        for cell in &rows[0] {
            assert!((cell.root.unwrap().lambda - r0).norm() < 1e-12);
        }
    }

    #[test]
    fn scan_rejects_unsorted_grid() {
        let p = params(0.74);
        let e = scan_tau(&p, FixedPointKind::Normal, 1.0, &[2.0, 1.0], &SearchOptions::default());
        assert!(matches!(e, Err(Error::InvariantViolation(_))));
    }
}
