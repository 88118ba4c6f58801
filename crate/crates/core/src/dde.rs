//! Method-of-steps integration of the delayed mean-field equations
//!
//! `dx/dt = f(x) + k B (x(t - τ) - x(t))`, `B = diag(1, 1, 0, 0, 0)`,
//!
//! with classical fourth-order Runge–Kutta on a uniform grid. Delayed values
//! come from cubic Hermite interpolation of stored grid nodes and their
//! derivatives. The history on `[-τ, 0]` is the initial state held constant.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, floor, sqrt};
use crate::model::{mean_field_rhs_at, FeedbackParams, MeanFieldState, ModelParams};

/// Time-dependent coupling `g(t) = sqrt(t / t0) · g_final` for `t ≤ t0`,
/// held at `g_final` afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSchedule {
    pub t0: f64,
    pub g_final: f64,
}

impl RampSchedule {
    pub fn new(t0: f64, g_final: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::InvariantViolation(format!("ramp t0 must be > 0, got {t0}")));
        }
        if !g_final.is_finite() {
            return Err(Error::InvariantViolation(format!(
                "ramp g_final must be finite, got {g_final}"
            )));
        }
        Ok(Self { t0, g_final })
    }

    pub fn coupling_at(&self, t: f64) -> f64 {
        if t >= self.t0 {
            self.g_final
        } else if t <= 0.0 {
            0.0
        } else {
            sqrt(t / self.t0) * self.g_final
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Explicit(MeanFieldState),
    /// `(0, 0, 1/√N, 1/√N, -sqrt(1/4 - 2/N))`: the normal phase nudged by
    /// spin fluctuations of order `1/√N`.
    NearNormal {
        n_atoms: f64,
    },
}

impl InitialCondition {
    pub fn state(&self) -> Result<MeanFieldState> {
        match *self {
            Self::Explicit(x) => {
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::InvariantViolation(format!("initial state is not finite: {x:?}")))
                }
            }
            Self::NearNormal { n_atoms } => {
                if !(n_atoms >= 8.0) {
                    return Err(Error::InvariantViolation(format!(
                        "near-normal state needs N >= 8, got {n_atoms}"
                    )));
                }
                let c = 1.0 / sqrt(n_atoms);
                Ok(MeanFieldState::new(0.0, 0.0, c, c, -sqrt(0.25 - 2.0 / n_atoms)))
            }
        }
    }
}

/// Grid and output settings for one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepping {
    /// Step size in μs.
    pub h: f64,
    /// Final time in μs; the run takes `ceil(t_end / h)` steps.
    pub t_end: f64,
    /// Keep every `stride`-th grid point in the trajectory.
    pub stride: usize,
}

impl Stepping {
    pub fn new(h: f64, t_end: f64, stride: usize) -> Self {
        Self { h, t_end, stride }
    }

    /// `min(τ/20, 2π/(50 |ω|))`, resolving both the delay and the cavity
    /// oscillation.
    pub fn default_step(p: &ModelParams, f: &FeedbackParams) -> f64 {
        let cavity = core::f64::consts::TAU / (50.0 * p.omega.abs().max(p.kappa));
        if f.tau > 0.0 {
            cavity.min(f.tau / 20.0)
        } else {
            cavity
        }
    }

    fn validate(&self, f: &FeedbackParams) -> Result<usize> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvariantViolation(format!("step must be > 0, got {}", self.h)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvariantViolation("output stride must be >= 1".into()));
        }
        if f.tau > 0.0 && self.h > f.tau {
            return Err(Error::StepTooLarge { h: self.h, tau: f.tau });
        }
        // tolerate t_end being a multiple of h up to rounding
        let steps = libm::ceil(self.t_end / self.h * (1.0 - 1e-14));
        Ok(steps as usize)
    }
}

/// Cubic Hermite interpolant over the most recent grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHistory {
    h: f64,
    /// Grid index of `nodes[0]`.
    first_index: usize,
    nodes: Vec<(MeanFieldState, MeanFieldState)>,
}

impl DenseHistory {
    /// Covered time interval.
    pub fn span(&self) -> (f64, f64) {
        let last = self.first_index + self.nodes.len().saturating_sub(1);
        (self.first_index as f64 * self.h, last as f64 * self.h)
    }

    /// Interpolated state at time `t`, or `None` outside [`Self::span`].
    pub fn eval(&self, t: f64) -> Option<MeanFieldState> {
        let s = t / self.h - self.first_index as f64;
        let last = self.nodes.len().checked_sub(1)? as f64;
        if !(s >= -1e-9 && s <= last + 1e-9) {
            return None;
        }
        let s = s.clamp(0.0, last);
        let i = (floor(s) as usize).min(self.nodes.len().saturating_sub(2));
        if self.nodes.len() == 1 {
            return Some(self.nodes[0].0);
        }
        let (x0, d0) = self.nodes[i];
        let (x1, d1) = self.nodes[i + 1];
        Some(hermite(&x0, &d0, &x1, &d1, self.h, s - i as f64))
    }
}

#[inline]
fn hermite(
    x0: &MeanFieldState,
    d0: &MeanFieldState,
    x1: &MeanFieldState,
    d1: &MeanFieldState,
    h: f64,
    theta: f64,
) -> MeanFieldState {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    *x0 * h00 + *d0 * (h10 * h) + *x1 * h01 + *d1 * (h11 * h)
}

/// A sampled solution of the delayed mean-field equations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Integrator step in μs.
    pub h: f64,
    /// Grid points between stored samples.
    pub stride: usize,
    /// Sample times, uniformly spaced by `h · stride`.
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    /// Coupling `g` in effect at each sample.
    pub couplings: Vec<f64>,
    /// State at the last grid point, `final_time ≥ t_end`.
    pub final_time: f64,
    pub final_state: MeanFieldState,
    /// Largest `| |j|² - 1/4 |` seen at any grid point.
    pub max_norm_drift: f64,
    /// Interpolant over the last delay window (empty for open-loop runs).
    pub history: DenseHistory,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample_spacing(&self) -> f64 {
        self.h * self.stride as f64
    }

    pub fn component(&self, select: impl Fn(&MeanFieldState) -> f64) -> Vec<f64> {
        self.states.iter().map(select).collect()
    }
}

/// Integrate at constant coupling `p.g`.
pub fn integrate(
    p: &ModelParams,
    f: &FeedbackParams,
    ic: &InitialCondition,
    stepping: &Stepping,
) -> Result<Trajectory> {
    let g = p.g;
    run(p, f, ic, stepping, |_| g)
}

/// Integrate with the coupling following `ramp` (evaluated at every
/// Runge–Kutta stage time).
pub fn integrate_ramp(
    p: &ModelParams,
    f: &FeedbackParams,
    ramp: &RampSchedule,
    ic: &InitialCondition,
    stepping: &Stepping,
) -> Result<Trajectory> {
    run(p, f, ic, stepping, |t| ramp.coupling_at(t))
}

/// Ring buffer of grid nodes `(x_j, x'_j)` covering at least one delay.
struct DelayLine {
    nodes: Vec<(MeanFieldState, MeanFieldState)>,
    initial: MeanFieldState,
    lag_steps: f64,
    h: f64,
}

impl DelayLine {
    fn new(initial: MeanFieldState, tau: f64, h: f64) -> Self {
        let lag_steps = tau / h;
        let capacity = libm::ceil(lag_steps) as usize + 3;
        let zero = MeanFieldState::default();
        Self {
            nodes: alloc::vec![(zero, zero); capacity],
            initial,
            lag_steps,
            h,
        }
    }

    #[inline]
    fn store(&mut self, index: usize, x: MeanFieldState, dx: MeanFieldState) {
        let cap = self.nodes.len();
        self.nodes[index % cap] = (x, dx);
    }

    /// State at grid position `n + c - τ/h`.
    #[inline]
    fn delayed(&self, n: usize, c: f64) -> MeanFieldState {
        let s = n as f64 + c - self.lag_steps;
        if s <= 0.0 {
            return self.initial;
        }
        let i = floor(s);
        let theta = s - i;
        let cap = self.nodes.len();
        let i = i as usize;
        let (x0, d0) = &self.nodes[i % cap];
        if theta == 0.0 {
            return *x0;
        }
        let (x1, d1) = &self.nodes[(i + 1) % cap];
        hermite(x0, d0, x1, d1, self.h, theta)
    }

    fn into_history(self, last_index: usize) -> DenseHistory {
        let cap = self.nodes.len();
        let count = (last_index + 1).min(cap);
        let first_index = last_index + 1 - count;
        let nodes = (first_index..=last_index).map(|j| self.nodes[j % cap]).collect();
        DenseHistory {
            h: self.h,
            first_index,
            nodes,
        }
    }
}

#[inline]
fn with_feedback(mut d: MeanFieldState, x: &MeanFieldState, delayed: &MeanFieldState, k: f64) -> MeanFieldState {
    d.x1 += k * (delayed.x1 - x.x1);
    d.x2 += k * (delayed.x2 - x.x2);
    d
}

fn run(
    p: &ModelParams,
    f: &FeedbackParams,
    ic: &InitialCondition,
    stepping: &Stepping,
    coupling: impl Fn(f64) -> f64,
) -> Result<Trajectory> {
    p.validate()?;
    let steps = stepping.validate(f)?;
    let x0 = ic.state()?;
    let h = stepping.h;
    let k = f.k();
    let mut line = if f.is_open() {
        None
    } else {
        Some(DelayLine::new(x0, f.tau, h))
    };

    let capacity = steps / stepping.stride + 1;
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    let mut couplings = Vec::with_capacity(capacity);
    let mut x = x0;
    let mut drift = x.spin_norm_error();

    for n in 0..=steps {
        let t = n as f64 * h;
        if n % stepping.stride == 0 {
            times.push(t);
            states.push(x);
            couplings.push(coupling(t));
        }
        if n == steps {
            break;
        }
        let t_half = t + 0.5 * h;
        let t_next = t + h;
        let (g0, g_half, g1) = (coupling(t), coupling(t_half), coupling(t_next));
        let (k1, k2, k3, k4) = match line.as_mut() {
            None => {
                let k1 = mean_field_rhs_at(&x, p, g0);
                let k2 = mean_field_rhs_at(&(x + k1 * (0.5 * h)), p, g_half);
                let k3 = mean_field_rhs_at(&(x + k2 * (0.5 * h)), p, g_half);
                let k4 = mean_field_rhs_at(&(x + k3 * h), p, g1);
                (k1, k2, k3, k4)
            }
            Some(line) => {
                let k1 = with_feedback(mean_field_rhs_at(&x, p, g0), &x, &line.delayed(n, 0.0), k);
                line.store(n, x, k1);
                let d_half = line.delayed(n, 0.5);
                let y2 = x + k1 * (0.5 * h);
                let k2 = with_feedback(mean_field_rhs_at(&y2, p, g_half), &y2, &d_half, k);
                let y3 = x + k2 * (0.5 * h);
                let k3 = with_feedback(mean_field_rhs_at(&y3, p, g_half), &y3, &d_half, k);
                let y4 = x + k3 * h;
                let k4 = with_feedback(mean_field_rhs_at(&y4, p, g1), &y4, &line.delayed(n, 1.0), k);
                (k1, k2, k3, k4)
            }
        };
        x = x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        if !x.is_finite() {
            return Err(Error::NonFiniteState { t: t_next });
        }
        drift = drift.max(x.spin_norm_error());
    }

    let final_time = steps as f64 * h;
    let history = match line {
        Some(mut line) => {
            let dx = with_feedback(
                mean_field_rhs_at(&x, p, coupling(final_time)),
                &x,
                &line.delayed(steps, 0.0),
                k,
            );
            line.store(steps, x, dx);
            line.into_history(steps)
        }
        None => DenseHistory {
            h,
            first_index: steps,
            nodes: alloc::vec![(x, mean_field_rhs_at(&x, p, coupling(final_time)))],
        },
    };
    Ok(Trajectory {
        h,
        stride: stepping.stride,
        times,
        states,
        couplings,
        final_time,
        final_state: x,
        max_norm_drift: drift,
        history,
    })
}

/// Zero-phase low-pass: a first-order exponential smoother with angular
/// cutoff `cutoff` run forward then backward over a uniformly sampled
/// series with spacing `dt`. DC gain is exactly one.
pub fn lowpass(series: &[f64], dt: f64, cutoff: f64) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let a = 1.0 - exp(-cutoff * dt);
    let mut out = Vec::with_capacity(series.len());
    let mut y = series[0];
    for &v in series {
        y += a * (v - y);
        out.push(y);
    }
    let mut y = *out.last().unwrap();
    for v in out.iter_mut().rev() {
        y += a * (*v - y);
        *v = y;
    }
    out
}

/// Outcome of [`relaxation_time`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    /// Earliest sample time after which the trajectory stays within the ball.
    Converged(f64),
    NotConverged,
}

impl Relaxation {
    pub fn time(self) -> Option<f64> {
        match self {
            Self::Converged(t) => Some(t),
            Self::NotConverged => None,
        }
    }
}

/// Smallest sampled `t*` with `|x(t) - target| < eps` for every sample
/// `t ≥ t*` (and at the final grid point).
pub fn relaxation_time(traj: &Trajectory, target: &MeanFieldState, eps: f64) -> Relaxation {
    if traj.final_state.distance(target) >= eps {
        return Relaxation::NotConverged;
    }
    let mut first_inside = None;
    for (t, x) in traj.times.iter().zip(&traj.states).rev() {
        if x.distance(target) >= eps {
            break;
        }
        first_inside = Some(*t);
    }
    match first_inside {
        Some(t) => Relaxation::Converged(t),
        None => Relaxation::Converged(traj.final_time),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{critical_coupling, fixed_point, mean_field_rhs, FixedPointKind};
    use approx::assert_relative_eq;

    fn reference(g_ratio: f64) -> ModelParams {
        let p = ModelParams::reference(0.0);
        p.with_g(g_ratio * critical_coupling(&p).unwrap())
    }

    fn tilted() -> InitialCondition {
        let c = 1.0 / sqrt(12.0);
        InitialCondition::Explicit(MeanFieldState::new(0.0, 0.0, c, c, c))
    }

    #[test]
    fn ramp_shape() {
        let r = RampSchedule::new(100.0, 2.0).unwrap();
        assert_eq!(r.coupling_at(0.0), 0.0);
        assert_eq!(r.coupling_at(100.0), 2.0);
        assert_eq!(r.coupling_at(1e6), 2.0);
        assert_relative_eq!(r.coupling_at(25.0), 1.0);
        let mut prev = -1.0;
        for i in 0..=200 {
            let g = r.coupling_at(i as f64);
            assert!(g >= prev);
            prev = g;
        }
        assert!(RampSchedule::new(0.0, 1.0).is_err());
    }

    #[test]
    fn near_normal_state_is_on_the_sphere() {
        let x = InitialCondition::NearNormal { n_atoms: 1e5 }.state().unwrap();
        assert!(x.spin_norm_error() < 1e-16);
        assert_relative_eq!(x.jx, 1.0 / sqrt(1e5));
        assert!(InitialCondition::NearNormal { n_atoms: 4.0 }.state().is_err());
    }

    #[test]
    fn step_larger_than_delay_is_rejected() {
        let p = reference(0.74);
        let f = FeedbackParams::symmetric(p.kappa, 1.0, 0.01).unwrap();
        let err = integrate(&p, &f, &tilted(), &Stepping::new(0.02, 1.0, 1)).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn divergence_is_reported() {
        let p = ModelParams {
            kappa: 1e-3,
            g: 1e200,
            ..ModelParams::reference(0.0)
        };
        let err = integrate(
            &p,
            &FeedbackParams::open_loop(1.0),
            &tilted(),
            &Stepping::new(0.1, 10.0, 1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }

    #[test]
    fn sampling_and_final_state() {
        let p = reference(0.5);
        let f = FeedbackParams::symmetric(p.kappa, 1.0, 0.5).unwrap();
        let tr = integrate(&p, &f, &tilted(), &Stepping::new(0.01, 1.0, 10)).unwrap();
        assert_eq!(tr.len(), 11);
        assert_relative_eq!(tr.times[10], 1.0, max_relative = 1e-12);
        assert_eq!(tr.final_state, tr.states[10]);
        assert!(tr.times.windows(2).all(|w| (w[1] - w[0] - 0.1).abs() < 1e-12));
        let (a, b) = tr.history.span();
        assert!(b - a >= f.tau);
        let last = tr.history.eval(b).unwrap();
        assert_eq!(last, tr.final_state);
    }

    #[test]
    fn open_loop_matches_plain_rk4() {
        let p = reference(1.1);
        let h = 2e-3;
        let steps = 2000;
        let mut x = match tilted() {
            InitialCondition::Explicit(x) => x,
            _ => unreachable!(),
        };
        let mut reference_states = alloc::vec![x];
        for _ in 0..steps {
            let k1 = mean_field_rhs(&x, &p);
            let k2 = mean_field_rhs(&(x + k1 * (h / 2.0)), &p);
            let k3 = mean_field_rhs(&(x + k2 * (h / 2.0)), &p);
            let k4 = mean_field_rhs(&(x + k3 * h), &p);
            x = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            reference_states.push(x);
        }
        // k = 0 with a finite delay still goes through the delay line
        let f = FeedbackParams::symmetric(p.kappa, 0.0, 0.5).unwrap();
        let tr = integrate(&p, &f, &tilted(), &Stepping::new(h, steps as f64 * h, 1)).unwrap();
        for (a, b) in tr.states.iter().zip(&reference_states) {
            assert!(a.distance(b) < 1e-10);
        }
    }

    #[test]
    fn fixed_point_history_is_left_alone() {
        let p = reference(1.1);
        let fp = fixed_point(FixedPointKind::SuperRadiantPlus, &p).unwrap();
        let f = FeedbackParams::symmetric(p.kappa, 1.0, 3.0).unwrap();
        let tr = integrate(&p, &f, &InitialCondition::Explicit(fp), &Stepping::new(1e-2, 50.0, 100)).unwrap();
        for x in &tr.states {
            assert!(x.distance(&fp) < 1e-12);
        }
    }

    #[test]
    fn lowpass_constant_and_attenuation() {
        let c = alloc::vec![0.37; 1000];
        assert!(lowpass(&c, 0.1, 2.0).iter().all(|v| (v - 0.37).abs() < 1e-15));

        // forward-backward first-order filter: |H|² = 1 / (1 + (ω/ω_c)²)
        let cutoff = 1.0;
        let dt = 1e-3;
        let n = 200_000;
        let w = 10.0 * cutoff;
        let s: Vec<f64> = (0..n).map(|i| libm::sin(w * i as f64 * dt)).collect();
        let out = lowpass(&s, dt, cutoff);
        let amp = out[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(amp <= 1.0 / 99.0, "amplitude {amp}");
        assert_relative_eq!(amp, 1.0 / 101.0, max_relative = 0.02);
    }

    #[test]
    fn relaxation_of_a_trajectory_at_rest() {
        let p = reference(0.74);
        let tr = integrate(
            &p,
            &FeedbackParams::open_loop(p.kappa),
            &InitialCondition::Explicit(MeanFieldState::NORMAL),
            &Stepping::new(0.01, 1.0, 1),
        )
        .unwrap();
        assert_eq!(
            relaxation_time(&tr, &MeanFieldState::NORMAL, 1e-3),
            Relaxation::Converged(0.0)
        );
        assert_eq!(
            relaxation_time(&tr, &MeanFieldState::INVERTED, 1e-3),
            Relaxation::NotConverged
        );
    }

    #[test]
    fn relaxation_picks_last_entry() {
        let x = |v: f64| MeanFieldState::new(v, 0.0, 0.0, 0.0, 0.0);
        let tr = Trajectory {
            h: 1.0,
            stride: 1,
            times: alloc::vec![0.0, 1.0, 2.0, 3.0, 4.0],
            states: alloc::vec![x(1.0), x(0.0), x(1.0), x(0.1), x(0.0)],
            couplings: alloc::vec![0.0; 5],
            final_time: 4.0,
            final_state: x(0.0),
            max_norm_drift: 0.0,
            history: DenseHistory {
                h: 1.0,
                first_index: 4,
                nodes: Vec::new(),
            },
        };
        assert_eq!(relaxation_time(&tr, &x(0.0), 0.5), Relaxation::Converged(3.0));
        assert_eq!(relaxation_time(&tr, &x(0.0), 0.05), Relaxation::Converged(4.0));
    }
}
