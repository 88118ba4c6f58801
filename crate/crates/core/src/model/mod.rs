//! Physical parameters, the mean-field vector field and its fixed points, and
//! the beam-splitter algebra of the coherent feedback loop.

mod fixed_point;
mod optics;
mod params;
mod state;

pub use fixed_point::{critical_coupling, fixed_point, inverted_critical_coupling, threshold_coupling, FixedPointKind};
pub use optics::{
    beam_splitter_1, beam_splitter_2, effective_input_transform, feedback_gain, BeamSplitter, FeedbackParams,
};
pub use params::ModelParams;
pub use state::MeanFieldState;

/// Below this magnitude (rad/μs) the dispersive shift `U` is treated as zero
/// when choosing between the two super-radiant formulas.
pub const U_ZERO_THRESHOLD: f64 = 1e-9;

/// Instantaneous part of the mean-field equations at coupling `g`.
///
/// The delayed feedback term `k (x(t - τ) - x(t))` on `x1`, `x2` is not
/// included; the integrator adds it.
pub fn mean_field_rhs_at(x: &MeanFieldState, p: &ModelParams, g: f64) -> MeanFieldState {
    let cavity_shift = p.omega + p.u * x.jz;
    let spin_freq = p.omega0 + p.u * (x.x1 * x.x1 + x.x2 * x.x2);
    MeanFieldState {
        x1: -p.kappa * x.x1 + cavity_shift * x.x2,
        x2: -p.kappa * x.x2 - cavity_shift * x.x1 - 2.0 * g * x.jx,
        jx: -spin_freq * x.jy,
        jy: spin_freq * x.jx - 4.0 * g * x.x1 * x.jz,
        jz: 4.0 * g * x.x1 * x.jy,
    }
}

/// Instantaneous part of the mean-field equations at the coupling stored in
/// `p`. See [`mean_field_rhs_at`].
pub fn mean_field_rhs(x: &MeanFieldState, p: &ModelParams) -> MeanFieldState {
    mean_field_rhs_at(x, p, p.g)
}
