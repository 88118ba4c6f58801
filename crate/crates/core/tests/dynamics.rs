use tdas_dicke_core::dde::{
    integrate, integrate_ramp, relaxation_time, InitialCondition, RampSchedule, Relaxation, Stepping,
};
use tdas_dicke_core::model::{critical_coupling, FeedbackParams, MeanFieldState, ModelParams};

fn params(ratio: f64) -> ModelParams {
    let p = ModelParams::reference(0.0);
    p.with_g(ratio * critical_coupling(&p).unwrap())
}

fn tilted() -> MeanFieldState {
    let c = 1.0 / 12f64.sqrt();
    MeanFieldState::new(0.0, 0.0, c, c, c)
}

#[test]
fn spin_norm_is_conserved_with_feedback() {
    let p = params(1.1);
    let f = FeedbackParams::symmetric(p.kappa, 1.0, 50.0).unwrap();
    let traj = integrate(
        &p,
        &f,
        &InitialCondition::Explicit(tilted()),
        &Stepping::new(1e-3, 100.0, 1000),
    )
    .unwrap();
    assert!(traj.max_norm_drift < 1e-9, "{:e}", traj.max_norm_drift);
    for s in &traj.states {
        assert!(s.spin_norm_error() < 1e-9);
    }
}

#[test]
fn step_halving_shows_fourth_order() {
    let p = params(1.1);
    let f = FeedbackParams::symmetric(p.kappa, 1.0, 5.0).unwrap();
    let ic = InitialCondition::Explicit(tilted());
    let run = |h: f64| integrate(&p, &f, &ic, &Stepping::new(h, 20.0, 1)).unwrap().final_state;
    let (a, b, c) = (run(0.02), run(0.01), run(0.005));
    let order = (a.distance(&b) / b.distance(&c)).log2();
    assert!(order >= 3.5, "observed order {order}");
}

#[test]
fn parity_image_trajectory() {
    let p = params(1.1);
    let f = FeedbackParams::symmetric(p.kappa, 1.0, 10.0).unwrap();
    let step = Stepping::new(5e-3, 200.0, 100);
    let a = integrate(&p, &f, &InitialCondition::Explicit(tilted()), &step).unwrap();
    let b = integrate(&p, &f, &InitialCondition::Explicit(tilted().parity()), &step).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        assert!(x.parity().distance(y) < 1e-12);
    }
}

#[test]
fn below_threshold_ramp_stays_normal() {
    let p = params(0.9);
    let f = FeedbackParams::open_loop(p.kappa);
    let ramp = RampSchedule::new(20_000.0, p.g).unwrap();
    let step = Stepping::new(Stepping::default_step(&p, &f), 20_000.0, 1000);
    let traj = integrate_ramp(&p, &f, &ramp, &InitialCondition::NearNormal { n_atoms: 1e5 }, &step).unwrap();
    let worst = traj
        .states
        .iter()
        .map(|s| s.distance(&MeanFieldState::NORMAL))
        .fold(0.0, f64::max);
    assert!(worst < 1e-2, "{worst}");
    assert_eq!(*traj.couplings.last().unwrap(), p.g);
}

#[test]
fn fixed_point_with_feedback_is_not_disturbed() {
    let p = params(1.1);
    let f = FeedbackParams::symmetric(p.kappa, 1.0, 50.0).unwrap();
    let sr = tdas_dicke_core::model::fixed_point(tdas_dicke_core::FixedPointKind::SuperRadiantPlus, &p).unwrap();
    let step = Stepping::new(Stepping::default_step(&p, &f), 500.0, 100);
    let traj = integrate(&p, &f, &InitialCondition::Explicit(sr), &step).unwrap();
    for s in &traj.states {
        assert!(s.distance(&sr) < 1e-12);
    }
    assert!(matches!(relaxation_time(&traj, &sr, 1e-3), Relaxation::Converged(t) if t == 0.0));
}
