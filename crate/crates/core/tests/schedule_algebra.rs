//! Structural properties of compiled schedules: concatenation is the
//! composition of runs, independent kick realizations commute, deeper
//! halving levels never lose accuracy on a fixed suite, and exact-time
//! plans hit their horizon to the last bit.

use lowmode::field::{state_error, WaveState};
use lowmode::propagate::kick;
use lowmode::saturate::{saturate_mode, TrigKind};
use lowmode::sim::{run_schedule, SimConfig};
use lowmode::synth::{plan_transfer, schedule_field_kick, schedule_square_kick};
use lowmode::{Field, ModeIndex};

fn d1_state() -> WaveState<f64> {
    WaveState::new(
        Field::constant(1, 1.0)
            .add(&Field::cosine(&ModeIndex::new(&[1])).scale(0.5))
            .unwrap(),
        Field::sine(&ModeIndex::new(&[1])).scale(0.2),
    )
    .unwrap()
}

#[test]
fn concatenation_equals_sequential_runs() {
    let cfg = SimConfig::<f64>::default();
    let state = d1_state();
    let p = schedule_field_kick(&Field::cosine(&ModeIndex::new(&[2])), 1e-3, 0.5).unwrap();
    let q = schedule_field_kick(&Field::sine(&ModeIndex::new(&[2])).scale(0.7), 1e-3, 0.5).unwrap();

    let (after_p, _) = run_schedule(&state, &p, None, &cfg).unwrap();
    let (two_step, _) = run_schedule(&after_p, &q, None, &cfg).unwrap();
    let (one_step, _) = run_schedule(&state, &p.then(&q).unwrap(), None, &cfg).unwrap();

    assert!(state_error(&two_step, &one_step).unwrap() <= 1e-11);
    assert_eq!(
        p.then(&q).unwrap().total_time(),
        p.total_time() + q.total_time()
    );
}

#[test]
fn independent_kick_realizations_commute_within_their_error() {
    let cfg = SimConfig::<f64>::default();
    let state = d1_state();
    let phi1 = Field::cosine(&ModeIndex::new(&[2])).scale(0.8);
    let phi2 = Field::sine(&ModeIndex::new(&[2])).scale(0.6);
    let s1 = schedule_field_kick(&phi1, 1e-4, 0.5).unwrap();
    let s2 = schedule_field_kick(&phi2, 1e-4, 0.5).unwrap();

    // Per-term error bounds, measured against the exact kicks.
    let e1 = {
        let (fin, _) = run_schedule(&state, &s1, None, &cfg).unwrap();
        state_error(&fin, &kick(&state, 1.0, &phi1).unwrap()).unwrap()
    };
    let e2 = {
        let (fin, _) = run_schedule(&state, &s2, None, &cfg).unwrap();
        state_error(&fin, &kick(&state, 1.0, &phi2).unwrap()).unwrap()
    };

    let (ab, _) = run_schedule(&state, &s1.then(&s2).unwrap(), None, &cfg).unwrap();
    let (ba, _) = run_schedule(&state, &s2.then(&s1).unwrap(), None, &cfg).unwrap();
    let gap = state_error(&ab, &ba).unwrap();
    assert!(gap <= 5.0 * (e1 + e2), "gap {gap:.3e} bounds {e1:.3e} {e2:.3e}");

    // Both orders land on the same combined kick.
    let both = kick(&state, 1.0, &phi1.add(&phi2).unwrap()).unwrap();
    assert!(state_error(&ab, &both).unwrap() <= 2.0 * (e1 + e2) + 1e-11);
}

#[test]
fn halving_the_square_kick_never_hurts_on_the_suite() {
    // For a bare generator the only knob is gamma; the inner kicks are
    // exact, so halving gamma alone must tighten the bracket flow.
    let state = d1_state();
    let cfg = SimConfig::<f64>::default();
    for expr in [
        saturate_mode::<f64>(&ModeIndex::new(&[1]), TrigKind::Cos, 1),
        saturate_mode::<f64>(&ModeIndex::new(&[1]), TrigKind::Sin, 1),
    ] {
        let phi = lowmode::saturate::expand(&expr, 1).unwrap();
        let target = WaveState::new(
            state.profile.clone(),
            state
                .velocity
                .sub(&phi.multiply(&phi).unwrap().multiply(&state.profile).unwrap())
                .unwrap(),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for level in 0..4 {
            let gamma = 1e-2 * 0.5f64.powi(level);
            let sched = schedule_square_kick(&expr, gamma, 0.5).unwrap();
            let (fin, _) = run_schedule(&state, &sched, None, &cfg).unwrap();
            let err = state_error(&fin, &target).unwrap();
            assert!(err <= prev, "level {level}: {err:.3e} > {prev:.3e}");
            prev = err;
        }
    }
}

#[test]
fn halving_both_kick_parameters_never_hurts_on_the_suite() {
    // Nested trees also need the inner shrink halved, since the conjugation
    // amplifies inner realization error by gamma^(-1/2); this is the ladder
    // the synthesizer walks.
    let state = d1_state();
    let cfg = SimConfig::<f64>::default();
    for phi in [
        Field::cosine(&ModeIndex::new(&[2])),
        Field::sine(&ModeIndex::new(&[2])).scale(0.7),
    ] {
        let target = WaveState::new(
            state.profile.clone(),
            state
                .velocity
                .add(&phi.multiply(&state.profile).unwrap())
                .unwrap(),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for level in 0..4 {
            let u = 1e-2 * 0.5f64.powi(level);
            let shrink = 0.5 * 0.5f64.powi(level);
            let sched = schedule_field_kick(&phi, u, shrink).unwrap();
            let (fin, _) = run_schedule(&state, &sched, None, &cfg).unwrap();
            let err = state_error(&fin, &target).unwrap();
            assert!(err <= prev, "level {level}: {err:.3e} > {prev:.3e}");
            prev = err;
        }
    }
}

#[test]
fn exact_time_plans_hit_the_horizon_bitwise() {
    let cfg = SimConfig::<f64> { dim: 1, n_max: 8, ..SimConfig::default() };
    let initial = WaveState::new(Field::cosine(&ModeIndex::new(&[1])), Field::zero(1)).unwrap();
    let goal = WaveState::new(
        Field::cosine(&ModeIndex::new(&[1])).scale(0.5),
        Field::zero(1),
    )
    .unwrap();
    for horizon in [0.8, 0.3] {
        let plan = plan_transfer(&initial, &goal, 0.1, horizon, true, &cfg).unwrap();
        let total = plan.schedule().unwrap().total_time();
        assert!((total - horizon).abs() <= 1e-12, "total {total} vs {horizon}");
    }
}
