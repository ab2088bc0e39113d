//! Round trips and byte stability of the text formats, exercised through
//! real synthesized artifacts rather than hand-built fixtures.

use lowmode::field::{state_error, WaveState};
use lowmode::io::{
    parse_field, parse_schedule, parse_state, write_field, write_schedule, write_state,
};
use lowmode::schedule::ControlSegment;
use lowmode::sim::{parse_config, run_schedule, write_config, SimConfig};
use lowmode::synth::schedule_velocity_shift;
use lowmode::{Field, ModeIndex};
use std::collections::BTreeMap;

fn shift_fixture() -> (WaveState<f64>, lowmode::Schedule, SimConfig<f64>) {
    let cfg = SimConfig::<f64>::default();
    let state = WaveState::new(Field::constant(1, 1.0), Field::zero(1)).unwrap();
    let phi = Field::cosine(&ModeIndex::new(&[2]));
    let (sched, _) = schedule_velocity_shift(&state, &phi, 1e-1, 0.5, &cfg).unwrap();
    (state, sched, cfg)
}

#[test]
fn synthesized_schedule_survives_the_text_format() {
    let (state, sched, cfg) = shift_fixture();
    assert!(!sched.is_empty());

    let mut store: BTreeMap<String, String> = BTreeMap::new();
    let text = write_schedule(&sched, |i, phi| {
        let name = format!("kick_{i}.field");
        store.insert(name.clone(), write_field(phi));
        Ok(name)
    })
    .unwrap();

    let back = parse_schedule(&text, "mem", |name| {
        parse_field(store.get(name).unwrap(), 1, name)
    })
    .unwrap();

    // Same text again and the same dynamics.
    let text2 = write_schedule(&back, |i, _| Ok(format!("kick_{i}.field"))).unwrap();
    assert_eq!(text, text2);
    let (a, _) = run_schedule(&state, &sched, None, &cfg).unwrap();
    let (b, _) = run_schedule(&state, &back, None, &cfg).unwrap();
    assert_eq!(state_error(&a, &b).unwrap(), 0.0);
}

#[test]
fn kick_lines_round_trip_with_their_field_files() {
    let phi = Field::cosine(&ModeIndex::new(&[1])).scale(0.25);
    let sched = lowmode::Schedule::new(vec![
        ControlSegment::free(0.125, 1).unwrap(),
        ControlSegment::ideal_kick(-2.0, phi.clone()),
    ])
    .unwrap();

    let mut store: BTreeMap<String, String> = BTreeMap::new();
    let text = write_schedule(&sched, |i, f| {
        let name = format!("kick_{i}.field");
        store.insert(name.clone(), write_field(f));
        Ok(name)
    })
    .unwrap();
    assert!(text.contains("KICK -2 kick_0.field"));

    let back = parse_schedule(&text, "mem", |name| {
        parse_field(store.get(name).unwrap(), 1, name)
    })
    .unwrap();
    let (c, f) = back.segments()[1].ideal_kick.clone().unwrap();
    assert_eq!(c, -2.0);
    assert_eq!(f, phi);
}

#[test]
fn state_and_config_round_trip_byte_stably() {
    let s = WaveState::new(
        Field::cosine(&ModeIndex::new(&[1, -2])).scale(0.3),
        Field::sine(&ModeIndex::new(&[0, 1])).scale(-1.5),
    )
    .unwrap();
    let text = write_state(&s);
    let back: WaveState<f64> = parse_state(&text, 2, "t").unwrap();
    assert_eq!(back, s);
    assert_eq!(write_state(&back), text);

    let cfg = SimConfig::<f64> {
        dim: 2,
        n_max: 6,
        seed: 42,
        ..SimConfig::default()
    };
    let text = write_config(&cfg);
    let back: SimConfig<f64> = parse_config(&text, "t").unwrap();
    assert_eq!(write_config(&back), text);
    assert_eq!(back.dim, 2);
    assert_eq!(back.n_max, 6);
    assert_eq!(back.seed, 42);
}

#[test]
fn repeated_runs_emit_identical_bytes() {
    let (state, sched, cfg) = shift_fixture();
    let target = WaveState::new(state.profile.clone(), Field::cosine(&ModeIndex::new(&[2]))).unwrap();

    let (_, trace_a) = run_schedule(&state, &sched, Some(&target), &cfg).unwrap();
    let (_, trace_b) = run_schedule(&state, &sched, Some(&target), &cfg).unwrap();
    let csv_a = trace_a.to_csv();
    assert_eq!(csv_a, trace_b.to_csv());
    assert!(csv_a.starts_with("t,"));
    assert!(csv_a.lines().count() > 2);

    let again = {
        let s2 = WaveState::new(Field::constant(1, 1.0), Field::zero(1)).unwrap();
        let phi = Field::cosine(&ModeIndex::new(&[2]));
        schedule_velocity_shift(&s2, &phi, 1e-1, 0.5, &cfg).unwrap().0
    };
    let dump = |s: &lowmode::Schedule| write_schedule(s, |i, _| Ok(format!("k{i}"))).unwrap();
    assert_eq!(dump(&sched), dump(&again));
}
