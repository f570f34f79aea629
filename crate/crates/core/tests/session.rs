mod common;

use common::{check_golden, circular_gaze};
use droem_core::dynamics::EvolutionMode;
use droem_core::render::{evaluate_state, Frame, Lattice};
use droem_core::C64;
use droem_core::session::engine::check_velocity_consistency;
use droem_core::session::observers::multi_observer_step;
use droem_core::session::{
    first_divergence, replay, run_scripted, Engine, GazeEvent, NoiseOperator, NoiseSpec, ObserverSpec, RunRecord,
    RunStatus, Schedule, Screening, SessionConfig,
};
use droem_core::DroemError;

fn small_config() -> SessionConfig {
    let mut c = SessionConfig::demo();
    c.lattice.width = 48;
    c.lattice.height = 48;
    c
}

fn stochastic_config(seed: u64) -> SessionConfig {
    let mut c = small_config();
    c.mode = EvolutionMode::Stochastic;
    c.seed = seed;
    c.noise = vec![
        NoiseSpec { operator: NoiseOperator::Grading, amplitude: 0.05 },
        NoiseSpec { operator: NoiseOperator::Symmetric { order: 2 }, amplitude: 0.02 },
    ];
    c
}

#[test]
fn empty_stream_with_zero_coefficients_keeps_state() {
    let mut c = small_config();
    c.coefficients = vec![Schedule::default(); 2];
    let record = run_scripted(c.clone(), &[], None).unwrap();
    assert!(record.steps.is_empty());
    let initial = Engine::new(c).unwrap().state().phi.iter().map(|p| [p.re, p.im]).collect::<Vec<_>>();
    assert_eq!(record.final_line.unwrap().state, initial);
}

#[test]
fn zero_coefficients_freeze_state_under_gaze() {
    let mut c = small_config();
    c.coefficients = vec![Schedule::default(); 2];
    let record = run_scripted(c, &circular_gaze(0.5, 2.0, 0.5, 60.0), None).unwrap();
    let first = &record.header.initial_state;
    assert!(record.steps.iter().all(|s| &s.state == first));
}

#[test]
fn deterministic_runs_have_identical_digests() {
    let events = circular_gaze(0.6, 3.0, 1.0, 60.0);
    let a = run_scripted(small_config(), &events, None).unwrap();
    let b = run_scripted(small_config(), &events, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(first_divergence(&a, &b), None);
    assert!(a.steps.len() >= 60);
    assert_ne!(a.steps[10].state, a.header.initial_state);
}

#[test]
fn stochastic_seeds_diverge_after_the_header() {
    let events = circular_gaze(0.6, 3.0, 0.5, 60.0);
    let a = run_scripted(stochastic_config(11), &events, None).unwrap();
    let b = run_scripted(stochastic_config(11), &events, None).unwrap();
    let c = run_scripted(stochastic_config(12), &events, None).unwrap();
    assert_eq!(first_divergence(&a, &b), None);
    let k = first_divergence(&a, &c).expect("different seeds must differ");
    assert!(k > 0);
}

#[test]
fn replay_verifies_and_detects_tampering() {
    let events = circular_gaze(0.4, 2.0, 0.5, 60.0);
    for config in [small_config(), stochastic_config(5)] {
        let record = run_scripted(config, &events, None).unwrap();
        let text = record.to_ndjson().unwrap();
        let parsed = RunRecord::parse(&text).unwrap();
        assert_eq!(parsed, record);
        assert!(replay(&parsed).unwrap().passed());
        let mut tampered = parsed.clone();
        let digest = &mut tampered.steps[7].state;
        let flipped = if digest.starts_with('0') { "1" } else { "0" };
        digest.replace_range(0..1, flipped);
        let report = replay(&tampered).unwrap();
        assert!(!report.passed());
        assert_eq!(report.mismatches[0].step, 8);
    }
}

#[test]
fn run_file_header_is_versioned_config() {
    let record = run_scripted(small_config(), &circular_gaze(0.3, 1.0, 0.1, 60.0), None).unwrap();
    let text = record.to_ndjson().unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["header"]["version"], 1);
    assert_eq!(first["header"]["angular_order"], 2);
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["final"]["status"], "complete");
}

#[test]
fn out_of_order_events_are_rejected() {
    let mut events = circular_gaze(0.4, 2.0, 0.2, 60.0);
    events.swap(3, 4);
    assert!(matches!(run_scripted(small_config(), &events, None), Err(DroemError::GazeOrder(_))));
    let outside = GazeEvent { t: 0.1, u: [0.9, 0.9], du: [0.0, 0.0], xi: vec![], observer: 0 };
    assert!(matches!(run_scripted(small_config(), &[outside], None), Err(DroemError::GazeDomain(_))));
}

#[test]
fn velocity_mismatch_is_only_a_warning() {
    let mut events = circular_gaze(0.4, 2.0, 0.2, 60.0);
    events[5].du = [10.0, 10.0];
    assert!(!check_velocity_consistency(&events).is_empty());
    assert!(check_velocity_consistency(&circular_gaze(0.4, 2.0, 0.2, 60.0)).is_empty());
    assert!(run_scripted(small_config(), &events, None).is_ok());
}

#[test]
fn frames_follow_the_cadence() {
    let mut c = small_config();
    c.frame_every = 3;
    let dt = c.dt;
    let record = run_scripted(c, &circular_gaze(0.4, 2.0, 0.5, 60.0), Some(1.0)).unwrap();
    for s in &record.steps {
        assert_eq!(s.frame.is_some(), s.step % 3 == 0, "step {}", s.step);
        if s.frame.is_some() {
            let cadence = 3.0 * dt;
            let k = (s.t / cadence).round();
            assert!((s.t - k * cadence).abs() < dt);
        }
    }
    assert!(record.steps.last().unwrap().t >= 1.0);
}

#[test]
fn stability_failure_aborts_with_partial_record() {
    let mut c = small_config();
    c.normalize = false;
    c.normalize_fields = false;
    c.coefficients = vec![Schedule::constant(1e200), Schedule::constant(1e200)];
    let record = run_scripted(c, &circular_gaze(0.5, 2.0, 1.0, 60.0), None).unwrap();
    assert_eq!(record.status(), Some(RunStatus::Aborted));
    assert!(record.final_line.unwrap().error.unwrap().contains("non-finite"));
}

fn observers(specs: Vec<(Screening, f64)>) -> SessionConfig {
    let mut c = small_config();
    c.observers = specs.into_iter().map(|(screening, gain)| ObserverSpec { screening, gain }).collect();
    c
}

fn gaze_pair(k: usize) -> Vec<GazeEvent> {
    let base = &circular_gaze(0.5, 2.5, 1.0, 60.0)[k];
    let mut other = circular_gaze(0.3, -1.5, 1.0, 60.0)[k].clone();
    other.observer = 1;
    vec![base.clone(), other]
}

#[test]
fn identical_observers_correlate_perfectly() {
    let mut engine = Engine::new(observers(vec![(Screening::Identity, 1.0), (Screening::Identity, 1.0)])).unwrap();
    let g = circular_gaze(0.5, 2.5, 1.0, 60.0);
    for e in g.iter().take(10) {
        let mut twin = e.clone();
        twin.observer = 1;
        let (_, report) = multi_observer_step(&mut engine, &[e.clone(), twin]).unwrap();
        assert_eq!(report.pairwise[0][1], Some(1.0));
        assert_eq!(report.collective_diagnostic, Some(1.0));
    }
}

#[test]
fn zero_screening_gives_null_correlation() {
    let mut engine = Engine::new(observers(vec![(Screening::Identity, 1.0), (Screening::Zero, 1.0)])).unwrap();
    let (frames, report) = multi_observer_step(&mut engine, &gaze_pair(0)).unwrap();
    assert!(frames[1].data.iter().all(|v| *v == 0.0));
    assert_eq!(report.pairwise[0][1], None);
    assert_eq!(report.pairwise[1][1], None);
}

#[test]
fn single_observer_is_rejected_by_the_harness() {
    let mut engine = Engine::new(small_config()).unwrap();
    assert!(matches!(multi_observer_step(&mut engine, &[]), Err(DroemError::ObserverCount(_))));
}

#[test]
fn zero_gain_observer_does_not_change_shared_dynamics() {
    let mut pair = Engine::new(observers(vec![(Screening::Identity, 1.0), (Screening::Band { lo: 0, hi: 4 }, 0.0)])).unwrap();
    let mut solo = Engine::new(observers(vec![(Screening::Identity, 1.0)])).unwrap();
    for k in 0..40 {
        let events = gaze_pair(k);
        multi_observer_step(&mut pair, &events).unwrap();
        solo.apply_event(&events[0]).unwrap();
        solo.step().unwrap();
        assert_eq!(pair.state().phi, solo.state().phi, "step {k}");
    }
}

fn orthogonal_band_correlation() -> f64 {
    let mut c = observers(vec![(Screening::Band { lo: 0, hi: 5 }, 1.0), (Screening::Band { lo: 6, hi: 12 }, 1.0)]);
    c.fibers.truncate(1);
    c.fibers[0].gamma = 0.0;
    c.fibers[0].mask = droem_core::render::Mask::unit();
    let mut engine = Engine::new(c).unwrap();
    let mut last = None;
    for k in 0..30 {
        let (_, report) = multi_observer_step(&mut engine, &gaze_pair(k)).unwrap();
        last = report.pairwise[0][1];
    }
    last.unwrap()
}

#[test]
fn orthogonal_bands_have_frozen_correlation() {
    let r = orthogonal_band_correlation();
    check_golden("orthogonal_band_correlation.txt", &format!("{r:.6}\n")).unwrap();
}

#[test]
fn orthogonal_bands_give_orthogonal_fields() {
    let c = small_config();
    let mut engine = Engine::new(c.clone()).unwrap();
    for e in circular_gaze(0.5, 2.5, 0.5, 60.0) {
        engine.apply_event(&e).unwrap();
        engine.step().unwrap();
    }
    let lattice = Lattice::new(0.08, 0.01, 256, 256).unwrap();
    let phi = &engine.state().phi;
    let low: Vec<C64> = phi.iter().enumerate().map(|(j, v)| if j <= 5 { *v } else { C64::new(0.0, 0.0) }).collect();
    let high: Vec<C64> = phi.iter().enumerate().map(|(j, v)| if j > 5 { *v } else { C64::new(0.0, 0.0) }).collect();
    let (a, b) = (evaluate_state(&low, &lattice), evaluate_state(&high, &lattice));
    let inner: C64 = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
    let na = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let corr = inner.norm() / (na * nb);
    assert!(corr < 0.05, "complex correlation {corr}");
}

#[test]
fn frame_wire_round_trip_of_session_frame() {
    let engine = Engine::new(small_config()).unwrap();
    let f = engine.render(0).unwrap();
    assert_eq!(Frame::from_wire(&f.to_wire()).unwrap(), f);
}
