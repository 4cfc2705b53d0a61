use super::*;
use crate::assay::responses_from_fraction;
use crate::case_study::{design_runs, plant_config, truth_models};
use proptest::prelude::*;

fn quiet_config() -> PlantConfig {
    let mut c = plant_config(3);
    c.noise_rel_sd = NoiseLevels::ZERO;
    c
}

fn spec(params: ProcessParams, batch: &str) -> ExperimentSpec {
    ExperimentSpec {
        params,
        batch_id: batch.into(),
        fraction_id: "F1".into(),
    }
}

fn solution_one() -> ProcessParams {
    ProcessParams::new(1.5, 2.0, 2.5, 1.095, 3.5, 0.86)
}

fn run(plant: &mut Plant) -> (Vec<PlantEvent>, Vec<TaggedFrame>) {
    let (mut events, mut frames) = (Vec::new(), Vec::new());
    plant.run_until_idle(|e| events.push(e.clone()), |f| frames.push(f.clone()));
    (events, frames)
}

#[test]
fn bed_volume_from_geometry() {
    let c = quiet_config();
    assert!((c.bed_volume() - 254.469).abs() < 1e-3);
    let f = fraction_from_latents(&solution_one(), "250401", [6.8, 29.4, 96.5], c.bed_volume());
    assert!((f.volume - 766.0).abs() < 0.1, "{}", f.volume);
}

#[test]
fn submission_rules() {
    let mut plant = Plant::new(quiet_config()).unwrap();
    assert_eq!(plant.submit_experiment(spec(solution_one(), "250401")), Ok(1));
    assert_eq!(
        plant.submit_experiment(spec(solution_one(), "999999")),
        Err(PlantError::UnknownBatch("999999".into()))
    );
    let mut c = quiet_config();
    c.queueing = false;
    let mut strict = Plant::new(c).unwrap();
    strict.submit_experiment(spec(solution_one(), "250401")).unwrap();
    assert_eq!(strict.submit_experiment(spec(solution_one(), "250401")), Err(PlantError::PlantBusy));
}

#[test]
fn fraction_before_elution_is_wrong_phase() {
    let mut plant = Plant::new(quiet_config()).unwrap();
    let id = plant.submit_experiment(spec(solution_one(), "250401")).unwrap();
    for _ in 0..100 {
        plant.step(1.0);
    }
    assert_eq!(plant.emit_fraction(id), Err(PlantError::WrongPhase(id)));
    assert_eq!(plant.emit_fraction(42), Err(PlantError::UnknownExperiment(42)));
}

#[test]
fn full_run_trace() {
    let mut plant = Plant::new(quiet_config()).unwrap();
    let id = plant.submit_experiment(spec(solution_one(), "250401")).unwrap();
    let (events, frames) = run(&mut plant);
    let phases: Vec<Phase> = events
        .iter()
        .filter_map(|e| match e {
            PlantEvent::PhaseStarted { phase, .. } => Some(*phase),
            _ => None,
        })
        .collect();
    assert_eq!(
        phases,
        [Phase::Equilibrate, Phase::Load, Phase::Wash, Phase::Elute, Phase::Regenerate]
    );
    let ready = events
        .iter()
        .position(|e| matches!(e, PlantEvent::FractionReady { .. }))
        .unwrap();
    assert!(matches!(events[ready - 1], PlantEvent::PhaseCompleted { phase: Phase::Elute, .. }));
    assert!(matches!(events[ready + 1], PlantEvent::PhaseStarted { phase: Phase::Regenerate, .. }));

    let log = plant.phase_log();
    let load = log.iter().find(|r| r.phase == Phase::Load).unwrap();
    assert!((load.end - load.start - 7200.0).abs() <= 1.0);
    let equil = &log[0];
    assert_eq!(equil.reason, Completion::Stabilized);
    assert_eq!(log[4].reason, Completion::Stabilized);
    let PlantEvent::FractionReady { time, .. } = events[ready] else { unreachable!() };
    let expected = equil.end + (2.0 + 1.095 + 0.86) * 3600.0;
    assert!((time - expected).abs() <= 3.0, "{time} vs {expected}");

    assert!(frames.iter().all(|f| f.frame.is_valid()));
    assert!(frames.iter().all(|f| f.experiment_id == id));
    let f = plant.emit_fraction(id).unwrap();
    let y = responses_from_fraction(&f).unwrap();
    assert!((y.tt_purity - 6.80).abs() < 0.02, "{y:?}");
    assert!((y.tt_productivity - 96.5).abs() < 0.2, "{y:?}");
}

#[test]
fn zero_noise_fraction_equals_truth() {
    let c = quiet_config();
    let truth = truth_models();
    for run in design_runs() {
        let attrs = c.batch(run.batch_id).unwrap();
        let latent = latent_responses(&truth, &run.params, attrs);
        let f = fraction_from_latents(&run.params, run.batch_id, latent, c.bed_volume());
        let y = responses_from_fraction(&f).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(y.tt_purity, latent[0]) < 1e-9);
        assert!(rel(y.fg_purity, latent[1]) < 1e-9);
        assert!(rel(y.tt_productivity, latent[2]) < 1e-9);
        assert!(rel(y.fg_productivity, latent[2] * latent[1] / latent[0]) < 1e-9);
    }
}

#[test]
fn sequential_queue_and_level_band() {
    let mut plant = Plant::new(plant_config(9)).unwrap();
    let runs = design_runs();
    let ids: Vec<u64> = runs
        .iter()
        .map(|r| plant.submit_experiment(spec(r.params, r.batch_id)).unwrap())
        .collect();
    assert_eq!(ids, (1..=20).collect::<Vec<u64>>());
    let (events, _) = run(&mut plant);
    let done: Vec<u64> = events
        .iter()
        .filter_map(|e| match e {
            PlantEvent::ExperimentDone { experiment_id, .. } => Some(*experiment_id),
            _ => None,
        })
        .collect();
    assert_eq!(done, ids);
    assert!(!events.iter().any(|e| matches!(e, PlantEvent::Alarm { .. })));
    for r in plant.phase_log() {
        assert!(r.max_level_deviation <= 0.5, "{r:?}");
        if matches!(r.phase, Phase::Equilibrate | Phase::Regenerate) {
            assert_eq!(r.reason, Completion::Stabilized);
        }
    }
    for id in ids {
        assert!(plant.emit_fraction(id).is_ok());
    }
}

#[test]
fn level_band_across_flow_range() {
    for flow in [0.5, 1.0, 2.0, 3.0, 3.5] {
        let mut plant = Plant::new(quiet_config()).unwrap();
        let p = ProcessParams::new(flow, 1.0, flow, 0.5, flow, 0.5);
        plant.submit_experiment(spec(p, "250402")).unwrap();
        run(&mut plant);
        for r in plant.phase_log() {
            assert!(r.max_level_deviation <= 0.5, "flow {flow}: {r:?}");
        }
    }
}

#[test]
fn balanced_flows_keep_level() {
    let mut plant = Plant::new(quiet_config()).unwrap();
    plant.state.p1_flow = 2.0;
    plant.state.p2_flow = 2.0;
    let before = plant.state.level;
    let rate = (plant.state.p1_flow - plant.state.p2_flow) * plant.config.bed_volume() / 3600.0
        / plant.config.cross_section();
    assert_eq!(rate, 0.0);
    plant.step(1.0);
    assert_eq!(plant.state.level, before);
}

#[test]
fn deterministic_logs() {
    let go = || {
        let mut plant = Plant::new(plant_config(5)).unwrap();
        for r in design_runs().iter().take(3) {
            plant.submit_experiment(spec(r.params, r.batch_id)).unwrap();
        }
        let (events, frames) = run(&mut plant);
        (to_jsonl(&events), to_jsonl(&frames), plant.emit_fraction(2).unwrap())
    };
    assert_eq!(go(), go());
}

#[test]
fn jsonl_lines_parse() {
    let mut plant = Plant::new(quiet_config()).unwrap();
    plant.submit_experiment(spec(solution_one(), "250401")).unwrap();
    let (events, frames) = run(&mut plant);
    let text = to_jsonl(&frames);
    for line in text.lines() {
        let f: TaggedFrame = serde_json::from_str(line).unwrap();
        assert!(f.frame.is_valid());
    }
    let ev = to_jsonl(&events);
    assert!(ev.lines().next().unwrap().contains("\"event\":\"PhaseStarted\""));
}

#[test]
fn invalid_config_rejected() {
    let mut c = quiet_config();
    c.dt = 0.0;
    assert!(Plant::new(c).is_err());
    let mut c = quiet_config();
    c.noise_rel_sd.tt_purity = -0.1;
    assert!(Plant::new(c).is_err());
}

proptest! {
    #[test]
    fn noisy_fractions_keep_mass_balance(
        x in prop::array::uniform6(0.0f64..1.0),
        seed in 0u64..10_000,
    ) {
        let c = plant_config(seed);
        let lo = [0.5, 1.0, 1.5, 0.5, 2.5, 0.5];
        let p = ProcessParams::from_array(std::array::from_fn(|i| lo[i] + x[i]));
        let attrs = c.batch("250405").unwrap();
        let latent = latent_responses(&c.truth_models, &p, attrs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = noise_factors(&c.noise_rel_sd, &mut rng);
        let f = fraction_from_latents(&p, "250405", std::array::from_fn(|i| latent[i] * k[i]), c.bed_volume());
        prop_assert!(f.validate().is_ok());
        let y = responses_from_fraction(&f).unwrap();
        let scale = (y.tt_purity * y.fg_productivity).abs().max(1e-12);
        prop_assert!(y.mass_balance_residual().abs() / scale < 1e-9);
    }
}
