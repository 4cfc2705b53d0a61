use super::*;
use crate::case_study::{reference_models, truth_models, validation_points};
use crate::pareto::NsgaConfig;
use crate::plant::NoiseLevels;

fn quick_config() -> CampaignConfig {
    CampaignConfig {
        nsga: NsgaConfig {
            population: 200,
            generations: 20,
            ..NsgaConfig::default()
        },
        ..CampaignConfig::default()
    }
}

fn plant(noise: NoiseLevels) -> PlantConfig {
    let mut c = quick_config().plant_config();
    c.noise_rel_sd = noise;
    c
}

#[test]
fn zero_noise_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_campaign(&quick_config(), plant(NoiseLevels::ZERO), dir.path()).unwrap();
    assert_eq!(report.records.iter().filter(|r| r.design_run.is_some()).count(), report.design.len());
    let truth = truth_models();
    for (name, t) in [("Y1", &truth.tt_purity), ("Y2", &truth.tt_productivity), ("Y3", &truth.fg_purity)] {
        let m = report.model(name).unwrap();
        let mut got = m.terms.clone();
        got.sort();
        let mut want = t.terms.clone();
        want.sort();
        assert_eq!(got, want, "{name}");
        for (term, c) in t.terms.iter().zip(&t.coefficients) {
            let fitted = m.coefficient(*term).unwrap();
            assert!((fitted - c).abs() <= 1e-6 * c.abs(), "{name} {term}: {fitted} vs {c}");
        }
    }
    let y4 = report.model("Y4").unwrap();
    assert!(y4.r_squared >= 0.95, "Y4 R² {} terms {:?}", y4.r_squared, y4.terms);
    for name in ["design.csv", "records.jsonl", "pareto.csv", "report.md", "models/Y4.txt", "dspace_A_250401.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn calibrated_noise_fg_purity_fit() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config();
    let report = run_campaign(&config, config.plant_config(), dir.path()).unwrap();
    let r2 = report.model("Y3").unwrap().r_squared;
    assert!((0.91..=1.0).contains(&r2), "Y3 R² {r2}");
}

#[test]
fn identical_runs_identical_artifacts() {
    let config = quick_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_campaign(&config, config.plant_config(), a.path()).unwrap();
    run_campaign(&config, config.plant_config(), b.path()).unwrap();
    let mut names: Vec<String> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "models")
        .collect();
    names.extend(RESPONSES.iter().map(|r| format!("models/{r}.txt")));
    assert!(names.len() > 10);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n}");
    }
}

#[test]
fn existing_output_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("records.jsonl"), "").unwrap();
    let config = quick_config();
    assert!(matches!(
        run_campaign(&config, config.plant_config(), dir.path()),
        Err(CampaignError::Config(_))
    ));
}

#[test]
fn unknown_batch_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = quick_config();
    config.pareto_batches = vec!["999999".into()];
    assert!(matches!(
        run_campaign(&config, config.plant_config(), dir.path()),
        Err(CampaignError::Plant(PlantError::UnknownBatch(_)))
    ));
}

fn validate_at(batch_id: &str, params: ProcessParams) -> Result<ValidationRow, CampaignError> {
    let mut p = Plant::new(plant(NoiseLevels::ZERO)).unwrap();
    let models = reference_models();
    let thresholds = crate::case_study::design_space_thresholds();
    validate_solution(&mut p, params, batch_id, &models, &thresholds, &mut PlantLogs::default()).map(|(row, _)| row)
}

#[test]
fn validation_at_optimum_matches_prediction() {
    let point = &validation_points()[0];
    let row = validate_at(point.batch_id, point.params).unwrap();
    assert!((row.simulated.tt_purity - row.predicted.tt_purity).abs() <= 1e-6 * row.predicted.tt_purity);
    assert!((row.predicted.tt_purity - 6.80).abs() < 0.15);
    assert!(row.inside);
}

#[test]
fn validation_outside_point() {
    let point = &validation_points()[2];
    let row = validate_at(point.batch_id, point.params).unwrap();
    assert!(!row.inside);
    assert!(row.simulated.tt_purity < 6.0);
}

#[test]
fn validation_unknown_batch() {
    let point = &validation_points()[0];
    assert!(matches!(
        validate_at("nope", point.params),
        Err(CampaignError::Plant(PlantError::UnknownBatch(_)))
    ));
}

#[test]
fn calibrated_validation_gap_within_noise() {
    let config = quick_config();
    let mut p = Plant::new(config.plant_config()).unwrap();
    let models = reference_models();
    let thresholds = crate::case_study::design_space_thresholds();
    let point = &validation_points()[0];
    let (row, _) =
        validate_solution(&mut p, point.params, point.batch_id, &models, &thresholds, &mut PlantLogs::default()).unwrap();
    let sd = config.plant.noise;
    for (k, sigma) in [(0, sd.tt_purity), (1, sd.tt_productivity), (2, sd.fg_purity)] {
        let (pr, si) = (row.predicted.to_array()[k], row.simulated.to_array()[k]);
        assert!(((si - pr) / pr).abs() <= 3.0 * sigma, "Y{}: {si} vs {pr}", k + 1);
    }
}

#[test]
fn generated_dsd_campaign_runs_every_row_once() {
    let dir = tempfile::tempdir().unwrap();
    let config = CampaignConfig {
        design: DesignChoice::Dsd {
            dummy: 2,
            extra_centers: 3,
        },
        randomize_order: true,
        ..quick_config()
    };
    let report = run_campaign(&config, config.plant_config(), dir.path()).unwrap();
    let mut runs: Vec<usize> = report.records.iter().filter_map(|r| r.design_run).collect();
    runs.sort();
    assert_eq!(runs, (1..=20).collect::<Vec<_>>());
    assert_eq!(report.alarms, 0);
    let design = fs::read_to_string(dir.path().join("design.csv")).unwrap();
    assert_eq!(design.lines().count(), 21);
}
