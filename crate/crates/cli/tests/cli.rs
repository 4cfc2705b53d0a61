use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chromflow::campaign::CampaignConfig;
use chromflow::case_study::reference_models;
use chromflow::pareto::NsgaConfig;

fn chromflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chromflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_reference_models(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    for m in reference_models() {
        fs::write(dir.join(format!("{}.txt", m.response_name)), m.to_text()).unwrap();
    }
}

fn small_campaign_config(dir: &Path) -> String {
    let config = CampaignConfig {
        nsga: NsgaConfig {
            population: 100,
            generations: 10,
            ..NsgaConfig::default()
        },
        ..CampaignConfig::default()
    };
    let path = dir.join("campaign.json");
    fs::write(&path, config.to_json()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn doe_emits_twenty_rows() {
    let args = ["doe", "--factors", "6", "--dummy", "2", "--centers", "3", "--seed", "7"];
    let out = chromflow(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 21);
    assert!(text.starts_with("run,X1,X2,X3,X4,X5,X6,role,batch"));
    assert_eq!(stdout(&chromflow(&args)), text);
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = chromflow(&["doe", "--colour", "red"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn missing_subcommand_is_usage_error() {
    assert_eq!(chromflow(&[]).status.code(), Some(2));
}

#[test]
fn unsatisfiable_constraint_reports_no_feasible_solution() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    write_reference_models(&models);
    let out = chromflow(&[
        "optimize",
        "--models",
        models.to_str().unwrap(),
        "--batch",
        "250401",
        "--floor",
        "Y1=200",
        "--population",
        "40",
        "--generations",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("NoFeasibleSolution"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn optimize_and_dspace_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    write_reference_models(&models);
    let m = models.to_str().unwrap();
    let pareto = dir.path().join("p.csv");
    let out = chromflow(&[
        "optimize", "--models", m, "--batch", "250409", "--population", "100", "--generations", "20", "--out",
        pareto.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&pareto).unwrap();
    assert!(text.starts_with("batch,solution,X1"));
    assert_eq!(text.lines().count(), 6);

    let out = chromflow(&[
        "dspace", "--models", m, "--batch", "231201", "--fixed", "0.75,1,2,1,3.25,0.5", "--resolution", "21",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 1 + 21 * 21);
}

#[test]
fn bad_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    write_reference_models(&models);
    let m = models.to_str().unwrap();
    let params = "1.5,2,2.5,1.095,3.5,0.86";
    let unknown = chromflow(&["validate", "--models", m, "--batch", "000000", "--params", params]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).contains("000000"));
    let short = chromflow(&["dspace", "--models", m, "--batch", "250401", "--fixed", "1,2"]);
    assert_eq!(short.status.code(), Some(1));
    let missing = chromflow(&["validate", "--models", "/nonexistent", "--batch", "250401", "--params", params]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let out = chromflow(&[
        "doe", "--dummy", "2", "--centers", "3", "--seed", "3", "--batches",
        "250402,250403,250404,250405,250406,250407,250408,250501,231102,231202", "--out", &d("design.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = chromflow(&["run", "--design", &d("design.csv"), "--out", &d("records.jsonl"), "--noise", "zero"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(d("records.jsonl")).unwrap().lines().count(), 20);
    let again = chromflow(&["run", "--design", &d("design.csv"), "--out", &d("records.jsonl")]);
    assert_eq!(again.status.code(), Some(1));
    let out = chromflow(&["fit", "--records", &d("records.jsonl"), "--out-dir", &d("models")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("Y3"));
    let out = chromflow(&[
        "validate", "--models", &d("models"), "--batch", "250401", "--params", "1.5,2,2.5,1.095,3.5,0.86", "--noise",
        "zero",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let row: Vec<String> = stdout(&out).lines().nth(1).unwrap().split(',').map(String::from).collect();
    let (pred, sim): (f64, f64) = (row[7].parse().unwrap(), row[8].parse().unwrap());
    assert!((pred - sim).abs() <= 1e-4 * pred, "{pred} vs {sim}");
}

#[test]
fn campaign_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_campaign_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = chromflow(&["campaign", "--config", &config, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let files = chromflow::replicate::list_files(&a).unwrap();
    assert!(files.len() >= 15, "{files:?}");
    assert_eq!(files, chromflow::replicate::list_files(&b).unwrap());
    for f in files {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{}", f.display());
    }
    let report = fs::read_to_string(a.join("report.md")).unwrap();
    assert!(report.contains("## Validation"));

    let again = chromflow(&["campaign", "--config", &config, "--out", a.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(1));
    let forced = chromflow(&["campaign", "--config", &config, "--out", a.to_str().unwrap(), "--force"]);
    assert_eq!(forced.status.code(), Some(0), "{}", stderr(&forced));
    assert_eq!(fs::read(a.join("records.jsonl")).unwrap(), fs::read(b.join("records.jsonl")).unwrap());
}

#[test]
fn invalid_campaign_config_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"schema_version": 1}"#).unwrap();
    let out = chromflow(&["campaign", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn print_config_round_trips() {
    let out = chromflow(&["campaign", "--print-config"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(CampaignConfig::from_json(&stdout(&out)).unwrap(), CampaignConfig::default());
}

#[test]
fn replicate_paper_prints_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("work");
    let out = chromflow(&["replicate-paper", "--work-dir", work.to_str().unwrap()]);
    let text = stdout(&out);
    for id in 1..=10 {
        assert!(text.contains(&format!("{id:>2}. ")), "criterion {id} missing:\n{text}");
    }
    assert_eq!(out.status.code(), Some(0), "{text}\n{}", stderr(&out));
}
