//! Closed-loop campaign: design → plant → assay → fit → optimize → design
//! space → validation, with every artifact written to one directory.

mod config;
mod report;
mod store;

pub use config::{
    CampaignConfig, DesignChoice, PlantSettings, SliceConfig, StepwiseConfig, ValidationRequest, SCHEMA_VERSION,
};
pub use report::render_report;
pub use store::{append_record, ExperimentRecord, RecordStatus, RecordStore};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::assay::{responses_from_fraction, ResponseVector};
use crate::doe::{allocate_batches, generate_bbd, generate_ccd, generate_dsd, DesignTable, DoeError};
use crate::dspace::{grid_scan, membership, DesignSpaceError, DesignSpaceGrid, GridAxis, GridSpec, ThresholdSpec};
use crate::params::{fmt_sig, ProcessParams, PARAM_LABELS};
use crate::pareto::{bounds_from_factors, optimize, Constraint, OptimizationSpec, ParetoError, ParetoFront};
use crate::plant::{to_jsonl, ExperimentSpec, PhaseRecord, Plant, PlantConfig, PlantError, PlantEvent, TaggedFrame};
use crate::rsm::{
    candidate_terms, diagnostics, fit_least_squares, predict, stepwise_select_with, Dataset, DiagnosticsReport,
    Observation, RegressionModel, RsmError,
};

/// Response names in Y1..Y4 order.
pub const RESPONSES: [&str; 4] = ["Y1", "Y2", "Y3", "Y4"];

/// Files a campaign writes at the top of its output directory.
pub const ARTIFACTS: [&str; 7] = [
    "config.json",
    "design.csv",
    "records.jsonl",
    "events.jsonl",
    "sensors.jsonl",
    "validation.csv",
    "report.md",
];

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign config: {0}")]
    Config(String),
    #[error(transparent)]
    Doe(#[from] DoeError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("fitting {response}: {source}")]
    Fit { response: String, source: RsmError },
    #[error(transparent)]
    DesignSpace(#[from] DesignSpaceError),
    #[error("optimization: {0}")]
    Pareto(#[from] ParetoError),
    #[error("duplicate experiment id {0}")]
    DuplicateId(u64),
    #[error("storage failure: {0}")]
    StorageFailure(String),
}

/// Predicted vs simulated responses at one validation point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub experiment_id: u64,
    pub batch_id: String,
    pub params: ProcessParams,
    pub predicted: ResponseVector,
    pub simulated: ResponseVector,
    pub inside: bool,
    pub margins: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoOutcome {
    pub batch_id: String,
    /// Down-selected front (least-violating points when nothing is feasible).
    pub front: ParetoFront,
    pub feasible: bool,
    pub full_size: usize,
}

#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub design: DesignTable,
    pub records: Vec<ExperimentRecord>,
    pub models: Vec<RegressionModel>,
    pub diagnostics: Vec<DiagnosticsReport>,
    pub fronts: Vec<ParetoOutcome>,
    pub grids: Vec<(SliceConfig, DesignSpaceGrid)>,
    pub validations: Vec<ValidationRow>,
    pub phases: Vec<PhaseRecord>,
    pub alarms: usize,
}

impl CampaignReport {
    pub fn model(&self, response: &str) -> Option<&RegressionModel> {
        self.models.iter().find(|m| m.response_name == response)
    }

    pub fn models4(&self) -> [RegressionModel; 4] {
        std::array::from_fn(|k| self.models[k].clone())
    }
}

/// Sinks for the plant's event and sensor logs.
#[derive(Default)]
pub struct PlantLogs {
    pub events: Vec<PlantEvent>,
    pub frames: Vec<TaggedFrame>,
}

fn build_design(config: &CampaignConfig) -> Result<DesignTable, CampaignError> {
    let base = match config.design {
        DesignChoice::Published => {
            let mut table = crate::case_study::design_table();
            table.seed = config.design_seed;
            return Ok(table);
        }
        DesignChoice::Dsd { dummy, extra_centers } => generate_dsd(&config.factors, dummy, extra_centers, config.design_seed)?,
        DesignChoice::BoxBehnken { centers } => generate_bbd(&config.factors, centers)?,
        DesignChoice::CentralComposite { alpha, centers } => generate_ccd(&config.factors, alpha, centers)?,
    };
    let ordered = if config.randomize_order {
        base.shuffled(config.design_seed)
    } else {
        base
    };
    Ok(allocate_batches(&ordered, &config.optimization_batches, config.allocation_seed)?)
}

/// Runs queued experiments to completion and turns their fractions into records.
fn execute(
    plant: &mut Plant,
    jobs: Vec<(Option<usize>, ExperimentSpec)>,
    logs: &mut PlantLogs,
) -> Result<Vec<ExperimentRecord>, CampaignError> {
    let mut pending = Vec::with_capacity(jobs.len());
    for (design_run, spec) in jobs {
        let id = plant.submit_experiment(spec.clone())?;
        pending.push((id, design_run, spec));
    }
    let first_event = logs.events.len();
    plant.run_until_idle(|e| logs.events.push(e.clone()), |f| logs.frames.push(f.clone()));
    let mut start = BTreeMap::new();
    let mut end = BTreeMap::new();
    for e in &logs.events[first_event..] {
        match e {
            PlantEvent::PhaseStarted { time, experiment_id, .. } => {
                start.entry(*experiment_id).or_insert(*time);
            }
            PlantEvent::ExperimentDone { time, experiment_id } => {
                end.insert(*experiment_id, *time);
            }
            _ => {}
        }
    }
    Ok(pending
        .into_iter()
        .map(|(id, design_run, spec)| {
            let outcome = plant
                .emit_fraction(id)
                .map_err(|e| e.to_string())
                .and_then(|f| responses_from_fraction(&f).map(|r| (f, r)).map_err(|e| e.to_string()));
            let (fraction, responses, status, error) = match outcome {
                Ok((f, r)) => (Some(f), Some(r), RecordStatus::Done, None),
                Err(e) => (None, None, RecordStatus::Failed, Some(e)),
            };
            ExperimentRecord {
                experiment_id: id,
                design_run,
                spec,
                start: start.get(&id).copied().unwrap_or(f64::NAN),
                end: end.get(&id).copied().unwrap_or(f64::NAN),
                fraction,
                responses,
                status,
                error,
            }
        })
        .collect())
}

/// Queues every design row (1-based `design_run`) and runs the plant until idle.
pub fn execute_design(
    plant: &mut Plant,
    design: &DesignTable,
    logs: &mut PlantLogs,
) -> Result<Vec<ExperimentRecord>, CampaignError> {
    let jobs = design
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let params = row.params().ok_or_else(|| CampaignError::Config("designs need six factors".into()))?;
            let batch_id = row
                .batch_id
                .clone()
                .ok_or_else(|| CampaignError::Config(format!("design row {} has no batch", i + 1)))?;
            Ok((
                Some(i + 1),
                ExperimentSpec {
                    params,
                    batch_id,
                    fraction_id: "F1".into(),
                },
            ))
        })
        .collect::<Result<Vec<_>, CampaignError>>()?;
    execute(plant, jobs, logs)
}

/// Datasets for Y1..Y4 from completed records.
pub fn datasets(records: &[ExperimentRecord], plant: &PlantConfig) -> Vec<Dataset> {
    RESPONSES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let rows = records
                .iter()
                .filter(|r| r.status == RecordStatus::Done)
                .filter_map(|r| {
                    let y = r.responses?.to_array()[k];
                    let attrs = plant.batch(&r.spec.batch_id)?.clone();
                    Some(Observation {
                        params: r.spec.params,
                        attrs,
                        response: y,
                    })
                })
                .collect();
            Dataset::new(*name, rows)
        })
        .collect()
}

/// Stepwise selection followed by an OLS fit, per response.
pub fn fit_models(data: &[Dataset], stepwise: &StepwiseConfig) -> Result<Vec<RegressionModel>, CampaignError> {
    let candidates = candidate_terms(PARAM_LABELS.len(), stepwise.covariates);
    data.iter()
        .map(|d| {
            let err = |source| CampaignError::Fit {
                response: d.response_name.clone(),
                source,
            };
            let terms = stepwise_select_with(d, &candidates, stepwise.options()).map_err(err)?;
            fit_least_squares(d, &terms).map_err(err)
        })
        .collect()
}

/// Runs one experiment at `params` and compares the simulated responses with
/// the model predictions.
pub fn validate_solution(
    plant: &mut Plant,
    params: ProcessParams,
    batch_id: &str,
    models: &[RegressionModel; 4],
    thresholds: &ThresholdSpec,
    logs: &mut PlantLogs,
) -> Result<(ValidationRow, ExperimentRecord), CampaignError> {
    let attrs = plant
        .config()
        .batch(batch_id)
        .cloned()
        .ok_or_else(|| PlantError::UnknownBatch(batch_id.to_string()))?;
    let spec = ExperimentSpec {
        params,
        batch_id: batch_id.to_string(),
        fraction_id: "V1".into(),
    };
    let record = execute(plant, vec![(None, spec)], logs)?.remove(0);
    let simulated = record.responses.ok_or_else(|| {
        PlantError::InvalidSpec(record.error.clone().unwrap_or_else(|| "validation run failed".into()))
    })?;
    let m = membership(models, &params, &attrs, thresholds);
    let predicted = ResponseVector::from_array(std::array::from_fn(|k| predict(&models[k], &params, &attrs)));
    Ok((
        ValidationRow {
            experiment_id: record.experiment_id,
            batch_id: batch_id.to_string(),
            params,
            predicted,
            simulated,
            inside: m.inside,
            margins: m.margins,
        },
        record,
    ))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CampaignError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CampaignError::StorageFailure(format!("{}: {e}", path.display())))
}

/// Refuses to reuse a directory that already holds campaign output.
fn prepare_output(dir: &Path) -> Result<(), CampaignError> {
    fs::create_dir_all(dir.join("models"))
        .map_err(|e| CampaignError::StorageFailure(format!("{}: {e}", dir.display())))?;
    if dir.join("records.jsonl").exists() {
        return Err(CampaignError::Config(format!(
            "{} already holds campaign output; choose an empty directory",
            dir.display()
        )));
    }
    Ok(())
}

/// Removes files a previous campaign wrote into `dir` (only known artifact names).
pub fn clear_output(dir: &Path) -> std::io::Result<()> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(());
    };
    for entry in entries {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let known = ARTIFACTS.contains(&name.as_str())
            || (name.starts_with("pareto") && name.ends_with(".csv"))
            || (name.starts_with("dspace_") && name.ends_with(".csv"));
        if known {
            fs::remove_file(entry.path())?;
        }
    }
    let models = dir.join("models");
    for name in RESPONSES {
        let p = models.join(format!("{name}.txt"));
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    Ok(())
}

/// Combined Pareto CSV with a leading batch column.
pub fn pareto_csv(outcomes: &[ParetoOutcome]) -> String {
    let mut out = String::from("batch,solution,X1,X2,X3,X4,X5,X6,Y1,Y2,Y3,Y4,feasible\n");
    for o in outcomes {
        for (k, s) in o.front.solutions.iter().enumerate() {
            let cells: Vec<String> = s.params.to_array().iter().chain(&s.responses).map(|v| fmt_sig(*v, 6)).collect();
            out.push_str(&format!("{},{},{},{}\n", o.batch_id, k + 1, cells.join(","), u8::from(s.feasible)));
        }
    }
    out
}

/// Predicted vs simulated CSV, one row per validation point.
pub fn validation_csv(rows: &[ValidationRow]) -> String {
    let mut out = String::from("batch,X1,X2,X3,X4,X5,X6");
    for name in RESPONSES {
        out.push_str(&format!(",{name}_predicted,{name}_simulated"));
    }
    out.push_str(",inside\n");
    for r in rows {
        let x: Vec<String> = r.params.to_array().iter().map(|v| fmt_sig(*v, 6)).collect();
        out.push_str(&format!("{},{}", r.batch_id, x.join(",")));
        for (p, s) in r.predicted.to_array().iter().zip(r.simulated.to_array()) {
            out.push_str(&format!(",{},{}", fmt_sig(*p, 6), fmt_sig(s, 6)));
        }
        out.push_str(&format!(",{}\n", u8::from(r.inside)));
    }
    out
}

/// Executes the full loop and writes all artifacts into `out_dir`.
pub fn run_campaign(config: &CampaignConfig, plant_config: PlantConfig, out_dir: &Path) -> Result<CampaignReport, CampaignError> {
    config.validate()?;
    let referenced = config
        .optimization_batches
        .iter()
        .chain(&config.validation_batches)
        .chain(&config.pareto_batches)
        .chain(config.dspace_slices.iter().map(|s| &s.batch_id))
        .chain(config.validation.iter().map(|v| &v.batch_id));
    for b in referenced {
        if plant_config.batch(b).is_none() {
            return Err(PlantError::UnknownBatch(b.clone()).into());
        }
    }
    prepare_output(out_dir)?;
    write(
        out_dir,
        "config.json",
        &(serde_json::to_string_pretty(config).expect("serializable") + "\n"),
    )?;

    // (2) design and execution
    let design = build_design(config)?;
    write(out_dir, "design.csv", &design.to_csv())?;
    let mut plant = Plant::new(plant_config.clone())?;
    let mut logs = PlantLogs::default();
    let mut records = execute_design(&mut plant, &design, &mut logs)?;
    let mut store = RecordStore::open(out_dir.join("records.jsonl"))?;
    for r in &records {
        append_record(&mut store, r)?;
    }

    // (3) models
    let data = datasets(&records, &plant_config);
    let models = fit_models(&data, &config.stepwise)?;
    for m in &models {
        write(&out_dir.join("models"), &format!("{}.txt", m.response_name), &m.to_text())?;
    }
    let diag: Vec<DiagnosticsReport> = models.iter().zip(&data).map(|(m, d)| diagnostics(m, d)).collect();
    let models4: [RegressionModel; 4] = std::array::from_fn(|k| models[k].clone());

    // (4) Pareto optimization
    let bounds = bounds_from_factors(&config.factors).ok_or_else(|| CampaignError::Config("six factors required".into()))?;
    let constraints: Vec<Constraint> = config
        .objective_floors
        .iter()
        .enumerate()
        .filter_map(|(k, f)| {
            f.map(|lower_bound| Constraint {
                model: models[k].clone(),
                lower_bound,
            })
        })
        .collect();
    let mut fronts = Vec::new();
    for batch_id in &config.pareto_batches {
        let spec = OptimizationSpec {
            objectives: models.clone(),
            constraints: constraints.clone(),
            bounds,
            attrs: plant_config.batch(batch_id).expect("checked").clone(),
        };
        let (front, feasible) = match optimize(&spec, &config.nsga) {
            Ok(f) => (f, true),
            Err(ParetoError::NoFeasibleSolution(f)) => (*f, false),
            Err(e) => return Err(e.into()),
        };
        let full_size = front.len();
        let front = front.down_select(config.pareto_count);
        write(out_dir, &format!("pareto_{batch_id}.csv"), &front.to_csv())?;
        fronts.push(ParetoOutcome {
            batch_id: batch_id.clone(),
            front,
            feasible,
            full_size,
        });
    }
    write(out_dir, "pareto.csv", &pareto_csv(&fronts))?;

    // (5) design space
    let thresholds = config.threshold_spec()?;
    let mut grids = Vec::new();
    for slice in &config.dspace_slices {
        let axis = |factor: usize| GridAxis {
            factor,
            low: config.factors[factor].low,
            high: config.factors[factor].high,
            resolution: slice.resolution,
        };
        let spec = GridSpec {
            x_axis: axis(slice.x_factor),
            y_axis: axis(slice.y_factor),
            fixed: slice.fixed,
            attrs: plant_config.batch(&slice.batch_id).expect("checked").clone(),
        };
        let grid = grid_scan(&models4, &spec, &thresholds)?;
        write(out_dir, &format!("dspace_{}.csv", slice.name), &grid.to_csv())?;
        grids.push((slice.clone(), grid));
    }

    // validation
    let mut validations = Vec::new();
    for req in &config.validation {
        let params = match (req.params, req.pareto_solution) {
            (Some(p), _) => p,
            (None, Some(k)) => fronts
                .iter()
                .find(|o| o.batch_id == req.batch_id)
                .and_then(|o| o.front.solutions.get(k.saturating_sub(1)))
                .map(|s| s.params)
                .ok_or_else(|| CampaignError::Config(format!("no Pareto solution {k} for batch {}", req.batch_id)))?,
            (None, None) => unreachable!("validated config"),
        };
        let (row, record) = validate_solution(&mut plant, params, &req.batch_id, &models4, &thresholds, &mut logs)?;
        append_record(&mut store, &record)?;
        records.push(record);
        validations.push(row);
    }
    write(out_dir, "validation.csv", &validation_csv(&validations))?;
    write(out_dir, "events.jsonl", &to_jsonl(&logs.events))?;
    write(out_dir, "sensors.jsonl", &to_jsonl(&logs.frames))?;

    let alarms = logs.events.iter().filter(|e| matches!(e, PlantEvent::Alarm { .. })).count();
    let report = CampaignReport {
        design,
        records,
        models,
        diagnostics: diag,
        fronts,
        grids,
        validations,
        phases: plant.phase_log().to_vec(),
        alarms,
    };
    write(out_dir, "report.md", &render_report(config, &report))?;
    Ok(report)
}

#[cfg(test)]
mod tests;
