//! Reproduction checks against the embedded case-study numbers.
//!
//! Each check returns a [`CriterionResult`]; [`run_all`] executes the ten
//! checks in order. Campaign-based checks write into subdirectories of a
//! caller-supplied work directory.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::assay::ResponseVector;
use crate::campaign::{run_campaign, CampaignConfig, CampaignReport, ExperimentRecord};
use crate::case_study::{
    dataset, design_table, optimization_attrs, optimization_batches, pareto_reference, reference_models,
    truth_models, validation_measurements, validation_points, design_space_thresholds, plant_config,
    design_runs,
};
use crate::doe::{allocate_batches, equivalent_designs, generate_dsd, verify_dsd};
use crate::dspace::membership;
use crate::params::{default_factors, ProcessParams};
use crate::pareto::{bounds_from_factors, optimize, relative_distance, Constraint, NsgaConfig, OptimizationSpec};
use crate::plant::{Completion, ExperimentSpec, NoiseLevels, Phase, Plant, PlantEvent};
use crate::rsm::{
    candidate_terms, fit_least_squares, predict, stepwise_select_with, ColumnCoding, StepwiseOptions, Term,
};

/// Published R² for Y1..Y4.
pub const REPORTED_R2: [f64; 4] = [0.8538, 0.8377, 0.9574, 0.9322];
pub const R2_TOLERANCE: f64 = 0.05;
/// Absolute prediction tolerances for purities (Y1, Y3) and productivities (Y2, Y4).
pub const PURITY_TOLERANCE: f64 = 0.15;
pub const PRODUCTIVITY_TOLERANCE: f64 = 1.5;
pub const PARETO_DISTANCE: f64 = 0.02;
pub const PARETO_TIME_LIMIT: Duration = Duration::from_secs(60);
pub const FAST_TIME_LIMIT: Duration = Duration::from_secs(1);
pub const STEPWISE_OVERLAP: f64 = 0.8;
pub const TRUTH_RECOVERY: f64 = 1e-6;
pub const Y4_MIN_R2: f64 = 0.95;
pub const MASS_BALANCE_FRACTION: f64 = 1e-9;
pub const MASS_BALANCE_MEASURED: f64 = 0.005;
pub const LEVEL_BAND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Informational check; the flag records whether the target was met.
    Soft(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub outcome: Outcome,
    pub details: Vec<String>,
}

impl CriterionResult {
    fn new(id: u8, title: &'static str, passed: bool, details: Vec<String>) -> Self {
        Self {
            id,
            title,
            outcome: if passed { Outcome::Pass } else { Outcome::Fail },
            details,
        }
    }

    /// False only for a failed hard check.
    pub fn ok(&self) -> bool {
        self.outcome != Outcome::Fail
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Soft(true) => "SOFT-PASS",
            Outcome::Soft(false) => "SOFT-DIVERGES",
        };
        write!(f, "[{tag}] {:>2}. {}", self.id, self.title)?;
        for d in &self.details {
            write!(f, "\n       {d}")?;
        }
        Ok(())
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

pub fn prediction_golden() -> CriterionResult {
    let models = reference_models();
    let (worst, elapsed) = timed(|| {
        let mut worst = [0.0f64; 4];
        for r in pareto_reference() {
            let attrs = optimization_attrs(r.batch_id).expect("known batch");
            let want = r.predicted.to_array();
            for k in 0..4 {
                worst[k] = worst[k].max((predict(&models[k], &r.params, &attrs) - want[k]).abs());
            }
        }
        worst
    });
    let passed = worst[0] <= PURITY_TOLERANCE
        && worst[2] <= PURITY_TOLERANCE
        && worst[1] <= PRODUCTIVITY_TOLERANCE
        && worst[3] <= PRODUCTIVITY_TOLERANCE
        && elapsed < FAST_TIME_LIMIT;
    CriterionResult::new(
        1,
        "prediction golden test (10 Pareto rows)",
        passed,
        vec![format!(
            "max |Δ| Y1 {:.3}, Y2 {:.3}, Y3 {:.3}, Y4 {:.3} (limits {PURITY_TOLERANCE}/{PRODUCTIVITY_TOLERANCE}); {} ms",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            elapsed.as_millis()
        )],
    )
}

pub fn regression_refit() -> CriterionResult {
    let refs = reference_models();
    let (fits, elapsed) = timed(|| {
        (0..4)
            .map(|k| fit_least_squares(&dataset(k), &refs[k].terms).map(|m| m.r_squared))
            .collect::<Vec<_>>()
    });
    let mut passed = elapsed < FAST_TIME_LIMIT;
    let mut details = Vec::new();
    for (k, fit) in fits.into_iter().enumerate() {
        match fit {
            Ok(r2) => {
                let ok = (r2 - REPORTED_R2[k]).abs() <= R2_TOLERANCE;
                passed &= ok;
                details.push(format!("Y{}: R² {r2:.4} vs {:.4}", k + 1, REPORTED_R2[k]));
            }
            Err(e) => {
                passed = false;
                details.push(format!("Y{}: {e}", k + 1));
            }
        }
    }
    details.push(format!("{} ms", elapsed.as_millis()));
    CriterionResult::new(2, "OLS refit R² on the screening data", passed, details)
}

fn term_list(terms: &BTreeSet<Term>) -> String {
    if terms.is_empty() {
        return "none".into();
    }
    terms.iter().map(Term::to_string).collect::<Vec<_>>().join(" ")
}

/// Overlap of selected terms with the published term sets (intercept excluded).
pub fn stepwise_recovery() -> CriterionResult {
    let refs = reference_models();
    let candidates = candidate_terms(6, 1);
    let mut all_met = true;
    let mut details = Vec::new();
    for (label, coding) in [("centered", ColumnCoding::Centered), ("natural", ColumnCoding::Natural)] {
        let opts = StepwiseOptions {
            coding,
            ..StepwiseOptions::default()
        };
        for k in 0..4 {
            let want: BTreeSet<Term> = refs[k].terms.iter().copied().filter(|t| *t != Term::Intercept).collect();
            let got: BTreeSet<Term> = match stepwise_select_with(&dataset(k), &candidates, opts) {
                Ok(t) => t.into_iter().filter(|t| *t != Term::Intercept).collect(),
                Err(e) => {
                    details.push(format!("{label} Y{}: {e}", k + 1));
                    all_met = false;
                    continue;
                }
            };
            let shared = want.intersection(&got).count();
            let frac = shared as f64 / want.len() as f64;
            let met = frac >= STEPWISE_OVERLAP;
            if coding == ColumnCoding::Centered {
                all_met &= met;
            }
            let missing: BTreeSet<Term> = want.difference(&got).copied().collect();
            let extra: BTreeSet<Term> = got.difference(&want).copied().collect();
            details.push(format!(
                "{label} Y{}: {shared}/{} shared ({:.0}%); missing {}; extra {}",
                k + 1,
                want.len(),
                100.0 * frac,
                term_list(&missing),
                term_list(&extra)
            ));
        }
    }
    CriterionResult {
        id: 3,
        title: "stepwise term recovery at p = 0.05 (soft)",
        outcome: Outcome::Soft(all_met),
        details,
    }
}

pub fn dsd_structure() -> CriterionResult {
    let mut details = Vec::new();
    let generated = generate_dsd(&default_factors(), 2, 3, 7);
    let Ok(design) = generated else {
        return CriterionResult::new(4, "DSD structure", false, vec![format!("{:?}", generated.err())]);
    };
    let report = verify_dsd(&design);
    details.extend(report.failures().map(|c| format!("{}: {}", c.name, c.detail)));
    let matches = equivalent_designs(&design, &design_table());
    details.push(format!(
        "{} rows, verify_dsd {}, matches published table: {matches}",
        design.len(),
        if report.ok { "ok" } else { "failed" }
    ));
    let batches = optimization_batches();
    let counts_ok = match allocate_batches(&design, &batches, 7) {
        Ok(alloc) => {
            let counts: Vec<usize> = batches
                .iter()
                .map(|b| alloc.rows.iter().filter(|r| r.batch_id.as_ref() == Some(b)).count())
                .collect();
            details.push(format!("runs per batch {counts:?}"));
            counts.iter().all(|&c| c == 2)
        }
        Err(e) => {
            details.push(e.to_string());
            false
        }
    };
    CriterionResult::new(4, "DSD structure and batch allocation", report.ok && matches && counts_ok, details)
}

/// Optimization problem for one batch with the published models.
pub fn reference_optimization(batch_id: &str) -> OptimizationSpec {
    let [y1, y2, y3, y4] = reference_models();
    OptimizationSpec {
        objectives: vec![y1.clone(), y2, y3.clone(), y4],
        constraints: vec![
            Constraint {
                model: y1,
                lower_bound: 6.0,
            },
            Constraint {
                model: y3,
                lower_bound: 24.0,
            },
        ],
        bounds: bounds_from_factors(&default_factors()).expect("six factors"),
        attrs: optimization_attrs(batch_id).expect("known batch"),
    }
}

/// Every published Pareto point must have a front member within
/// [`PARETO_DISTANCE`] (Euclidean relative objective distance).
pub fn nsga_reproduction(config: &NsgaConfig) -> CriterionResult {
    let refs = pareto_reference();
    let mut passed = true;
    let mut details = Vec::new();
    for batch_id in ["250401", "250409"] {
        let spec = reference_optimization(batch_id);
        let (front, elapsed) = timed(|| optimize(&spec, config));
        let front = match front {
            Ok(f) => f,
            Err(e) => {
                passed = false;
                details.push(format!("{batch_id}: {e}"));
                continue;
            }
        };
        passed &= elapsed < PARETO_TIME_LIMIT;
        let mut dists = Vec::new();
        for r in refs.iter().filter(|r| r.batch_id == batch_id) {
            let want = r.predicted.to_array();
            let best = front
                .solutions
                .iter()
                .map(|s| relative_distance(&s.objectives, &want))
                .fold(f64::INFINITY, f64::min);
            passed &= best <= PARETO_DISTANCE;
            dists.push(format!("{best:.4}"));
        }
        details.push(format!(
            "{batch_id}: {} front points, nearest distances [{}], {:.1} s",
            front.len(),
            dists.join(", "),
            elapsed.as_secs_f64()
        ));
    }
    CriterionResult::new(5, "NSGA-II reproduces the published Pareto solutions", passed, details)
}

pub fn design_space_membership() -> CriterionResult {
    let models = reference_models();
    let thresholds = design_space_thresholds();
    let mut passed = true;
    let mut details = Vec::new();
    for p in validation_points() {
        let attrs = optimization_attrs(p.batch_id).expect("known batch");
        let m = membership(&models, &p.params, &attrs, &thresholds);
        passed &= m.inside == p.inside;
        details.push(format!(
            "{}: {} (reported {}), worst margin {:.3}",
            p.batch_id,
            if m.inside { "inside" } else { "outside" },
            if p.inside { "inside" } else { "outside" },
            m.worst_margin()
        ));
    }
    CriterionResult::new(6, "design-space membership of the validation points", passed, details)
}

pub fn round_trip(report: &CampaignReport) -> CriterionResult {
    let truth = truth_models();
    let mut passed = true;
    let mut details = Vec::new();
    for (name, t) in [("Y1", &truth.tt_purity), ("Y2", &truth.tt_productivity), ("Y3", &truth.fg_purity)] {
        let Some(m) = report.model(name) else {
            passed = false;
            continue;
        };
        let same_terms = m.terms.iter().collect::<BTreeSet<_>>() == t.terms.iter().collect::<BTreeSet<_>>();
        let worst = t
            .terms
            .iter()
            .zip(&t.coefficients)
            .map(|(term, c)| m.coefficient(*term).map_or(f64::INFINITY, |v| (v - c).abs() / c.abs()))
            .fold(0.0, f64::max);
        passed &= same_terms && worst <= TRUTH_RECOVERY;
        details.push(format!("{name}: terms match {same_terms}, max relative coefficient error {worst:.2e}"));
    }
    let y4 = report.model("Y4").map_or(f64::NAN, |m| m.r_squared);
    passed &= y4 >= Y4_MIN_R2;
    details.push(format!("Y4: R² {y4:.4}"));
    CriterionResult::new(7, "zero-noise campaign recovers the plant truth", passed, details)
}

fn mass_balance_error(y: &ResponseVector) -> f64 {
    let lhs = y.tt_purity * y.fg_productivity;
    let rhs = y.tt_productivity * y.fg_purity;
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs())
}

pub fn mass_balance(records: &[&ExperimentRecord]) -> CriterionResult {
    let mut passed = true;
    let worst = records
        .iter()
        .filter_map(|r| r.responses.as_ref())
        .map(mass_balance_error)
        .fold(0.0, f64::max);
    let count = records.iter().filter(|r| r.fraction.is_some()).count();
    passed &= count > 0 && worst <= MASS_BALANCE_FRACTION;
    let mut details = vec![format!("{count} simulated fractions, max relative residual {worst:.2e}")];
    for (batch_id, _, measured) in validation_measurements() {
        let ratio = measured.tt_purity * measured.fg_productivity / (measured.tt_productivity * measured.fg_purity);
        passed &= (ratio - 1.0).abs() < MASS_BALANCE_MEASURED;
        details.push(format!("measured {batch_id}: Y1·Y4/(Y2·Y3) = {ratio:.5}"));
    }
    CriterionResult::new(8, "mass-balance identity Y1·Y4 = Y2·Y3", passed, details)
}

pub fn plant_control() -> CriterionResult {
    let mut passed = true;
    let mut details = Vec::new();
    let mut runs = 0;
    let mut worst = 0.0f64;
    let mut unstabilized = 0;
    let mut alarms = 0;
    let mut check = |plant: &Plant, events: &[PlantEvent]| {
        alarms += events.iter().filter(|e| matches!(e, PlantEvent::Alarm { .. })).count();
        for r in plant.phase_log() {
            worst = worst.max(r.max_level_deviation);
            if matches!(r.phase, Phase::Equilibrate | Phase::Regenerate) && r.reason != Completion::Stabilized {
                unstabilized += 1;
            }
        }
    };
    for flow in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5] {
        let mut config = plant_config(11);
        config.noise_rel_sd = NoiseLevels::ZERO;
        let mut plant = Plant::new(config).expect("valid plant");
        plant
            .submit_experiment(ExperimentSpec {
                params: ProcessParams::new(flow, 1.0, flow, 0.5, flow, 0.5),
                batch_id: "250402".into(),
                fraction_id: "F1".into(),
            })
            .expect("idle plant");
        let mut events = Vec::new();
        plant.run_until_idle(|e| events.push(e.clone()), |_| {});
        check(&plant, &events);
        runs += 1;
    }
    let mut plant = Plant::new(plant_config(12)).expect("valid plant");
    for r in design_runs() {
        plant
            .submit_experiment(ExperimentSpec {
                params: r.params,
                batch_id: r.batch_id.into(),
                fraction_id: "F1".into(),
            })
            .expect("queueing plant");
        runs += 1;
    }
    let mut events = Vec::new();
    plant.run_until_idle(|e| events.push(e.clone()), |_| {});
    check(&plant, &events);
    passed &= worst <= LEVEL_BAND && unstabilized == 0 && alarms == 0;
    details.push(format!(
        "{runs} runs: max level deviation {worst:.3} cm after transient, {unstabilized} equilibrate/regenerate phases not stabilized, {alarms} alarms"
    ));
    CriterionResult::new(9, "level control and stabilization-driven phase changes", passed, details)
}

/// Relative paths of every file under `dir`, sorted.
pub fn list_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(dir).expect("under dir").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn determinism(a: &Path, b: &Path) -> CriterionResult {
    let compare = || -> std::io::Result<(usize, Vec<String>)> {
        let fa = list_files(a)?;
        let fb = list_files(b)?;
        let mut diffs = Vec::new();
        if fa != fb {
            diffs.push("file sets differ".to_string());
        }
        for f in &fa {
            if fb.contains(f) && fs::read(a.join(f))? != fs::read(b.join(f))? {
                diffs.push(f.display().to_string());
            }
        }
        Ok((fa.len(), diffs))
    };
    match compare() {
        Ok((n, diffs)) => {
            let mut details = vec![format!("{n} artifacts compared, {} differ", diffs.len())];
            details.extend(diffs);
            CriterionResult::new(10, "identical campaigns give byte-identical artifacts", n > 0 && details.len() == 1, details)
        }
        Err(e) => CriterionResult::new(10, "identical campaigns give byte-identical artifacts", false, vec![e.to_string()]),
    }
}

pub struct ReplicateOptions {
    /// Empty or missing directory for campaign outputs.
    pub work_dir: PathBuf,
    pub nsga: NsgaConfig,
}

impl ReplicateOptions {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        Self {
            work_dir: work_dir.into(),
            nsga: NsgaConfig::default(),
        }
    }
}

fn campaign_failure(id: u8, title: &'static str, e: impl fmt::Display) -> CriterionResult {
    CriterionResult::new(id, title, false, vec![format!("campaign failed: {e}")])
}

/// Runs all ten checks in order.
pub fn run_all(opts: &ReplicateOptions) -> Vec<CriterionResult> {
    let mut results = vec![
        prediction_golden(),
        regression_refit(),
        stepwise_recovery(),
        dsd_structure(),
        nsga_reproduction(&opts.nsga),
        design_space_membership(),
    ];
    let config = CampaignConfig {
        nsga: opts.nsga,
        ..CampaignConfig::default()
    };
    let mut quiet = config.plant_config();
    quiet.noise_rel_sd = NoiseLevels::ZERO;
    let zero = run_campaign(&config, quiet, &opts.work_dir.join("zero_noise"));
    let first = run_campaign(&config, config.plant_config(), &opts.work_dir.join("run_a"));
    let second = run_campaign(&config, config.plant_config(), &opts.work_dir.join("run_b"));

    results.push(match &zero {
        Ok(r) => round_trip(r),
        Err(e) => campaign_failure(7, "zero-noise campaign recovers the plant truth", e),
    });
    results.push(match (&zero, &first) {
        (Ok(z), Ok(f)) => mass_balance(&z.records.iter().chain(&f.records).collect::<Vec<_>>()),
        (Err(e), _) | (_, Err(e)) => campaign_failure(8, "mass-balance identity Y1·Y4 = Y2·Y3", e),
    });
    results.push(plant_control());
    results.push(match (&first, &second) {
        (Ok(_), Ok(_)) => determinism(&opts.work_dir.join("run_a"), &opts.work_dir.join("run_b")),
        (Err(e), _) | (_, Err(e)) => campaign_failure(10, "identical campaigns give byte-identical artifacts", e),
    });
    results
}
