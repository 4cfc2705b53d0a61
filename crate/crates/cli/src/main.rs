use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chromflow::campaign::{
    clear_output, datasets, execute_design, fit_models, pareto_csv, run_campaign, validate_solution, validation_csv,
    append_record, CampaignConfig, ParetoOutcome, PlantLogs, RecordStore, StepwiseConfig, RESPONSES,
};
use chromflow::case_study;
use chromflow::doe::{allocate_batches, generate_bbd, generate_ccd, generate_dsd, AlphaMode, DesignTable};
use chromflow::dspace::{grid_scan, GridAxis, GridSpec, ThresholdSpec};
use chromflow::params::{default_factors, FactorSpec, MaterialAttributes, PARAM_LABELS};
use chromflow::pareto::{bounds_from_factors, optimize, Constraint, OptimizationSpec};
use chromflow::plant::{to_jsonl, NoiseLevels, Plant, PlantConfig};
use chromflow::replicate::{run_all, ReplicateOptions};
use chromflow::rsm::RegressionModel;
use chromflow::ProcessParams;

#[derive(Parser)]
#[command(name = "chromflow", version, about = "Chromatographic process development workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a design table as CSV.
    Doe(DoeArgs),
    /// Execute a design on the simulated plant and write experiment records.
    Run(RunArgs),
    /// Fit Y1..Y4 models from experiment records.
    Fit(FitArgs),
    /// Multi-objective optimization of fitted models for one batch.
    Optimize(OptimizeArgs),
    /// Scan a 2-D design-space slice.
    Dspace(DspaceArgs),
    /// Run one plant experiment and compare it with model predictions.
    Validate(ValidateArgs),
    /// Full loop: design, execution, fitting, optimization, design space, validation.
    Campaign(CampaignArgs),
    /// Check the embedded case-study numbers and print one line per criterion.
    ReplicatePaper(ReplicateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignKindArg {
    Dsd,
    Bbd,
    Ccd,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaArg {
    Rotatable,
    FaceCentered,
}

#[derive(Args)]
struct DoeArgs {
    #[arg(long, value_enum, default_value = "dsd")]
    kind: DesignKindArg,
    /// Number of factors; 6 uses the case-study ranges, others are coded [-1, 1].
    #[arg(long, default_value_t = 6)]
    factors: usize,
    /// Dummy factors (DSD only).
    #[arg(long, default_value_t = 0)]
    dummy: usize,
    /// Center runs beyond the DSD's own (DSD), or total center runs (BBD/CCD).
    #[arg(long, default_value_t = 0)]
    centers: usize,
    #[arg(long, value_enum, default_value = "face-centered")]
    alpha: AlphaArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shuffle run order with the seed.
    #[arg(long)]
    randomize: bool,
    /// Comma-separated batch ids to allocate runs to.
    #[arg(long, value_delimiter = ',')]
    batches: Vec<String>,
    #[arg(long)]
    alloc_seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Zero,
    Nominal,
    Calibrated,
}

#[derive(Args)]
struct PlantArgs {
    #[arg(long, default_value_t = 2024)]
    plant_seed: u64,
    #[arg(long, value_enum, default_value = "calibrated")]
    noise: NoiseArg,
}

impl PlantArgs {
    fn config(&self) -> PlantConfig {
        let mut c = case_study::plant_config(self.plant_seed);
        c.noise_rel_sd = match self.noise {
            NoiseArg::Zero => NoiseLevels::ZERO,
            NoiseArg::Nominal => NoiseLevels::NOMINAL,
            NoiseArg::Calibrated => case_study::CALIBRATED_NOISE,
        };
        c
    }
}

#[derive(Args)]
struct RunArgs {
    /// Design CSV with a batch for every row (six factors).
    #[arg(long)]
    design: PathBuf,
    /// Records file to create.
    #[arg(long)]
    out: PathBuf,
    /// Optional plant event log (JSONL).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Optional sensor log (JSONL).
    #[arg(long)]
    sensors: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    plant: PlantArgs,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    records: PathBuf,
    /// Directory receiving Y1.txt..Y4.txt.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    p_enter: f64,
    #[arg(long, default_value_t = 0.05)]
    p_remove: f64,
    /// Select terms on natural-unit columns instead of range-coded ones.
    #[arg(long)]
    natural: bool,
    #[arg(long, default_value_t = 1)]
    covariates: usize,
}

#[derive(Args)]
struct ModelArgs {
    /// Directory holding Y1.txt..Y4.txt.
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    batch: String,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Campaign config supplying floors, NSGA settings and solution count.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lower bound on a response, e.g. `Y1=6`; replaces the config floors.
    #[arg(long = "floor")]
    floors: Vec<String>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Solutions kept after down-selection (0 keeps the whole front).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DspaceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "X3")]
    x: String,
    #[arg(long, default_value = "X4")]
    y: String,
    /// Six comma-separated values for the non-swept factors.
    #[arg(long, value_delimiter = ',')]
    fixed: Vec<f64>,
    #[arg(long, default_value_t = chromflow::dspace::DEFAULT_RESOLUTION)]
    resolution: usize,
    /// Four comma-separated thresholds for Y1..Y4, `-` for none.
    #[arg(long, default_value = "6,50,24,200")]
    thresholds: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Six comma-separated process parameters.
    #[arg(long, value_delimiter = ',', required = true)]
    params: Vec<f64>,
    #[arg(long, default_value = "6,50,24,200")]
    thresholds: String,
    #[command(flatten)]
    plant: PlantArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CampaignArgs {
    /// Campaign config (JSON); the case-study campaign when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
    /// Replace artifacts of an earlier campaign in the output directory.
    #[arg(long)]
    force: bool,
    /// Print the default config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ReplicateArgs {
    /// Directory for campaign outputs (a temporary one when omitted).
    #[arg(long)]
    work_dir: Option<PathBuf>,
}

type CliResult = Result<(), String>;

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn coded_factors(n: usize) -> Vec<FactorSpec> {
    if n == 6 {
        return default_factors();
    }
    (1..=n)
        .map(|i| FactorSpec::new(format!("X{i}"), -1.0, 1.0, "").expect("static range"))
        .collect()
}

fn doe(a: DoeArgs) -> CliResult {
    let factors = coded_factors(a.factors);
    let mut design = match a.kind {
        DesignKindArg::Dsd => generate_dsd(&factors, a.dummy, a.centers, a.seed),
        DesignKindArg::Bbd => generate_bbd(&factors, a.centers),
        DesignKindArg::Ccd => {
            let mode = match a.alpha {
                AlphaArg::Rotatable => AlphaMode::Rotatable,
                AlphaArg::FaceCentered => AlphaMode::FaceCentered,
            };
            generate_ccd(&factors, mode, a.centers)
        }
    }
    .map_err(|e| e.to_string())?;
    if a.randomize {
        design = design.shuffled(a.seed);
    }
    if !a.batches.is_empty() {
        design = allocate_batches(&design, &a.batches, a.alloc_seed.unwrap_or(a.seed)).map_err(|e| e.to_string())?;
    }
    emit(a.out.as_deref(), &design.to_csv())
}

fn refuse_existing(path: &Path, force: bool) -> CliResult {
    if path.exists() {
        if !force {
            return Err(format!("{} exists; pass --force to overwrite", path.display()));
        }
        fs::remove_file(path).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn run(a: RunArgs) -> CliResult {
    let design = DesignTable::from_csv(&read(&a.design)?, &default_factors(), 0).map_err(|e| e.to_string())?;
    for p in [Some(&a.out), a.events.as_ref(), a.sensors.as_ref()].into_iter().flatten() {
        refuse_existing(p, a.force)?;
    }
    let mut plant = Plant::new(a.plant.config()).map_err(|e| e.to_string())?;
    let mut logs = PlantLogs::default();
    let records = execute_design(&mut plant, &design, &mut logs).map_err(|e| e.to_string())?;
    let mut store = RecordStore::open(&a.out).map_err(|e| e.to_string())?;
    for r in &records {
        append_record(&mut store, r).map_err(|e| e.to_string())?;
    }
    if let Some(p) = &a.events {
        emit(Some(p), &to_jsonl(&logs.events))?;
    }
    if let Some(p) = &a.sensors {
        emit(Some(p), &to_jsonl(&logs.frames))?;
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{} experiments executed, {failed} failed", records.len());
    Ok(())
}

fn fit(a: FitArgs) -> CliResult {
    let store = RecordStore::open(&a.records).map_err(|e| e.to_string())?;
    let records = store.records().map_err(|e| e.to_string())?;
    let stepwise = StepwiseConfig {
        p_enter: a.p_enter,
        p_remove: a.p_remove,
        centered: !a.natural,
        covariates: a.covariates,
    };
    if !(0.0 < a.p_enter && a.p_enter <= a.p_remove && a.p_remove < 1.0) || a.covariates > 4 {
        return Err("need 0 < p-enter <= p-remove < 1 and at most 4 covariates".into());
    }
    let plant = case_study::plant_config(0);
    let data = datasets(&records, &plant);
    let models = fit_models(&data, &stepwise).map_err(|e| e.to_string())?;
    fs::create_dir_all(&a.out_dir).map_err(|e| format!("{}: {e}", a.out_dir.display()))?;
    for m in &models {
        emit(Some(&a.out_dir.join(format!("{}.txt", m.response_name))), &m.to_text())?;
        println!("{}: {} terms, R² {:.4}", m.response_name, m.terms.len(), m.r_squared);
    }
    Ok(())
}

fn load_models(dir: &Path) -> Result<[RegressionModel; 4], String> {
    let mut out = Vec::with_capacity(4);
    for name in RESPONSES {
        let path = dir.join(format!("{name}.txt"));
        let m = RegressionModel::from_text(&read(&path)?).map_err(|e| format!("{}: {e}", path.display()))?;
        out.push(m);
    }
    Ok(out.try_into().expect("four models"))
}

fn batch_attrs(id: &str) -> Result<MaterialAttributes, String> {
    case_study::batch(id).ok_or_else(|| format!("unknown batch {id}"))
}

fn load_config(path: Option<&Path>) -> Result<CampaignConfig, String> {
    match path {
        Some(p) => CampaignConfig::from_json(&read(p)?).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(CampaignConfig::default()),
    }
}

fn response_index(name: &str) -> Result<usize, String> {
    RESPONSES
        .iter()
        .position(|r| *r == name.trim())
        .ok_or_else(|| format!("unknown response {name:?} (expected Y1..Y4)"))
}

fn optimize_cmd(a: OptimizeArgs) -> CliResult {
    let models = load_models(&a.model.models)?;
    let config = load_config(a.config.as_deref())?;
    let mut floors = config.objective_floors;
    if !a.floors.is_empty() {
        floors = [None; 4];
        for f in &a.floors {
            let (name, value) = f.split_once('=').ok_or_else(|| format!("--floor expects NAME=VALUE, got {f:?}"))?;
            let v: f64 = value.trim().parse().map_err(|_| format!("bad floor value {value:?}"))?;
            floors[response_index(name)?] = Some(v);
        }
    }
    let mut nsga = config.nsga;
    nsga.population = a.population.unwrap_or(nsga.population);
    nsga.generations = a.generations.unwrap_or(nsga.generations);
    nsga.seed = a.seed.unwrap_or(nsga.seed);
    let spec = OptimizationSpec {
        objectives: models.to_vec(),
        constraints: floors
            .iter()
            .enumerate()
            .filter_map(|(k, f)| {
                f.map(|lower_bound| Constraint {
                    model: models[k].clone(),
                    lower_bound,
                })
            })
            .collect(),
        bounds: bounds_from_factors(&config.factors).ok_or("six factors required")?,
        attrs: batch_attrs(&a.model.batch)?,
    };
    let front = optimize(&spec, &nsga).map_err(|e| e.to_string())?;
    let full_size = front.len();
    let count = a.count.unwrap_or(config.pareto_count);
    let front = if count == 0 { front } else { front.down_select(count) };
    eprintln!("{full_size} non-dominated solutions, {} written", front.len());
    let outcome = ParetoOutcome {
        batch_id: a.model.batch.clone(),
        front,
        feasible: true,
        full_size,
    };
    emit(a.out.as_deref(), &pareto_csv(&[outcome]))
}

fn parse_thresholds(s: &str) -> Result<ThresholdSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err("--thresholds needs four comma-separated values".into());
    }
    let mut t = [None; 4];
    for (k, p) in parts.iter().enumerate() {
        if *p != "-" && !p.is_empty() {
            t[k] = Some(p.parse::<f64>().map_err(|_| format!("bad threshold {p:?}"))?);
        }
    }
    ThresholdSpec::new(t).map_err(|e| e.to_string())
}

fn factor_index(name: &str) -> Result<usize, String> {
    PARAM_LABELS
        .iter()
        .position(|l| *l == name)
        .ok_or_else(|| format!("unknown factor {name:?} (expected X1..X6)"))
}

fn params_from(values: &[f64]) -> Result<ProcessParams, String> {
    let x: [f64; 6] = values.try_into().map_err(|_| "six parameter values required".to_string())?;
    Ok(ProcessParams::from_array(x))
}

fn dspace(a: DspaceArgs) -> CliResult {
    let models = load_models(&a.model.models)?;
    let thresholds = parse_thresholds(&a.thresholds)?;
    let fixed = if a.fixed.is_empty() {
        ProcessParams::from_array(std::array::from_fn(|i| default_factors()[i].center()))
    } else {
        params_from(&a.fixed)?
    };
    let factors = default_factors();
    let axis = |name: &str| -> Result<GridAxis, String> {
        let factor = factor_index(name)?;
        Ok(GridAxis {
            factor,
            low: factors[factor].low,
            high: factors[factor].high,
            resolution: a.resolution,
        })
    };
    let spec = GridSpec {
        x_axis: axis(&a.x)?,
        y_axis: axis(&a.y)?,
        fixed,
        attrs: batch_attrs(&a.model.batch)?,
    };
    let grid = grid_scan(&models, &spec, &thresholds).map_err(|e| e.to_string())?;
    eprintln!("{} of {} nodes inside", grid.inside_count(), grid.nodes.len());
    emit(a.out.as_deref(), &grid.to_csv())
}

fn validate(a: ValidateArgs) -> CliResult {
    let models = load_models(&a.model.models)?;
    let thresholds = parse_thresholds(&a.thresholds)?;
    let params = params_from(&a.params)?;
    let mut plant = Plant::new(a.plant.config()).map_err(|e| e.to_string())?;
    let (row, _) = validate_solution(&mut plant, params, &a.model.batch, &models, &thresholds, &mut PlantLogs::default())
        .map_err(|e| e.to_string())?;
    emit(a.out.as_deref(), &validation_csv(&[row]))
}

fn campaign(a: CampaignArgs) -> CliResult {
    let config = load_config(a.config.as_deref())?;
    if a.print_config {
        print!("{}", config.to_json());
        return Ok(());
    }
    let out = a.out.expect("required by clap");
    if a.force {
        clear_output(&out).map_err(|e| format!("{}: {e}", out.display()))?;
    }
    let report = run_campaign(&config, config.plant_config(), &out).map_err(|e| e.to_string())?;
    for m in &report.models {
        println!("{}: {} terms, R² {:.4}", m.response_name, m.terms.len(), m.r_squared);
    }
    for o in &report.fronts {
        println!("{}: {} Pareto solutions (front size {})", o.batch_id, o.front.len(), o.full_size);
    }
    for v in &report.validations {
        println!("validation {}: {}", v.batch_id, if v.inside { "inside" } else { "outside" });
    }
    println!("artifacts written to {}", out.display());
    Ok(())
}

fn replicate(a: ReplicateArgs) -> CliResult {
    let (work, _guard) = match a.work_dir {
        Some(p) => {
            if p.exists() && fs::read_dir(&p).map_err(|e| e.to_string())?.next().is_some() {
                return Err(format!("{} is not empty", p.display()));
            }
            (p, None)
        }
        None => {
            let p = std::env::temp_dir().join(format!("chromflow-replicate-{}", std::process::id()));
            (p.clone(), Some(RemoveOnDrop(p)))
        }
    };
    let results = run_all(&ReplicateOptions::new(&work));
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.ok()).map(|r| r.id.to_string()).collect();
    if failed.is_empty() {
        println!("all hard criteria passed");
        Ok(())
    } else {
        Err(format!("failed criteria: {}", failed.join(", ")))
    }
}

struct RemoveOnDrop(PathBuf);

impl Drop for RemoveOnDrop {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Doe(a) => doe(a),
        Command::Run(a) => run(a),
        Command::Fit(a) => fit(a),
        Command::Optimize(a) => optimize_cmd(a),
        Command::Dspace(a) => dspace(a),
        Command::Validate(a) => validate(a),
        Command::Campaign(a) => campaign(a),
        Command::ReplicatePaper(a) => replicate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
