//! Virtual chromatography rig.
//!
//! A discrete-time simulation of one column with feed pump P1, outlet pump P2,
//! nine valves and online sensors. Each experiment runs
//! Equilibrate → Load → Wash → Elute → Regenerate. Load, Wash and Elute are
//! timed by the process parameters; Equilibrate and Regenerate end when the
//! conductivity and UV signals stabilize. The liquid level above the bed is
//! held by a fuzzy controller acting on P2.
//!
//! Adsorption and breakthrough are not modeled. The collected fraction is
//! generated from latent response surfaces for TT purity, TT productivity and
//! FG purity with multiplicative noise; FG productivity follows from the
//! fraction masses.

mod fuzzy;
mod sensors;

pub use fuzzy::{fuzzify, fuzzy_control, rule_strengths, MAX_ADJUST};
pub use sensors::{measure, stabilization_detector, SensorFrame, SensorNoise, Signals};

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assay::{process_time, FractionRecord};
use crate::params::{MaterialAttributes, ProcessParams};
use crate::rsm::{predict, RegressionModel};

/// Highest P2 flow, BV/h.
const P2_MAX: f64 = 10.0;
/// Smoothing time constant of the level used by the controller, s.
const LEVEL_FILTER_TAU: f64 = 5.0;
/// Time after a phase change excluded from level-band statistics, s.
pub const LEVEL_TRANSIENT: f64 = 300.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("unknown batch {0}")]
    UnknownBatch(String),
    #[error("plant is busy and queueing is disabled")]
    PlantBusy,
    #[error("experiment {0} has not completed elution")]
    WrongPhase(u64),
    #[error("unknown experiment {0}")]
    UnknownExperiment(u64),
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("invalid plant config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Equilibrate,
    Load,
    Wash,
    Elute,
    Regenerate,
}

impl Phase {
    fn next(self) -> Phase {
        match self {
            Phase::Equilibrate => Phase::Load,
            Phase::Load => Phase::Wash,
            Phase::Wash => Phase::Elute,
            Phase::Elute => Phase::Regenerate,
            Phase::Regenerate | Phase::Idle => Phase::Idle,
        }
    }

    /// Open inlet valve (0-based V1..V5) for a running phase.
    fn inlet_valve(self) -> Option<usize> {
        match self {
            Phase::Idle => None,
            Phase::Equilibrate => Some(0),
            Phase::Load => Some(1),
            Phase::Wash => Some(2),
            Phase::Elute => Some(3),
            Phase::Regenerate => Some(4),
        }
    }
}

/// Latent surfaces for the three primitive responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthModels {
    pub tt_purity: RegressionModel,
    pub tt_productivity: RegressionModel,
    pub fg_purity: RegressionModel,
}

/// Relative σ of the multiplicative noise on each latent response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    pub tt_purity: f64,
    pub tt_productivity: f64,
    pub fg_purity: f64,
}

impl NoiseLevels {
    pub const ZERO: NoiseLevels = NoiseLevels {
        tt_purity: 0.0,
        tt_productivity: 0.0,
        fg_purity: 0.0,
    };

    /// Starting point before calibration.
    pub const NOMINAL: NoiseLevels = NoiseLevels {
        tt_purity: 0.07,
        tt_productivity: 0.08,
        fg_purity: 0.07,
    };

    fn as_array(&self) -> [f64; 3] {
        [self.tt_purity, self.fg_purity, self.tt_productivity]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    /// cm.
    pub column_inner_diameter: f64,
    /// cm.
    pub bed_height: f64,
    /// cm.
    pub column_height: f64,
    /// Liquid level above the bed, cm.
    pub level_setpoint: f64,
    /// BV/h.
    pub equil_flow: f64,
    /// BV/h.
    pub regen_flow: f64,
    pub batch_table: Vec<MaterialAttributes>,
    pub truth_models: TruthModels,
    pub noise_rel_sd: NoiseLevels,
    pub sensor_noise: SensorNoise,
    pub seed: u64,
    /// s.
    pub dt: f64,
    pub stabilization_threshold: f64,
    /// s.
    pub stabilization_window: f64,
    /// Equilibrate/Regenerate are forced to end after this long, s.
    pub max_phase_duration: f64,
    /// Interval between logged sensor frames, s.
    pub sensor_log_interval: f64,
    /// Accept submissions while running.
    pub queueing: bool,
    /// Wall-clock pacing (simulated s per real s); `None` runs unpaced.
    pub acceleration: Option<f64>,
}

impl PlantConfig {
    /// Default geometry and control settings around the given truth and batches.
    pub fn new(truth_models: TruthModels, batch_table: Vec<MaterialAttributes>) -> Self {
        Self {
            column_inner_diameter: 3.0,
            bed_height: 36.0,
            column_height: 45.6,
            level_setpoint: 3.0,
            equil_flow: 3.0,
            regen_flow: 3.0,
            batch_table,
            truth_models,
            noise_rel_sd: NoiseLevels::NOMINAL,
            sensor_noise: SensorNoise::default(),
            seed: 1,
            dt: 1.0,
            stabilization_threshold: 0.01,
            stabilization_window: 120.0,
            max_phase_duration: 6.0 * 3600.0,
            sensor_log_interval: 60.0,
            queueing: true,
            acceleration: None,
        }
    }

    /// Column cross-section, cm².
    pub fn cross_section(&self) -> f64 {
        PI * (self.column_inner_diameter / 2.0).powi(2)
    }

    /// mL.
    pub fn bed_volume(&self) -> f64 {
        self.cross_section() * self.bed_height
    }

    pub fn batch(&self, id: &str) -> Option<&MaterialAttributes> {
        self.batch_table.iter().find(|b| b.batch_id == id)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let bad = |m: &str| Err(PlantError::InvalidConfig(m.into()));
        let positive = [
            self.column_inner_diameter,
            self.bed_height,
            self.dt,
            self.equil_flow,
            self.regen_flow,
            self.stabilization_window,
            self.max_phase_duration,
            self.sensor_log_interval,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("geometry, flows, dt and durations must be positive");
        }
        if self.column_height <= self.bed_height + self.level_setpoint || self.level_setpoint <= 0.0 {
            return bad("level setpoint must lie between the bed and the column top");
        }
        if self.noise_rel_sd.as_array().iter().any(|v| !(*v >= 0.0)) {
            return bad("noise_rel_sd must be non-negative");
        }
        if self.stabilization_window / self.dt < 2.0 {
            return bad("stabilization window must span at least two samples");
        }
        if self.acceleration.is_some_and(|a| !(a > 0.0)) {
            return bad("acceleration must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: ProcessParams,
    pub batch_id: String,
    pub fraction_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub phase: Phase,
    /// s.
    pub sim_clock: f64,
    /// s.
    pub phase_elapsed: f64,
    /// cm above the bed.
    pub level: f64,
    /// BV/h.
    pub p1_flow: f64,
    /// BV/h.
    pub p2_flow: f64,
    /// V1..V9; V1–V5 are inlets, V6 waste, V7 fraction collector.
    pub valve_states: [bool; 9],
    pub current_experiment: Option<(u64, ExperimentSpec)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Completion {
    Timed,
    Stabilized,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlarmKind {
    LevelHigh,
    LevelLow,
    PhaseTimeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum PlantEvent {
    PhaseStarted {
        time: f64,
        experiment_id: u64,
        phase: Phase,
    },
    PhaseCompleted {
        time: f64,
        experiment_id: u64,
        phase: Phase,
        reason: Completion,
    },
    FractionReady {
        time: f64,
        experiment_id: u64,
        fraction_id: String,
    },
    ExperimentDone {
        time: f64,
        experiment_id: u64,
    },
    Alarm {
        time: f64,
        experiment_id: u64,
        kind: AlarmKind,
    },
}

/// Summary of one executed phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub experiment_id: u64,
    pub phase: Phase,
    pub start: f64,
    pub end: f64,
    pub reason: Completion,
    /// Largest |level − setpoint| after the initial transient, cm (0 if the phase was shorter).
    pub max_level_deviation: f64,
    pub inlet_flow: f64,
}

/// Sensor frame tagged with its experiment and phase, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedFrame {
    pub experiment_id: u64,
    pub phase: Phase,
    #[serde(flatten)]
    pub frame: SensorFrame,
}

/// Latent primitive responses at a point, in the order Y1, Y3, Y2.
pub fn latent_responses(truth: &TruthModels, params: &ProcessParams, attrs: &MaterialAttributes) -> [f64; 3] {
    [
        predict(&truth.tt_purity, params, attrs),
        predict(&truth.fg_purity, params, attrs),
        predict(&truth.tt_productivity, params, attrs),
    ]
}

/// Builds fraction masses from (possibly noisy) latent Y1, Y3, Y2.
///
/// Purities are clamped so that both targets fit in the solids and all
/// latents stay positive.
pub fn fraction_from_latents(
    params: &ProcessParams,
    batch_id: &str,
    latents: [f64; 3],
    bed_volume: f64,
) -> FractionRecord {
    const FLOOR: f64 = 1e-6;
    let y1 = latents[0].clamp(FLOOR, 100.0 - FLOOR);
    let y3 = latents[1].clamp(FLOOR, 100.0 - y1);
    let y2 = latents[2].max(FLOOR);
    let t = process_time(params);
    let m_tt = y2 * t;
    let m_ts = m_tt / (y1 / 100.0);
    let m_fg = m_ts * (y3 / 100.0);
    FractionRecord {
        m_tt_total: m_tt,
        m_fg_total: m_fg,
        m_ts_total: m_ts,
        volume: params.elution_flow * params.elution_time * bed_volume,
        process_time: t,
        batch_id: batch_id.to_string(),
        params: *params,
    }
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws multiplicative noise factors `1 + ε` for Y1, Y3, Y2.
pub fn noise_factors<R: rand::Rng + ?Sized>(noise: &NoiseLevels, rng: &mut R) -> [f64; 3] {
    noise.as_array().map(|sd| {
        let eps: f64 = if sd > 0.0 {
            Normal::new(0.0, sd).expect("finite sd").sample(rng)
        } else {
            0.0
        };
        1.0 + eps
    })
}

pub struct Plant {
    config: PlantConfig,
    state: PlantState,
    queue: VecDeque<(u64, ExperimentSpec)>,
    next_id: u64,
    sensor_rng: ChaCha8Rng,
    assay_rng: ChaCha8Rng,
    signals: Signals,
    frame: SensorFrame,
    smoothed_level: Option<f64>,
    cond_window: VecDeque<f64>,
    uv_window: VecDeque<f64>,
    window_len: usize,
    phase_start: f64,
    phase_deviation: f64,
    fractions: BTreeMap<u64, FractionRecord>,
    phase_log: Vec<PhaseRecord>,
    next_log_time: f64,
}

impl Plant {
    pub fn new(config: PlantConfig) -> Result<Self, PlantError> {
        config.validate()?;
        let signals = Signals::target(Phase::Regenerate);
        let level = config.level_setpoint;
        let window_len = (config.stabilization_window / config.dt).round() as usize;
        let mut sensor_rng = seeded(config.seed, 1);
        let frame = measure(0.0, &signals, level, &config.sensor_noise, &mut sensor_rng);
        Ok(Self {
            state: PlantState {
                phase: Phase::Idle,
                sim_clock: 0.0,
                phase_elapsed: 0.0,
                level,
                p1_flow: 0.0,
                p2_flow: 0.0,
                valve_states: [false; 9],
                current_experiment: None,
            },
            queue: VecDeque::new(),
            next_id: 1,
            sensor_rng,
            assay_rng: seeded(config.seed, 2),
            signals,
            frame,
            smoothed_level: None,
            cond_window: VecDeque::with_capacity(window_len + 1),
            uv_window: VecDeque::with_capacity(window_len + 1),
            window_len,
            phase_start: 0.0,
            phase_deviation: 0.0,
            fractions: BTreeMap::new(),
            phase_log: Vec::new(),
            next_log_time: 0.0,
            config,
        })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn last_frame(&self) -> &SensorFrame {
        &self.frame
    }

    pub fn phase_log(&self) -> &[PhaseRecord] {
        &self.phase_log
    }

    pub fn is_idle(&self) -> bool {
        self.state.phase == Phase::Idle && self.queue.is_empty()
    }

    pub fn submit_experiment(&mut self, spec: ExperimentSpec) -> Result<u64, PlantError> {
        if self.config.batch(&spec.batch_id).is_none() {
            return Err(PlantError::UnknownBatch(spec.batch_id));
        }
        if !spec.params.is_valid() || spec.params.to_array().iter().any(|v| *v <= 0.0) {
            return Err(PlantError::InvalidSpec("flows and times must be positive".into()));
        }
        if !self.config.queueing && !self.is_idle() {
            return Err(PlantError::PlantBusy);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.queue.push_back((id, spec));
        Ok(id)
    }

    /// Fraction of a finished elution.
    pub fn emit_fraction(&self, experiment_id: u64) -> Result<FractionRecord, PlantError> {
        if let Some(f) = self.fractions.get(&experiment_id) {
            return Ok(f.clone());
        }
        let known = experiment_id < self.next_id && experiment_id > 0;
        Err(if known {
            PlantError::WrongPhase(experiment_id)
        } else {
            PlantError::UnknownExperiment(experiment_id)
        })
    }

    fn inlet_flow(&self, phase: Phase) -> f64 {
        let p = self.state.current_experiment.as_ref().map(|(_, s)| s.params);
        match (phase, p) {
            (Phase::Equilibrate, _) => self.config.equil_flow,
            (Phase::Regenerate, _) => self.config.regen_flow,
            (Phase::Load, Some(p)) => p.feed_flow,
            (Phase::Wash, Some(p)) => p.wash_flow,
            (Phase::Elute, Some(p)) => p.elution_flow,
            _ => 0.0,
        }
    }

    /// Timed duration of a phase, s.
    fn scheduled_duration(&self, phase: Phase) -> Option<f64> {
        let p = self.state.current_experiment.as_ref()?.1.params;
        match phase {
            Phase::Load => Some(p.feed_time * 3600.0),
            Phase::Wash => Some(p.wash_time * 3600.0),
            Phase::Elute => Some(p.elution_time * 3600.0),
            _ => None,
        }
    }

    fn enter_phase(&mut self, phase: Phase, events: &mut Vec<PlantEvent>) {
        self.state.phase = phase;
        self.state.phase_elapsed = 0.0;
        self.phase_start = self.state.sim_clock;
        self.phase_deviation = 0.0;
        self.cond_window.clear();
        self.uv_window.clear();
        self.state.valve_states = [false; 9];
        if let Some(v) = phase.inlet_valve() {
            self.state.valve_states[v] = true;
            self.state.valve_states[if phase == Phase::Elute { 6 } else { 5 }] = true;
        }
        self.state.p1_flow = self.inlet_flow(phase);
        if let (Some((id, _)), true) = (&self.state.current_experiment, phase != Phase::Idle) {
            events.push(PlantEvent::PhaseStarted {
                time: self.state.sim_clock,
                experiment_id: *id,
                phase,
            });
        }
    }

    fn finish_phase(&mut self, reason: Completion, events: &mut Vec<PlantEvent>) {
        let phase = self.state.phase;
        let (id, spec) = self.state.current_experiment.clone().expect("running experiment");
        let time = self.state.sim_clock;
        self.phase_log.push(PhaseRecord {
            experiment_id: id,
            phase,
            start: self.phase_start,
            end: time,
            reason,
            max_level_deviation: self.phase_deviation,
            inlet_flow: self.state.p1_flow,
        });
        if reason == Completion::Timeout {
            events.push(PlantEvent::Alarm {
                time,
                experiment_id: id,
                kind: AlarmKind::PhaseTimeout,
            });
        }
        events.push(PlantEvent::PhaseCompleted {
            time,
            experiment_id: id,
            phase,
            reason,
        });
        if phase == Phase::Elute {
            let attrs = self.config.batch(&spec.batch_id).expect("batch checked on submit");
            let latent = latent_responses(&self.config.truth_models, &spec.params, attrs);
            let factors = noise_factors(&self.config.noise_rel_sd, &mut self.assay_rng);
            let noisy = std::array::from_fn(|k| latent[k] * factors[k]);
            let fraction = fraction_from_latents(&spec.params, &spec.batch_id, noisy, self.config.bed_volume());
            self.fractions.insert(id, fraction);
            events.push(PlantEvent::FractionReady {
                time,
                experiment_id: id,
                fraction_id: spec.fraction_id.clone(),
            });
        }
        let next = phase.next();
        if next == Phase::Idle {
            events.push(PlantEvent::ExperimentDone { time, experiment_id: id });
            self.enter_phase(Phase::Idle, events);
            self.state.current_experiment = None;
        } else {
            self.enter_phase(next, events);
        }
    }

    /// Advances the simulation by `dt` seconds.
    pub fn step(&mut self, dt: f64) -> Vec<PlantEvent> {
        assert!(dt > 0.0, "dt must be positive");
        let mut events = Vec::new();
        if self.state.phase == Phase::Idle {
            if let Some(next) = self.queue.pop_front() {
                self.state.current_experiment = Some(next);
                self.enter_phase(Phase::Equilibrate, &mut events);
            }
        }
        let running = self.state.phase != Phase::Idle;
        let area = self.config.cross_section();
        let to_cm_per_s = self.config.bed_volume() / 3600.0 / area;
        let max_level = self.config.column_height - self.config.bed_height;
        let id = self.state.current_experiment.as_ref().map_or(0, |(id, _)| *id);

        self.state.level += (self.state.p1_flow - self.state.p2_flow) * to_cm_per_s * dt;
        if self.state.level > max_level {
            self.state.level = max_level;
            events.push(PlantEvent::Alarm {
                time: self.state.sim_clock,
                experiment_id: id,
                kind: AlarmKind::LevelHigh,
            });
        } else if self.state.level < 0.0 {
            self.state.level = 0.0;
            events.push(PlantEvent::Alarm {
                time: self.state.sim_clock,
                experiment_id: id,
                kind: AlarmKind::LevelLow,
            });
        }

        if self.state.p1_flow > 0.0 {
            let tau = 3600.0 / self.state.p1_flow;
            let target = Signals::target(self.state.phase);
            self.signals.relax(&target, dt, tau);
        }
        self.state.sim_clock += dt;
        self.state.phase_elapsed += dt;
        self.frame = measure(
            self.state.sim_clock,
            &self.signals,
            self.state.level,
            &self.config.sensor_noise,
            &mut self.sensor_rng,
        );

        if running {
            let alpha = dt / (dt + LEVEL_FILTER_TAU);
            let prev = self.smoothed_level.unwrap_or(self.frame.level);
            let smoothed = prev + alpha * (self.frame.level - prev);
            self.smoothed_level = Some(smoothed);
            let rate = (smoothed - prev) / dt;
            let adjust = fuzzy_control(smoothed - self.config.level_setpoint, rate);
            self.state.p2_flow = (self.state.p2_flow + adjust).clamp(0.0, P2_MAX);
        } else {
            self.state.p2_flow = 0.0;
        }

        if running {
            if self.state.phase_elapsed > LEVEL_TRANSIENT {
                let dev = (self.state.level - self.config.level_setpoint).abs();
                self.phase_deviation = self.phase_deviation.max(dev);
            }
            for (w, v) in [
                (&mut self.cond_window, self.frame.conductivity),
                (&mut self.uv_window, self.frame.uv_absorbance),
            ] {
                w.push_back(v);
                if w.len() > self.window_len {
                    w.pop_front();
                }
            }
            let phase = self.state.phase;
            let completion = match self.scheduled_duration(phase) {
                Some(d) => (self.state.phase_elapsed >= d - 1e-9).then_some(Completion::Timed),
                None => {
                    let thr = self.config.stabilization_threshold;
                    let stable = stabilization_detector(self.cond_window.make_contiguous(), thr, self.window_len)
                        && stabilization_detector(self.uv_window.make_contiguous(), thr, self.window_len);
                    if stable {
                        Some(Completion::Stabilized)
                    } else if self.state.phase_elapsed >= self.config.max_phase_duration {
                        Some(Completion::Timeout)
                    } else {
                        None
                    }
                }
            };
            if let Some(reason) = completion {
                self.finish_phase(reason, &mut events);
            }
        }
        events
    }

    fn tagged_frame(&self) -> TaggedFrame {
        TaggedFrame {
            experiment_id: self.state.current_experiment.as_ref().map_or(0, |(id, _)| *id),
            phase: self.state.phase,
            frame: self.frame,
        }
    }

    /// Steps until every queued experiment has finished, reporting events and
    /// sensor frames at the configured log interval.
    pub fn run_until_idle(&mut self, mut on_event: impl FnMut(&PlantEvent), mut on_frame: impl FnMut(&TaggedFrame)) {
        let dt = self.config.dt;
        while !self.is_idle() {
            let started = std::time::Instant::now();
            let logging_phase = self.state.phase;
            let tagged_before = (self.state.current_experiment.as_ref().map(|(id, _)| *id), logging_phase);
            let events = self.step(dt);
            if self.state.sim_clock + 1e-9 >= self.next_log_time {
                let mut tagged = self.tagged_frame();
                if let (Some(id), phase) = tagged_before {
                    tagged.experiment_id = id;
                    if tagged.phase == Phase::Idle {
                        tagged.phase = phase;
                    }
                }
                on_frame(&tagged);
                self.next_log_time += self.config.sensor_log_interval;
                while self.next_log_time <= self.state.sim_clock {
                    self.next_log_time += self.config.sensor_log_interval;
                }
            }
            for e in &events {
                on_event(e);
            }
            if let Some(a) = self.config.acceleration {
                let target = std::time::Duration::from_secs_f64(dt / a);
                if let Some(rest) = target.checked_sub(started.elapsed()) {
                    std::thread::sleep(rest);
                }
            }
        }
    }
}

/// Serializes each item as one JSON line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests;
