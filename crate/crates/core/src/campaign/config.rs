use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::case_study;
use crate::doe::AlphaMode;
use crate::dspace::ThresholdSpec;
use crate::params::{default_factors, FactorSpec, ProcessParams, N_PARAMS};
use crate::pareto::NsgaConfig;
use crate::plant::{NoiseLevels, PlantConfig};
use crate::rsm::{ColumnCoding, StepwiseOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignChoice {
    /// The case-study screening runs with their recorded batch assignment.
    Published,
    Dsd { dummy: usize, extra_centers: usize },
    BoxBehnken { centers: usize },
    CentralComposite { alpha: AlphaMode, centers: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepwiseConfig {
    pub p_enter: f64,
    pub p_remove: f64,
    /// Scale factors and covariates to [−1, 1] during selection.
    pub centered: bool,
    /// Number of material covariates offered as candidate terms (Z1 first).
    pub covariates: usize,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        Self {
            p_enter: 0.05,
            p_remove: 0.05,
            centered: true,
            covariates: 1,
        }
    }
}

impl StepwiseConfig {
    pub fn options(&self) -> StepwiseOptions {
        StepwiseOptions {
            p_enter: self.p_enter,
            p_remove: self.p_remove,
            coding: if self.centered {
                ColumnCoding::Centered
            } else {
                ColumnCoding::Natural
            },
            ..StepwiseOptions::default()
        }
    }
}

/// A 2-D design-space slice: two swept factors, the rest fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    pub name: String,
    pub batch_id: String,
    /// 0-based factor indices.
    pub x_factor: usize,
    pub y_factor: usize,
    pub fixed: ProcessParams,
    pub resolution: usize,
}

/// A point to run on the plant after optimization: explicit parameters, or
/// the 1-based index of a down-selected Pareto solution for the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationRequest {
    pub batch_id: String,
    #[serde(default)]
    pub params: Option<ProcessParams>,
    #[serde(default)]
    pub pareto_solution: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSettings {
    pub seed: u64,
    pub noise: NoiseLevels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema_version: u32,
    pub factors: Vec<FactorSpec>,
    pub design: DesignChoice,
    pub design_seed: u64,
    /// Shuffle run order with `design_seed` before allocation.
    pub randomize_order: bool,
    pub allocation_seed: u64,
    pub optimization_batches: Vec<String>,
    pub validation_batches: Vec<String>,
    /// Operating point used before any data exists.
    pub initial_conditions: ProcessParams,
    pub stepwise: StepwiseConfig,
    pub nsga: NsgaConfig,
    /// Batches to optimize for.
    pub pareto_batches: Vec<String>,
    /// Lower bounds on Y1..Y4 during optimization (`null` = unconstrained).
    pub objective_floors: [Option<f64>; 4],
    pub pareto_count: usize,
    /// Design-space thresholds on Y1..Y4.
    pub thresholds: [Option<f64>; 4],
    pub dspace_slices: Vec<SliceConfig>,
    pub validation: Vec<ValidationRequest>,
    pub plant: PlantSettings,
}

fn slice(name: &str, batch_id: &str, fixed: ProcessParams) -> SliceConfig {
    SliceConfig {
        name: name.into(),
        batch_id: batch_id.into(),
        x_factor: 2,
        y_factor: 3,
        fixed,
        resolution: 21,
    }
}

impl Default for CampaignConfig {
    /// The case-study campaign.
    fn default() -> Self {
        let points = case_study::validation_points();
        Self {
            schema_version: SCHEMA_VERSION,
            factors: default_factors(),
            design: DesignChoice::Published,
            design_seed: 7,
            randomize_order: false,
            allocation_seed: 7,
            optimization_batches: case_study::optimization_batches(),
            validation_batches: case_study::validation_batches(),
            initial_conditions: case_study::initial_conditions(),
            stepwise: StepwiseConfig::default(),
            nsga: NsgaConfig::default(),
            pareto_batches: vec!["250401".into(), "250409".into()],
            objective_floors: [Some(6.0), None, Some(24.0), None],
            pareto_count: 5,
            thresholds: case_study::design_space_thresholds().bounds(),
            dspace_slices: vec![
                slice("A_250401", "250401", ProcessParams::new(1.5, 2.0, 2.0, 1.0, 3.5, 0.86)),
                slice("B_250409", "250409", ProcessParams::new(1.5, 2.0, 2.0, 1.0, 3.5, 0.81)),
                slice("C_231201", "231201", ProcessParams::new(0.75, 1.0, 2.0, 1.0, 3.25, 0.5)),
            ],
            validation: points
                .iter()
                .map(|p| ValidationRequest {
                    batch_id: p.batch_id.into(),
                    params: Some(p.params),
                    pareto_solution: None,
                })
                .collect(),
            plant: PlantSettings {
                seed: 2024,
                noise: case_study::CALIBRATED_NOISE,
            },
        }
    }
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self, CampaignError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    /// Case-study plant with this config's seed and noise.
    pub fn plant_config(&self) -> PlantConfig {
        let mut plant = case_study::plant_config(self.plant.seed);
        plant.noise_rel_sd = self.plant.noise;
        plant
    }

    pub fn threshold_spec(&self) -> Result<ThresholdSpec, CampaignError> {
        Ok(ThresholdSpec::new(self.thresholds)?)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.factors.len() != N_PARAMS {
            return bad(format!("{N_PARAMS} factors required, got {}", self.factors.len()));
        }
        if self.factors.iter().any(|f| !(f.low.is_finite() && f.high.is_finite() && f.low < f.high)) {
            return bad("every factor needs finite low < high".into());
        }
        if self.design == DesignChoice::Published && self.factors != default_factors() {
            return bad("the published design requires the default factor ranges".into());
        }
        if self.optimization_batches.is_empty() {
            return bad("optimization_batches is empty".into());
        }
        let opt: BTreeSet<&String> = self.optimization_batches.iter().collect();
        if self.design == DesignChoice::Published
            && case_study::design_runs().iter().any(|r| !opt.contains(&r.batch_id.to_string()))
        {
            return bad("the published design needs its recorded batches among optimization_batches".into());
        }
        if let Some(b) = self.validation_batches.iter().find(|b| opt.contains(b)) {
            return bad(format!("batch {b} is both an optimization and a validation batch"));
        }
        if !(0.0 < self.stepwise.p_enter && self.stepwise.p_enter <= self.stepwise.p_remove && self.stepwise.p_remove < 1.0) {
            return bad("stepwise needs 0 < p_enter <= p_remove < 1".into());
        }
        if self.stepwise.covariates > 4 {
            return bad("at most 4 covariates".into());
        }
        if self.pareto_count == 0 {
            return bad("pareto_count must be positive".into());
        }
        self.nsga.validate()?;
        self.threshold_spec()?;
        for s in &self.dspace_slices {
            if s.x_factor >= N_PARAMS || s.y_factor >= N_PARAMS || s.x_factor == s.y_factor || s.resolution < 2 {
                return bad(format!("slice {}: invalid axes or resolution", s.name));
            }
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(format!("slice name {:?} must be [A-Za-z0-9_-]+", s.name));
            }
        }
        for v in &self.validation {
            match (v.params, v.pareto_solution) {
                (None, None) => return bad(format!("validation for {} needs params or pareto_solution", v.batch_id)),
                (None, Some(k)) if k == 0 || !self.pareto_batches.contains(&v.batch_id) => {
                    return bad(format!("pareto_solution {k} unavailable for batch {}", v.batch_id))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let c = CampaignConfig::default();
        assert_eq!(CampaignConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn overlapping_batches_rejected() {
        let mut c = CampaignConfig::default();
        c.validation_batches.push("250402".into());
        assert!(matches!(c.validate(), Err(CampaignError::Config(m)) if m.contains("250402")));
    }

    #[test]
    fn unknown_field_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&CampaignConfig::default().to_json()).unwrap();
        v["colour"] = serde_json::json!(1);
        assert!(CampaignConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn design_choice_json_shape() {
        let d: DesignChoice = serde_json::from_str(r#"{"kind":"dsd","dummy":2,"extra_centers":3}"#).unwrap();
        assert_eq!(d, DesignChoice::Dsd { dummy: 2, extra_centers: 3 });
        let p: DesignChoice = serde_json::from_str(r#"{"kind":"published"}"#).unwrap();
        assert_eq!(p, DesignChoice::Published);
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let c = CampaignConfig {
            schema_version: 9,
            ..CampaignConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
