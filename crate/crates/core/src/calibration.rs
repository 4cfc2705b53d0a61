//! Calibrates plant noise so that refitting simulated screening data
//! reproduces target R² values.
//!
//! For each primitive response the relative σ is bisected until the mean R²
//! of an OLS refit (fixed term set) over `replicates` noisy copies of the
//! design matches the target. Common random numbers keep the mean monotone
//! in σ.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::params::{MaterialAttributes, ProcessParams};
use crate::plant::{latent_responses, NoiseLevels, TruthModels};
use crate::rsm::{fit_least_squares, Dataset, Observation, RsmError, Term};

/// Index of a primitive response in latent order (Y1, Y3, Y2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    TtPurity = 0,
    FgPurity = 1,
    TtProductivity = 2,
}

pub struct CalibrationProblem<'a> {
    pub truth: &'a TruthModels,
    pub runs: &'a [(ProcessParams, MaterialAttributes)],
    pub replicates: usize,
    pub seed: u64,
}

impl CalibrationProblem<'_> {
    /// Standard-normal draws shared by every σ, `[replicate][run]`.
    fn draws(&self, which: Primitive) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(which as u64);
        (0..self.replicates)
            .map(|_| self.runs.iter().map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    fn mean_r_squared(&self, which: Primitive, terms: &[Term], sd: f64, draws: &[Vec<f64>]) -> Result<f64, RsmError> {
        let latent: Vec<f64> = self
            .runs
            .iter()
            .map(|(p, a)| latent_responses(self.truth, p, a)[which as usize])
            .collect();
        let mut total = 0.0;
        for z in draws {
            let rows = self
                .runs
                .iter()
                .zip(&latent)
                .zip(z)
                .map(|(((p, a), y), e)| Observation {
                    params: *p,
                    attrs: a.clone(),
                    response: y * (1.0 + sd * e),
                })
                .collect();
            total += fit_least_squares(&Dataset::new("Y", rows), terms)?.r_squared;
        }
        Ok(total / draws.len() as f64)
    }

    /// Mean refit R² at relative noise `sd`.
    pub fn refit_r_squared(&self, which: Primitive, terms: &[Term], sd: f64) -> Result<f64, RsmError> {
        self.mean_r_squared(which, terms, sd, &self.draws(which))
    }

    /// σ whose mean refit R² equals `target` (bisection on `[0, 1]`).
    pub fn solve(&self, which: Primitive, terms: &[Term], target: f64) -> Result<f64, RsmError> {
        let draws = self.draws(which);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if self.mean_r_squared(which, terms, mid, &draws)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Calibrates all three primitives; `terms` and `targets` are in Y1, Y3, Y2 order.
    pub fn calibrate(&self, terms: [&[Term]; 3], targets: [f64; 3]) -> Result<NoiseLevels, RsmError> {
        Ok(NoiseLevels {
            tt_purity: self.solve(Primitive::TtPurity, terms[0], targets[0])?,
            fg_purity: self.solve(Primitive::FgPurity, terms[1], targets[1])?,
            tt_productivity: self.solve(Primitive::TtProductivity, terms[2], targets[2])?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_study::{batch, design_runs, reference_models, truth_models, CALIBRATED_NOISE};

    fn runs() -> Vec<(ProcessParams, MaterialAttributes)> {
        design_runs()
            .iter()
            .map(|r| (r.params, batch(r.batch_id).unwrap()))
            .collect()
    }

    #[test]
    fn zero_noise_is_perfect() {
        let truth = truth_models();
        let runs = runs();
        let p = CalibrationProblem { truth: &truth, runs: &runs, replicates: 3, seed: 1 };
        let r2 = p.refit_r_squared(Primitive::FgPurity, &truth.fg_purity.terms, 0.0).unwrap();
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibrated_constants_hit_published_r_squared() {
        let truth = truth_models();
        let runs = runs();
        let refs = reference_models();
        let p = CalibrationProblem { truth: &truth, runs: &runs, replicates: 200, seed: 7 };
        let cases = [
            (Primitive::TtPurity, &refs[0], CALIBRATED_NOISE.tt_purity),
            (Primitive::TtProductivity, &refs[1], CALIBRATED_NOISE.tt_productivity),
            (Primitive::FgPurity, &refs[2], CALIBRATED_NOISE.fg_purity),
        ];
        for (which, model, sd) in cases {
            let r2 = p.refit_r_squared(which, &model.terms, sd).unwrap();
            assert!((r2 - model.r_squared).abs() <= 0.05, "{which:?}: {r2} vs {}", model.r_squared);
        }
    }

    #[test]
    fn bisection_recovers_target() {
        let truth = truth_models();
        let runs = runs();
        let p = CalibrationProblem { truth: &truth, runs: &runs, replicates: 50, seed: 3 };
        let terms = &truth.tt_purity.terms;
        let sd = p.solve(Primitive::TtPurity, terms, 0.9).unwrap();
        let r2 = p.refit_r_squared(Primitive::TtPurity, terms, sd).unwrap();
        assert!((r2 - 0.9).abs() < 1e-4);
    }
}
