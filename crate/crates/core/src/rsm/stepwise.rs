use std::collections::BTreeSet;

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::ols::{solve, LeastSquares};
use super::{Dataset, Observation, RsmError, Term};
use crate::params::{MaterialAttributes, ProcessParams, N_ATTRS, N_PARAMS};

/// Scale of the columns seen by the selection (final fits are always natural).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnCoding {
    /// Raw parameter and covariate values.
    #[default]
    Natural,
    /// Each factor and covariate mapped to [−1, 1] over its observed range
    /// before forming squares and products.
    Centered,
}

/// Thresholds for bidirectional stepwise selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepwiseOptions {
    pub p_enter: f64,
    pub p_remove: f64,
    /// A candidate may only enter while this many residual degrees of freedom remain.
    pub min_residual_dof: usize,
    pub coding: ColumnCoding,
}

impl Default for StepwiseOptions {
    fn default() -> Self {
        Self {
            p_enter: 0.05,
            p_remove: 0.05,
            min_residual_dof: 2,
            coding: ColumnCoding::Natural,
        }
    }
}

fn code(value: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (2.0 * value - lo - hi) / (hi - lo)
    } else {
        0.0
    }
}

/// Copy of `data` with every factor and covariate coded over its observed range.
fn centered(data: &Dataset) -> Dataset {
    let range = |f: &dyn Fn(&Observation) -> f64| {
        data.rows
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let x_ranges: [(f64, f64); N_PARAMS] = std::array::from_fn(|i| range(&|o| o.params.get(i)));
    let z_ranges: [(f64, f64); N_ATTRS] = std::array::from_fn(|k| range(&|o| o.attrs.covariates()[k]));
    let rows = data
        .rows
        .iter()
        .map(|o| {
            let x = o.params.to_array();
            let z = o.attrs.covariates();
            let zc: [f64; N_ATTRS] = std::array::from_fn(|k| code(z[k], z_ranges[k].0, z_ranges[k].1));
            Observation {
                params: ProcessParams::from_array(std::array::from_fn(|i| code(x[i], x_ranges[i].0, x_ranges[i].1))),
                attrs: MaterialAttributes::new(o.attrs.batch_id.clone(), zc[0], zc[1], zc[2], zc[3]),
                response: o.response,
            }
        })
        .collect();
    Dataset::new(data.response_name.clone(), rows)
}

fn fit(data: &Dataset, terms: &BTreeSet<Term>) -> Result<LeastSquares, RsmError> {
    let terms: Vec<Term> = terms.iter().copied().collect();
    solve(&data.design_matrix(&terms), &data.responses())
}

fn entry_p_value(before: &LeastSquares, after: &LeastSquares) -> f64 {
    let dof = after.dof();
    let gain = (before.ss_res - after.ss_res).max(0.0);
    let f = gain / (after.ss_res_floored() / dof as f64);
    let dist = FisherSnedecor::new(1.0, dof as f64).expect("positive dof");
    dist.sf(f)
}

/// Bidirectional stepwise selection on natural-unit columns.
///
/// Each round adds the candidate with the smallest partial-F p-value below
/// `p_enter`, then drops the included term (never the intercept) with the
/// largest t-test p-value above `p_remove`. Ties go to the earlier term in
/// canonical order. Candidates that would make the active design matrix
/// singular are skipped. Stops when a round changes nothing or an active set
/// repeats. The result is in canonical order. Columns are natural-unit.
pub fn stepwise_select(
    data: &Dataset,
    candidates: &[Term],
    p_enter: f64,
    p_remove: f64,
) -> Result<Vec<Term>, RsmError> {
    stepwise_select_with(
        data,
        candidates,
        StepwiseOptions {
            p_enter,
            p_remove,
            ..StepwiseOptions::default()
        },
    )
}

pub fn stepwise_select_with(
    data: &Dataset,
    candidates: &[Term],
    opts: StepwiseOptions,
) -> Result<Vec<Term>, RsmError> {
    if !candidates.contains(&Term::Intercept) {
        return Err(RsmError::MissingIntercept);
    }
    let coded;
    let data = match opts.coding {
        ColumnCoding::Natural => data,
        ColumnCoding::Centered => {
            coded = centered(data);
            &coded
        }
    };
    let n = data.len();
    if n < 1 + opts.min_residual_dof {
        return Err(RsmError::InsufficientData { rows: n, terms: 1 });
    }
    let pool: BTreeSet<Term> = candidates.iter().copied().collect();
    let mut active: BTreeSet<Term> = BTreeSet::from([Term::Intercept]);
    let mut seen: BTreeSet<Vec<Term>> = BTreeSet::new();
    seen.insert(active.iter().copied().collect());
    let mut current = fit(data, &active)?;

    loop {
        let mut changed = false;

        if n >= active.len() + 1 + opts.min_residual_dof {
            let mut best: Option<(f64, Term, LeastSquares)> = None;
            for &term in pool.difference(&active) {
                let mut trial = active.clone();
                trial.insert(term);
                let Ok(ls) = fit(data, &trial) else { continue };
                let p = entry_p_value(&current, &ls);
                if best.as_ref().is_none_or(|(bp, _, _)| p < *bp) {
                    best = Some((p, term, ls));
                }
            }
            if let Some((p, term, ls)) = best {
                if p < opts.p_enter {
                    active.insert(term);
                    current = ls;
                    changed = true;
                }
            }
        }

        let p_values = current.p_values();
        let worst = active
            .iter()
            .zip(&p_values)
            .filter(|(t, _)| **t != Term::Intercept)
            .fold(None::<(Term, f64)>, |acc, (&t, &p)| match acc {
                Some((_, bp)) if p <= bp => acc,
                _ => Some((t, p)),
            });
        if let Some((term, p)) = worst {
            if p > opts.p_remove {
                active.remove(&term);
                current = fit(data, &active)?;
                changed = true;
            }
        }

        if !changed || !seen.insert(active.iter().copied().collect()) {
            break;
        }
    }
    Ok(active.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{MaterialAttributes, ProcessParams};
    use crate::rsm::{candidate_terms, Observation};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sample(n: usize, seed: u64, noise: f64, f: impl Fn(&[f64; 6], f64) -> f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let rows = (0..n)
            .map(|i| {
                let x: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.5..1.5));
                let z = rng.random_range(0.45..0.65);
                Observation {
                    response: f(&x, z) + noise * normal.sample(&mut rng),
                    params: ProcessParams::from_array(x),
                    attrs: MaterialAttributes::new(format!("b{i}"), z, 1.0, 1.8, 3.2),
                }
            })
            .collect();
        Dataset::new("Y", rows)
    }

    #[test]
    fn recovers_known_three_term_model() {
        let data = sample(30, 5, 0.0, |x, z| 1.0 + 4.0 * x[3] - 2.0 * x[0] * x[4] + 6.0 * z);
        let sel = stepwise_select(&data, &candidate_terms(6, 1), 0.05, 0.05).unwrap();
        for t in [Term::Main(3), Term::Interaction(0, 4), Term::Covariate(0)] {
            assert!(sel.contains(&t), "{t} missing from {sel:?}");
        }
    }

    #[test]
    fn pure_noise_selects_intercept_only() {
        let data = sample(20, 42, 1.0, |_, _| 10.0);
        let sel = stepwise_select(&data, &candidate_terms(6, 1), 0.05, 0.05).unwrap();
        assert_eq!(sel, vec![Term::Intercept]);
    }

    #[test]
    fn row_order_does_not_matter() {
        let data = sample(25, 9, 0.3, |x, z| 1.0 + 2.0 * x[1] + 3.0 * x[2] * x[2] - 5.0 * z);
        let sel = stepwise_select(&data, &candidate_terms(6, 1), 0.05, 0.05).unwrap();
        let mut shuffled = data.clone();
        shuffled.rows.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(stepwise_select(&shuffled, &candidate_terms(6, 1), 0.05, 0.05).unwrap(), sel);
    }

    #[test]
    fn intercept_required() {
        let data = sample(10, 1, 0.1, |x, _| x[0]);
        assert_eq!(
            stepwise_select(&data, &[Term::Main(0)], 0.05, 0.05),
            Err(RsmError::MissingIntercept)
        );
    }

    #[test]
    fn leaves_residual_degrees_of_freedom() {
        let data = sample(8, 3, 0.0, |x, _| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum());
        let sel = stepwise_select(&data, &candidate_terms(6, 1), 0.05, 0.05).unwrap();
        assert!(sel.len() + 2 <= data.len());
    }
}
