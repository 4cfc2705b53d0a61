//! Second-order response-surface models with linear material covariates.
//!
//! `Y = b0 + Σ bi·Xi + Σ bii·Xi² + Σ bij·Xi·Xj + Σ ck·Zk`, selected by
//! bidirectional stepwise regression and fitted by ordinary least squares,
//! all in natural units.

mod ols;
mod stepwise;
mod term;
mod text;

pub use ols::fit_least_squares;
pub use stepwise::{stepwise_select, stepwise_select_with, ColumnCoding, StepwiseOptions};
pub use term::{candidate_terms, ParseTermError, Term};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{MaterialAttributes, ProcessParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RsmError {
    #[error("design matrix is rank deficient ({0})")]
    RankDeficient(String),
    #[error("insufficient data: {rows} rows for {terms} terms")]
    InsufficientData { rows: usize, terms: usize },
    #[error("candidate terms must include the intercept")]
    MissingIntercept,
    #[error("model text: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub params: ProcessParams,
    pub attrs: MaterialAttributes,
    pub response: f64,
}

/// Observed values of one response across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub response_name: String,
    pub rows: Vec<Observation>,
}

impl Dataset {
    pub fn new(response_name: impl Into<String>, rows: Vec<Observation>) -> Self {
        Self {
            response_name: response_name.into(),
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn responses(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.response))
    }

    pub(crate) fn design_matrix(&self, terms: &[Term]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), terms.len(), |i, j| {
            let row = &self.rows[i];
            terms[j].value(&row.params.to_array(), &row.attrs.covariates())
        })
    }
}

/// A fitted response model; coefficients act on natural-unit term values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub response_name: String,
    pub terms: Vec<Term>,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub p_values: Vec<f64>,
    pub residual_sd: f64,
}

impl RegressionModel {
    /// A model with given coefficients and no fit statistics.
    pub fn from_coefficients(response_name: impl Into<String>, terms: Vec<(Term, f64)>) -> Self {
        let n = terms.len();
        let (terms, coefficients) = terms.into_iter().unzip();
        Self {
            response_name: response_name.into(),
            terms,
            coefficients,
            r_squared: f64::NAN,
            p_values: vec![f64::NAN; n],
            residual_sd: f64::NAN,
        }
    }

    pub fn coefficient(&self, term: Term) -> Option<f64> {
        self.terms
            .iter()
            .position(|t| *t == term)
            .map(|i| self.coefficients[i])
    }

    pub fn predict_raw(&self, x: &[f64], z: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| c * t.value(x, z))
            .sum()
    }
}

pub fn predict(model: &RegressionModel, params: &ProcessParams, attrs: &MaterialAttributes) -> f64 {
    model.predict_raw(&params.to_array(), &attrs.covariates())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub observed: f64,
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub response_name: String,
    pub rows: Vec<DiagnosticRow>,
    pub r_squared: f64,
    pub residual_sd: f64,
}

/// Observed vs predicted for every row of `data`.
pub fn diagnostics(model: &RegressionModel, data: &Dataset) -> DiagnosticsReport {
    let rows: Vec<DiagnosticRow> = data
        .rows
        .iter()
        .map(|o| {
            let predicted = predict(model, &o.params, &o.attrs);
            DiagnosticRow {
                observed: o.response,
                predicted,
                residual: o.response - predicted,
            }
        })
        .collect();
    let ss_res: f64 = rows.iter().map(|r| r.residual * r.residual).sum();
    let ss_tot = ols::centered_ss(data.rows.iter().map(|o| o.response));
    let dof = data.len().saturating_sub(model.terms.len()).max(1);
    DiagnosticsReport {
        response_name: data.response_name.clone(),
        rows,
        r_squared: ols::r_squared(ss_res, ss_tot),
        residual_sd: (ss_res / dof as f64).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn attrs() -> MaterialAttributes {
        MaterialAttributes::new("250401", 0.5835, 1.01, 1.85, 3.21)
    }

    fn y1_reference() -> RegressionModel {
        RegressionModel::from_coefficients(
            "Y1",
            vec![
                (Term::Intercept, 3.1167),
                (Term::Covariate(0), -10.7425),
                (Term::Main(0), 0.7026),
                (Term::Main(2), 1.8364),
                (Term::Main(3), 3.9301),
            ],
        )
    }

    #[test]
    fn predict_is_direct_substitution() {
        let p = ProcessParams::new(1.5, 2.0, 2.5, 1.095, 3.5, 0.86);
        let y = predict(&y1_reference(), &p, &attrs());
        assert!((y - 6.80).abs() < 0.02, "{y}");
    }

    #[test]
    fn diagnostics_of_exact_model() {
        let model = y1_reference();
        let rows = (0..6)
            .map(|i| {
                let p = ProcessParams::new(0.5 + 0.2 * i as f64, 1.0, 1.5 + 0.1 * i as f64, 0.5 + 0.15 * (i % 3) as f64, 3.0, 1.0);
                Observation {
                    response: predict(&model, &p, &attrs()),
                    params: p,
                    attrs: attrs(),
                }
            })
            .collect();
        let data = Dataset::new("Y1", rows);
        let d = diagnostics(&model, &data);
        assert!(d.rows.iter().all(|r| r.residual.abs() < 1e-12));
        assert!((d.r_squared - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn predict_linear_in_coefficients(
            a in prop::collection::vec(-10.0f64..10.0, 5),
            b in prop::collection::vec(-10.0f64..10.0, 5),
            alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
            x4 in 0.5f64..1.5,
        ) {
            let terms = y1_reference().terms;
            let make = |c: &[f64]| RegressionModel::from_coefficients("Y", terms.iter().copied().zip(c.iter().copied()).collect());
            let mix: Vec<f64> = a.iter().zip(&b).map(|(p, q)| alpha * p + beta * q).collect();
            let p = ProcessParams::new(1.0, 1.5, 2.0, x4, 3.0, 1.0);
            let lhs = predict(&make(&mix), &p, &attrs());
            let rhs = alpha * predict(&make(&a), &p, &attrs()) + beta * predict(&make(&b), &p, &attrs());
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
