use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{Dataset, RegressionModel, RsmError, Term};

/// Smallest singular value of the column-normalized design, relative to the
/// largest, below which the columns are treated as collinear.
const RANK_TOL: f64 = 1e-9;

/// Residual sums of squares are floored at this fraction of the total sum of
/// squares, so that an exactly interpolated response has well-defined
/// (vanishing) test statistics instead of 0/0.
pub(crate) const SS_FLOOR: f64 = 1e-20;

pub(crate) fn centered_ss(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum()
}

pub(crate) fn r_squared(ss_res: f64, ss_tot: f64) -> f64 {
    if ss_tot <= 0.0 {
        return if ss_res <= 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

/// Least-squares solution with the pieces needed for inference.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub beta: Vec<f64>,
    pub ss_res: f64,
    pub ss_tot: f64,
    /// Diagonal of (XᵀX)⁻¹.
    pub inv_diag: Vec<f64>,
    pub n: usize,
}

impl LeastSquares {
    pub fn dof(&self) -> usize {
        self.n - self.beta.len()
    }

    /// Residual sum of squares with the numerical floor applied.
    pub fn ss_res_floored(&self) -> f64 {
        let scale = if self.ss_tot > 0.0 { self.ss_tot } else { 1.0 };
        self.ss_res.max(SS_FLOOR * scale)
    }

    /// Two-sided t-test p-value for every coefficient.
    pub fn p_values(&self) -> Vec<f64> {
        let dof = self.dof();
        if dof == 0 {
            return vec![f64::NAN; self.beta.len()];
        }
        let sigma2 = self.ss_res_floored() / dof as f64;
        let t_dist = StudentsT::new(0.0, 1.0, dof as f64).expect("positive dof");
        self.beta
            .iter()
            .zip(&self.inv_diag)
            .map(|(b, d)| {
                let se = (sigma2 * d).sqrt();
                let t = (b / se).abs();
                if t.is_finite() {
                    2.0 * t_dist.sf(t)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub(crate) fn solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares, RsmError> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(RsmError::InsufficientData { rows: n, terms: p });
    }
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&c| c == 0.0 || !c.is_finite()) {
        return Err(RsmError::RankDeficient(format!("column {j} is zero or non-finite")));
    }
    let mut scaled = x.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= norms[j];
    }
    let svd = scaled.svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.max();
    let s_min = s.min();
    if !(s_min > RANK_TOL * s_max) {
        return Err(RsmError::RankDeficient(format!(
            "condition {:.3e} of normalized columns",
            s_max / s_min
        )));
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let uty = u.transpose() * y;
    let mut beta = vec![0.0; p];
    let mut inv_diag = vec![0.0; p];
    for j in 0..p {
        let mut b = 0.0;
        let mut d = 0.0;
        for k in 0..p {
            let v = v_t[(k, j)];
            b += v * uty[k] / s[k];
            d += v * v / (s[k] * s[k]);
        }
        beta[j] = b / norms[j];
        inv_diag[j] = d / (norms[j] * norms[j]);
    }
    let fitted = x * DVector::from_column_slice(&beta);
    let ss_res = (y - fitted).norm_squared();
    let ss_tot = centered_ss(y.iter().copied());
    Ok(LeastSquares {
        beta,
        ss_res,
        ss_tot,
        inv_diag,
        n,
    })
}

/// Ordinary least squares on natural-unit term columns.
pub fn fit_least_squares(data: &Dataset, terms: &[Term]) -> Result<RegressionModel, RsmError> {
    let x = data.design_matrix(terms);
    let ls = solve(&x, &data.responses())?;
    let p_values = ls.p_values();
    Ok(RegressionModel {
        response_name: data.response_name.clone(),
        terms: terms.to_vec(),
        r_squared: r_squared(ls.ss_res, ls.ss_tot),
        residual_sd: (ls.ss_res / ls.dof() as f64).sqrt(),
        coefficients: ls.beta,
        p_values,
    })
}
