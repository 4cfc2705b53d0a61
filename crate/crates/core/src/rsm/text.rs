//! Plain-text model documents:
//!
//! ```text
//! response = Y1
//! r_squared = 0.854188
//! residual_sd = 0.912
//! term,coefficient,p_value
//! Intercept,3.14672,0.0012
//! Z1,-10.7896,0.04
//! ```

use super::{RegressionModel, RsmError, Term};
use crate::params::fmt_sig;

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        fmt_sig(v, 6)
    }
}

fn parse_opt(s: &str) -> Result<f64, RsmError> {
    if s == "NA" {
        return Ok(f64::NAN);
    }
    s.parse()
        .map_err(|_| RsmError::Parse(format!("bad number {s:?}")))
}

impl RegressionModel {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "response = {}\nr_squared = {}\nresidual_sd = {}\nterm,coefficient,p_value\n",
            self.response_name,
            fmt_opt(self.r_squared),
            fmt_opt(self.residual_sd)
        );
        for ((t, c), p) in self.terms.iter().zip(&self.coefficients).zip(&self.p_values) {
            out.push_str(&format!("{t},{},{}\n", fmt_sig(*c, 6), fmt_opt(*p)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RsmError> {
        let err = |m: &str| RsmError::Parse(m.to_string());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut header = |key: &str| -> Result<String, RsmError> {
            let line = lines.next().ok_or_else(|| err("truncated document"))?;
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| RsmError::Parse(format!("expected `{key} = …`, got {line:?}")))?;
            if k.trim() != key {
                return Err(RsmError::Parse(format!("expected key {key}, got {:?}", k.trim())));
            }
            Ok(v.trim().to_string())
        };
        let response_name = header("response")?;
        let r_squared = parse_opt(&header("r_squared")?)?;
        let residual_sd = parse_opt(&header("residual_sd")?)?;
        if lines.next() != Some("term,coefficient,p_value") {
            return Err(err("missing term table header"));
        }
        let (mut terms, mut coefficients, mut p_values) = (Vec::new(), Vec::new(), Vec::new());
        for line in lines {
            let mut cells = line.split(',');
            let (Some(t), Some(c), Some(p), None) = (cells.next(), cells.next(), cells.next(), cells.next()) else {
                return Err(RsmError::Parse(format!("bad term row {line:?}")));
            };
            let term: Term = t.parse().map_err(|e: super::ParseTermError| RsmError::Parse(e.to_string()))?;
            if terms.contains(&term) {
                return Err(RsmError::Parse(format!("duplicate term {term}")));
            }
            terms.push(term);
            coefficients.push(parse_opt(c)?);
            p_values.push(parse_opt(p)?);
        }
        if terms.is_empty() {
            return Err(err("model has no terms"));
        }
        Ok(Self {
            response_name,
            terms,
            coefficients,
            r_squared,
            p_values,
            residual_sd,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = RegressionModel {
            response_name: "Y2".into(),
            terms: vec![Term::Intercept, Term::Interaction(0, 4), Term::Quadratic(3), Term::Covariate(0)],
            coefficients: vec![32.8842, 17.5758, -0.125, -10.7425],
            r_squared: 0.8377,
            p_values: vec![0.001, 0.02, f64::NAN, 1e-7],
            residual_sd: 7.25,
        };
        let text = m.to_text();
        assert!(text.contains("X1*X5,17.5758,0.02\n"));
        assert!(text.contains("X4^2,-0.125,NA\n"));
        let back = RegressionModel::from_text(&text).unwrap();
        assert_eq!(back.terms, m.terms);
        assert_eq!(back.coefficients, m.coefficients);
        assert_eq!(back.r_squared, 0.8377);
        assert!(back.p_values[2].is_nan());
    }

    #[test]
    fn rejects_malformed() {
        assert!(RegressionModel::from_text("").is_err());
        assert!(RegressionModel::from_text("response = Y1\nr_squared = 1\nresidual_sd = 0\nterm,coefficient,p_value\n").is_err());
        assert!(RegressionModel::from_text("response = Y1\nr_squared = 1\nresidual_sd = 0\nterm,coefficient,p_value\nW1,1,1\n").is_err());
    }
}
