use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One column of the second-order model with covariates.
///
/// Indices are 0-based; labels are 1-based (`Main(0)` prints as `X1`).
/// The derived ordering is the canonical term order: intercept, mains,
/// quadratics, interactions (lexicographic), covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Intercept,
    Main(usize),
    Quadratic(usize),
    Interaction(usize, usize),
    Covariate(usize),
}

impl Term {
    /// Builds an interaction with its indices put in order; `None` if `i == j`.
    pub fn interaction(i: usize, j: usize) -> Option<Self> {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => Some(Term::Interaction(i, j)),
            std::cmp::Ordering::Greater => Some(Term::Interaction(j, i)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            Term::Intercept => 1.0,
            Term::Main(i) => x[i],
            Term::Quadratic(i) => x[i] * x[i],
            Term::Interaction(i, j) => x[i] * x[j],
            Term::Covariate(k) => z[k],
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Term::Intercept => write!(f, "Intercept"),
            Term::Main(i) => write!(f, "X{}", i + 1),
            Term::Quadratic(i) => write!(f, "X{}^2", i + 1),
            Term::Interaction(i, j) => write!(f, "X{}*X{}", i + 1, j + 1),
            Term::Covariate(k) => write!(f, "Z{}", k + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse term {0:?}")]
pub struct ParseTermError(pub String);

fn index(s: &str, prefix: char) -> Option<usize> {
    let n: usize = s.strip_prefix(prefix)?.parse().ok()?;
    n.checked_sub(1)
}

impl FromStr for Term {
    type Err = ParseTermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || ParseTermError(s.to_string());
        if s.eq_ignore_ascii_case("intercept") {
            return Ok(Term::Intercept);
        }
        if let Some(base) = s.strip_suffix("^2") {
            return index(base, 'X').map(Term::Quadratic).ok_or_else(err);
        }
        if let Some((a, b)) = s.split_once('*') {
            let (i, j) = (index(a.trim(), 'X').ok_or_else(err)?, index(b.trim(), 'X').ok_or_else(err)?);
            return if i == j {
                Ok(Term::Quadratic(i))
            } else {
                Term::interaction(i, j).ok_or_else(err)
            };
        }
        if let Some(i) = index(s, 'X') {
            return Ok(Term::Main(i));
        }
        index(s, 'Z').map(Term::Covariate).ok_or_else(err)
    }
}

/// Full candidate pool: intercept, mains, quadratics, two-factor
/// interactions and linear covariates, in canonical order.
pub fn candidate_terms(n_factors: usize, n_covariates: usize) -> Vec<Term> {
    let mut terms = vec![Term::Intercept];
    terms.extend((0..n_factors).map(Term::Main));
    terms.extend((0..n_factors).map(Term::Quadratic));
    for i in 0..n_factors {
        terms.extend((i + 1..n_factors).map(|j| Term::Interaction(i, j)));
    }
    terms.extend((0..n_covariates).map(Term::Covariate));
    terms
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_counts() {
        assert_eq!(candidate_terms(6, 4).len(), 32);
        assert_eq!(
            candidate_terms(1, 0),
            vec![Term::Intercept, Term::Main(0), Term::Quadratic(0)]
        );
        assert_eq!(candidate_terms(2, 1).len(), 7);
    }

    #[test]
    fn candidates_are_sorted_and_unique() {
        let t = candidate_terms(6, 4);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn labels_round_trip() {
        for t in candidate_terms(6, 4) {
            assert_eq!(t.to_string().parse::<Term>().unwrap(), t);
        }
        assert_eq!("X5*X1".parse::<Term>().unwrap(), Term::Interaction(0, 4));
        assert_eq!(Term::Interaction(0, 4).to_string(), "X1*X5");
        assert_eq!(Term::Quadratic(3).to_string(), "X4^2");
        assert!("X0".parse::<Term>().is_err());
        assert!("Y1".parse::<Term>().is_err());
    }

    #[test]
    fn interaction_indices_ordered() {
        assert_eq!(Term::interaction(3, 1), Some(Term::Interaction(1, 3)));
        assert_eq!(Term::interaction(2, 2), None);
    }

    #[test]
    fn term_values() {
        let x = [1.0, 2.0, 3.0];
        let z = [0.5];
        assert_eq!(Term::Intercept.value(&x, &z), 1.0);
        assert_eq!(Term::Main(1).value(&x, &z), 2.0);
        assert_eq!(Term::Quadratic(2).value(&x, &z), 9.0);
        assert_eq!(Term::Interaction(0, 2).value(&x, &z), 3.0);
        assert_eq!(Term::Covariate(0).value(&x, &z), 0.5);
    }
}
