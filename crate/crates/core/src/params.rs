//! Operating variables, feed-batch attributes and factor ranges shared by every stage.

use serde::{Deserialize, Serialize};

/// Number of process parameters (feed, wash and elution flow/time pairs).
pub const N_PARAMS: usize = 6;
/// Number of material attributes carried by a feed batch.
pub const N_ATTRS: usize = 4;

/// Labels used in CSV headers and term names.
pub const PARAM_LABELS: [&str; N_PARAMS] = ["X1", "X2", "X3", "X4", "X5", "X6"];
pub const ATTR_LABELS: [&str; N_ATTRS] = ["Z1", "Z2", "Z3", "Z4"];

/// The six operating variables of one chromatographic run.
///
/// Flows are in bed volumes per hour, times in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub feed_flow: f64,
    pub feed_time: f64,
    pub wash_flow: f64,
    pub wash_time: f64,
    pub elution_flow: f64,
    pub elution_time: f64,
}

impl ProcessParams {
    pub const fn new(
        feed_flow: f64,
        feed_time: f64,
        wash_flow: f64,
        wash_time: f64,
        elution_flow: f64,
        elution_time: f64,
    ) -> Self {
        Self {
            feed_flow,
            feed_time,
            wash_flow,
            wash_time,
            elution_flow,
            elution_time,
        }
    }

    pub const fn from_array(x: [f64; N_PARAMS]) -> Self {
        Self::new(x[0], x[1], x[2], x[3], x[4], x[5])
    }

    pub const fn to_array(&self) -> [f64; N_PARAMS] {
        [
            self.feed_flow,
            self.feed_time,
            self.wash_flow,
            self.wash_time,
            self.elution_flow,
            self.elution_time,
        ]
    }

    /// Value of parameter `i` (0-based, so `get(0)` is X1).
    pub fn get(&self, i: usize) -> f64 {
        self.to_array()[i]
    }

    pub fn with(&self, i: usize, value: f64) -> Self {
        let mut x = self.to_array();
        x[i] = value;
        Self::from_array(x)
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v > 0.0)
    }
}

/// Covariates describing one feed-solution batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialAttributes {
    pub batch_id: String,
    /// TT concentration, mg/mL.
    pub tt_concentration: f64,
    /// TT purity, %.
    pub tt_purity: f64,
    /// FG concentration, mg/mL.
    pub fg_concentration: f64,
    /// FG purity, %.
    pub fg_purity: f64,
}

impl MaterialAttributes {
    pub fn new(
        batch_id: impl Into<String>,
        tt_concentration: f64,
        tt_purity: f64,
        fg_concentration: f64,
        fg_purity: f64,
    ) -> Self {
        Self {
            batch_id: batch_id.into(),
            tt_concentration,
            tt_purity,
            fg_concentration,
            fg_purity,
        }
    }

    pub fn covariates(&self) -> [f64; N_ATTRS] {
        [
            self.tt_concentration,
            self.tt_purity,
            self.fg_concentration,
            self.fg_purity,
        ]
    }

    pub fn is_valid(&self) -> bool {
        let conc_ok = |c: f64| c.is_finite() && c > 0.0;
        let purity_ok = |p: f64| p.is_finite() && p > 0.0 && p < 100.0;
        conc_ok(self.tt_concentration)
            && conc_ok(self.fg_concentration)
            && purity_ok(self.tt_purity)
            && purity_ok(self.fg_purity)
    }
}

/// Range of one experimental factor in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub unit: String,
}

impl FactorSpec {
    /// Returns `None` unless `low < high` and both are finite.
    pub fn new(name: impl Into<String>, low: f64, high: f64, unit: impl Into<String>) -> Option<Self> {
        (low.is_finite() && high.is_finite() && low < high).then(|| Self {
            name: name.into(),
            low,
            high,
            unit: unit.into(),
        })
    }

    pub fn center(&self) -> f64 {
        (self.low + self.high) / 2.0
    }

    pub fn half_range(&self) -> f64 {
        (self.high - self.low) / 2.0
    }

    pub fn decode(&self, coded: f64) -> f64 {
        self.center() + coded * self.half_range()
    }

    pub fn encode(&self, natural: f64) -> f64 {
        (natural - self.center()) / self.half_range()
    }

    pub fn contains(&self, value: f64) -> bool {
        let tol = 1e-9 * (self.high - self.low);
        value >= self.low - tol && value <= self.high + tol
    }
}

/// Factor ranges studied in the EGBL case study (feed 0.5–1.5 BV/h, etc.).
pub fn default_factors() -> Vec<FactorSpec> {
    let f = |n: &str, lo, hi, u: &str| FactorSpec::new(n, lo, hi, u).expect("static range");
    vec![
        f("feed_flow", 0.5, 1.5, "BV/h"),
        f("feed_time", 1.0, 2.0, "h"),
        f("wash_flow", 1.5, 2.5, "BV/h"),
        f("wash_time", 0.5, 1.5, "h"),
        f("elution_flow", 2.5, 3.5, "BV/h"),
        f("elution_time", 0.5, 1.5, "h"),
    ]
}

/// Formats a real with `digits` significant digits, trimming trailing zeros.
pub fn fmt_sig(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return if value.is_finite() { "0".into() } else { value.to_string() };
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{value:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" { "0".into() } else { s }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_rejects_inverted_range() {
        assert!(FactorSpec::new("x", 2.0, 1.0, "h").is_none());
        assert!(FactorSpec::new("x", 1.0, 1.0, "h").is_none());
    }

    #[test]
    fn decode_encode() {
        let f = FactorSpec::new("feed_flow", 0.5, 1.5, "BV/h").unwrap();
        assert_eq!(f.center(), 1.0);
        assert_eq!(f.decode(-1.0), 0.5);
        assert_eq!(f.decode(1.0), 1.5);
        assert_eq!(f.encode(1.25), 0.5);
    }

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(1.095, 6), "1.095");
        assert_eq!(fmt_sig(254.4690049, 6), "254.469");
        assert_eq!(fmt_sig(0.000123456789, 6), "0.000123457");
        assert_eq!(fmt_sig(-2.0, 6), "-2");
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(1234567.0, 6), "1234567");
    }
}
