//! Response indicators from fraction masses and process timing.
//!
//! Purity is target mass over total solids (×100); productivity is target
//! mass over process time. Per-volume concentrations cancel, so fraction
//! totals are used directly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ProcessParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssayError {
    #[error("total solids mass is zero")]
    ZeroSolids,
    #[error("target mass {target} mg exceeds total solids {solids} mg")]
    MassExceedsSolids { target: f64, solids: f64 },
    #[error("process time is zero")]
    ZeroTime,
    #[error("invalid fraction record: {0}")]
    InvalidRecord(&'static str),
}

/// Collected eluate of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionRecord {
    /// Total TT mass in the fraction, mg.
    pub m_tt_total: f64,
    /// Total FG mass in the fraction, mg.
    pub m_fg_total: f64,
    /// Total solids, mg.
    pub m_ts_total: f64,
    /// mL.
    pub volume: f64,
    /// Process time in hours (feed + wash + elution).
    pub process_time: f64,
    pub batch_id: String,
    pub params: ProcessParams,
}

impl FractionRecord {
    pub fn validate(&self) -> Result<(), AssayError> {
        let masses = [self.m_tt_total, self.m_fg_total, self.m_ts_total];
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(AssayError::InvalidRecord("masses must be finite and non-negative"));
        }
        if self.m_tt_total + self.m_fg_total > self.m_ts_total * (1.0 + 1e-12) {
            return Err(AssayError::InvalidRecord("target masses exceed total solids"));
        }
        if !(self.volume > 0.0) {
            return Err(AssayError::InvalidRecord("volume must be positive"));
        }
        if !(self.process_time > 0.0) {
            return Err(AssayError::InvalidRecord("process time must be positive"));
        }
        Ok(())
    }
}

/// Y1 TT purity %, Y2 TT productivity mg/h, Y3 FG purity %, Y4 FG productivity mg/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseVector {
    pub tt_purity: f64,
    pub tt_productivity: f64,
    pub fg_purity: f64,
    pub fg_productivity: f64,
}

impl ResponseVector {
    /// Values in Y1..Y4 order.
    pub fn to_array(&self) -> [f64; 4] {
        [
            self.tt_purity,
            self.tt_productivity,
            self.fg_purity,
            self.fg_productivity,
        ]
    }

    pub fn from_array(y: [f64; 4]) -> Self {
        Self {
            tt_purity: y[0],
            tt_productivity: y[1],
            fg_purity: y[2],
            fg_productivity: y[3],
        }
    }

    /// `Y1·Y4 − Y2·Y3`, zero for responses taken from one fraction.
    pub fn mass_balance_residual(&self) -> f64 {
        self.tt_purity * self.fg_productivity - self.tt_productivity * self.fg_purity
    }
}

pub fn purity(m_target: f64, m_ts: f64) -> Result<f64, AssayError> {
    if m_ts == 0.0 {
        return Err(AssayError::ZeroSolids);
    }
    if m_target > m_ts {
        return Err(AssayError::MassExceedsSolids {
            target: m_target,
            solids: m_ts,
        });
    }
    Ok(m_target / m_ts * 100.0)
}

pub fn productivity(m_target: f64, hours: f64) -> Result<f64, AssayError> {
    if hours == 0.0 {
        return Err(AssayError::ZeroTime);
    }
    Ok(m_target / hours)
}

/// Feed + wash + elution time; equilibration and regeneration are excluded.
pub fn process_time(params: &ProcessParams) -> f64 {
    params.feed_time + params.wash_time + params.elution_time
}

pub fn responses_from_fraction(f: &FractionRecord) -> Result<ResponseVector, AssayError> {
    f.validate()?;
    Ok(ResponseVector {
        tt_purity: purity(f.m_tt_total, f.m_ts_total)?,
        tt_productivity: productivity(f.m_tt_total, f.process_time)?,
        fg_purity: purity(f.m_fg_total, f.m_ts_total)?,
        fg_productivity: productivity(f.m_fg_total, f.process_time)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(m_tt: f64, m_fg: f64, m_ts: f64, t: f64) -> FractionRecord {
        FractionRecord {
            m_tt_total: m_tt,
            m_fg_total: m_fg,
            m_ts_total: m_ts,
            volume: 100.0,
            process_time: t,
            batch_id: "250401".into(),
            params: ProcessParams::new(1.5, 2.0, 2.5, 1.095, 3.5, 0.86),
        }
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(24.0, 100.0).unwrap(), 24.0);
        assert_eq!(purity(0.0, 50.0).unwrap(), 0.0);
        assert_eq!(purity(7.3, 7.3).unwrap(), 100.0);
        assert_eq!(purity(1.0, 0.0), Err(AssayError::ZeroSolids));
        assert!(matches!(purity(2.0, 1.0), Err(AssayError::MassExceedsSolids { .. })));
    }

    #[test]
    fn productivity_examples() {
        assert!((productivity(381.7, 3.955).unwrap() - 96.5).abs() < 0.05);
        assert_eq!(productivity(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(productivity(100.0, 2.0).unwrap(), 50.0);
        assert_eq!(productivity(1.0, 0.0), Err(AssayError::ZeroTime));
    }

    #[test]
    fn process_time_excludes_equilibration_and_regeneration() {
        let p = ProcessParams::new(1.5, 2.0, 2.5, 1.095, 3.5, 0.86);
        assert!((process_time(&p) - 3.955).abs() < 1e-12);
        let center = ProcessParams::new(1.0, 1.5, 2.0, 1.0, 3.0, 1.0);
        assert_eq!(process_time(&center), 3.5);
        assert_eq!(process_time(&center), process_time(&center.clone()));
    }

    #[test]
    fn validation_batch_masses() {
        // Masses back-solved from the measured 250401 validation run.
        let y = responses_from_fraction(&record(387.6, 1628.5, 4963.0, 3.955)).unwrap();
        assert!((y.tt_purity - 7.81).abs() < 0.005);
        assert!((y.tt_productivity - 98.0).abs() < 0.05);
        assert!((y.fg_purity - 32.8).abs() < 0.05);
        assert!((y.fg_productivity - 412.0).abs() < 0.5);
    }

    #[test]
    fn zero_targets() {
        let y = responses_from_fraction(&record(0.0, 0.0, 10.0, 2.0)).unwrap();
        assert_eq!(y.to_array(), [0.0; 4]);
    }

    #[test]
    fn invalid_records_rejected() {
        assert!(responses_from_fraction(&record(6.0, 6.0, 10.0, 1.0)).is_err());
        assert!(responses_from_fraction(&record(1.0, 1.0, 10.0, 0.0)).is_err());
        let mut r = record(1.0, 1.0, 10.0, 1.0);
        r.volume = 0.0;
        assert!(responses_from_fraction(&r).is_err());
    }

    proptest! {
        #[test]
        fn mass_balance_identity(
            tt in 0.0f64..1e4, fg in 0.0f64..1e4, extra in 0.0f64..1e5, t in 0.01f64..10.0
        ) {
            let y = responses_from_fraction(&record(tt, fg, tt + fg + extra + 1e-3, t)).unwrap();
            let scale = (y.tt_purity * y.fg_productivity).abs().max(1e-300);
            prop_assert!(y.mass_balance_residual().abs() <= 1e-12 * scale.max(1.0));
            prop_assert!((0.0..=100.0).contains(&y.tt_purity));
            prop_assert!((0.0..=100.0).contains(&y.fg_purity));
        }

        #[test]
        fn purity_scale_invariant(m in 0.0f64..1e3, extra in 1e-3f64..1e3, k in 1e-3f64..1e3) {
            let a = purity(m, m + extra).unwrap();
            let b = purity(k * m, k * (m + extra)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
