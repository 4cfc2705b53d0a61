//! Synthetic online sensors: each signal relaxes toward the value of the
//! solvent currently fed, with a time constant of one bed-volume turnover.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    /// Simulated seconds since plant start.
    pub timestamp: f64,
    pub ph: f64,
    /// µS/cm.
    pub conductivity: f64,
    /// mV.
    pub orp: f64,
    pub uv_absorbance: f64,
    pub nir_absorbance: f64,
    /// cm above the bed.
    pub level: f64,
    /// °C.
    pub temperature: f64,
}

impl SensorFrame {
    pub fn is_valid(&self) -> bool {
        [
            self.timestamp,
            self.ph,
            self.conductivity,
            self.orp,
            self.uv_absorbance,
            self.nir_absorbance,
            self.level,
            self.temperature,
        ]
        .iter()
        .all(|v| v.is_finite())
            && self.level >= 0.0
    }
}

/// Noise-free signal levels, in the order pH, conductivity, ORP, UV, NIR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signals(pub [f64; 5]);

impl Signals {
    pub const PH: usize = 0;
    pub const CONDUCTIVITY: usize = 1;
    pub const ORP: usize = 2;
    pub const UV: usize = 3;
    pub const NIR: usize = 4;

    /// Settled readings for the solvent fed in `phase`.
    pub fn target(phase: Phase) -> Self {
        Signals(match phase {
            Phase::Equilibrate | Phase::Idle => [7.0, 10.0, 220.0, 0.02, 0.05],
            Phase::Load => [4.8, 2500.0, 180.0, 2.5, 0.9],
            Phase::Wash => [6.0, 800.0, 200.0, 0.8, 0.4],
            Phase::Elute => [6.4, 150.0, 260.0, 1.6, 0.6],
            Phase::Regenerate => [7.4, 40.0, 240.0, 0.3, 0.1],
        })
    }

    /// One step of `s ← s + (target − s)(1 − e^{−dt/τ})`.
    pub fn relax(&mut self, target: &Signals, dt: f64, tau: f64) {
        let k = 1.0 - (-dt / tau).exp();
        for (s, t) in self.0.iter_mut().zip(target.0) {
            *s += (t - *s) * k;
        }
    }
}

/// Noise magnitudes for the measured frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    /// Relative σ on conductivity, UV and NIR.
    pub rel_sd: f64,
    pub ph_sd: f64,
    pub orp_sd: f64,
    /// cm.
    pub level_sd: f64,
    pub temperature_sd: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            rel_sd: 0.002,
            ph_sd: 0.01,
            orp_sd: 1.0,
            level_sd: 0.05,
            temperature_sd: 0.05,
        }
    }
}

pub fn measure<R: Rng + ?Sized>(
    timestamp: f64,
    truth: &Signals,
    level: f64,
    noise: &SensorNoise,
    rng: &mut R,
) -> SensorFrame {
    let mut n = || -> f64 { StandardNormal.sample(rng) };
    let s = truth.0;
    SensorFrame {
        timestamp,
        ph: s[Signals::PH] + noise.ph_sd * n(),
        conductivity: s[Signals::CONDUCTIVITY] * (1.0 + noise.rel_sd * n()),
        orp: s[Signals::ORP] + noise.orp_sd * n(),
        uv_absorbance: s[Signals::UV] * (1.0 + noise.rel_sd * n()),
        nir_absorbance: s[Signals::NIR] * (1.0 + noise.rel_sd * n()),
        level: (level + noise.level_sd * n()).max(0.0),
        temperature: 25.0 + noise.temperature_sd * n(),
    }
}

/// True when the last `window_len` values exist and their sample
/// std/|mean| is below `rel_threshold`.
pub fn stabilization_detector(window: &[f64], rel_threshold: f64, window_len: usize) -> bool {
    assert!(window_len >= 2, "window_len must be at least 2");
    if window.len() < window_len {
        return false;
    }
    let w = &window[window.len() - window_len..];
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    mean != 0.0 && var.sqrt() / mean.abs() < rel_threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn detector_examples() {
        assert!(stabilization_detector(&[5.0; 120], 0.01, 120));
        assert!(!stabilization_detector(&[5.0; 119], 0.01, 120));
        let ramp: Vec<f64> = (0..120).map(|i| 10.0 + i as f64).collect();
        assert!(!stabilization_detector(&ramp, 0.01, 120));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noisy: Vec<f64> = (0..120)
            .map(|_| 100.0 * (1.0 + 0.005 * Distribution::<f64>::sample(&StandardNormal, &mut rng)))
            .collect();
        assert!(stabilization_detector(&noisy, 0.01, 120));
    }

    #[test]
    fn e_folding() {
        let mut s = Signals([0.0; 5]);
        let target = Signals([1.0; 5]);
        let tau = 1200.0;
        for _ in 0..1200 {
            s.relax(&target, 1.0, tau);
        }
        assert!((s.0[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn settles_within_noise() {
        let mut s = Signals::target(Phase::Load);
        let target = Signals::target(Phase::Equilibrate);
        for _ in 0..20_000 {
            s.relax(&target, 1.0, 1200.0);
        }
        let noise = SensorNoise::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = measure(0.0, &s, 3.0, &noise, &mut rng);
        assert!((f.conductivity - 10.0).abs() < 3.0 * 10.0 * noise.rel_sd);
        assert!(f.is_valid());
    }
}
