//! Mamdani level controller for the outlet pump.
//!
//! Inputs: level error (cm, measured − setpoint) and its rate (cm/s), each with
//! five triangular sets NL, NS, Z, PS, PL. Rule (i, j) maps to output set
//! `clamp(i + j, −2, 2)`. Output sets sit at −1, −0.5, 0, 0.5, 1 on a
//! normalized universe; the centroid is scaled to BV/h.

pub const ERROR_RANGE: f64 = 3.0;
pub const RATE_RANGE: f64 = 0.05;
/// Largest P2 adjustment per control step, BV/h.
pub const MAX_ADJUST: f64 = 0.5;

const OUT_HALF_WIDTH: f64 = 0.5;
const OUT_SAMPLES: usize = 241;

fn triangle(x: f64, center: f64, half_width: f64) -> f64 {
    (1.0 - (x - center).abs() / half_width).max(0.0)
}

/// Degrees of membership in NL..PL after clamping `x` into `[−range, range]`.
pub fn fuzzify(x: f64, range: f64) -> [f64; 5] {
    let x = x.clamp(-range, range);
    let w = range / 2.0;
    std::array::from_fn(|k| triangle(x, (k as f64 - 2.0) * w, w))
}

/// Firing strength of each output set (max over rules of min of antecedents).
pub fn rule_strengths(error: f64, rate: f64) -> [f64; 5] {
    let e = fuzzify(error, ERROR_RANGE);
    let r = fuzzify(rate, RATE_RANGE);
    let mut out = [0.0f64; 5];
    for (i, &mi) in e.iter().enumerate() {
        if mi == 0.0 {
            continue;
        }
        for (j, &mj) in r.iter().enumerate() {
            if mj == 0.0 {
                continue;
            }
            let k = (i as i32 + j as i32 - 4).clamp(-2, 2) + 2;
            out[k as usize] = out[k as usize].max(mi.min(mj));
        }
    }
    out
}

/// P2 flow adjustment in BV/h; positive when the level is high or rising.
pub fn fuzzy_control(level_error: f64, error_rate: f64) -> f64 {
    let strength = rule_strengths(level_error, error_rate);
    let lo = -1.0 - OUT_HALF_WIDTH;
    let step = 2.0 * (1.0 + OUT_HALF_WIDTH) / (OUT_SAMPLES - 1) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for s in 0..OUT_SAMPLES {
        let y = lo + step * s as f64;
        let mu = strength
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > 0.0)
            .map(|(k, a)| a.min(triangle(y, (k as f64 - 2.0) * OUT_HALF_WIDTH, OUT_HALF_WIDTH)))
            .fold(0.0, f64::max);
        num += mu * y;
        den += mu;
    }
    if den == 0.0 {
        return 0.0;
    }
    (MAX_ADJUST * num / den).clamp(-MAX_ADJUST, MAX_ADJUST)
}
