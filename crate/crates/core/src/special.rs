//! Gamma function and friends.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Γ(x) for real `x`, using the Lanczos approximation (g = 7) and the
/// reflection formula below 1/2.
pub fn gamma(x: f64) -> Result<f64> {
    if is_nonpositive_integer(x) {
        return Err(Error::GammaPole(x));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    if x == x.floor() && x <= 23.0 {
        // exact factorials
        return (1..x as u64).fold(1.0, |acc, k| acc * k as f64);
    }
    if x > 171.7 {
        return f64::INFINITY;
    }
    let x = x - 1.0;
    let mut series = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        series += c / (x + i as f64);
    }
    let w = x + LANCZOS_G + 0.5;
    // split the power so that w^(x+1/2) does not overflow before exp(-w) rescales it
    let half = w.powf(0.5 * (x + 0.5));
    (2.0 * PI).sqrt() * half * ((-w).exp() * half) * series
}

/// ln |Γ(x)| for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 10.0 {
        return gamma_unchecked(x).abs().ln();
    }
    // Stirling series with Bernoulli corrections.
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let corr = inv
        * (1.0 / 12.0
            - inv2
                * (1.0 / 360.0
                    - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0)))));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + corr
}

/// 1/Γ(x), which is entire: zero at the non-positive integers.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x > 170.0 {
        return (-ln_gamma(x)).exp();
    }
    1.0 / gamma_unchecked(x)
}
