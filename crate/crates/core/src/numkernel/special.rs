use crate::{Error, Result};
use std::f64::consts::PI;

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

fn lanczos_sum(x: f64) -> f64 {
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// Gamma function for positive arguments (Lanczos, g = 7).
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::arg(format!("gamma needs a positive argument, got {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    if x == x.floor() && x <= 23.0 {
        // exact for small integers
        return (1..x as u64).fold(1.0, |acc, k| acc * k as f64);
    }
    let y = x - 1.0;
    let t = y + LANCZOS_G + 0.5;
    // split the power so t^(y+1/2) does not overflow before e^-t damps it
    let half = t.powf(0.5 * (y + 0.5));
    (2.0 * PI).sqrt() * half * (-t).exp() * half * lanczos_sum(y)
}

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::arg(format!("ln_gamma needs a positive argument, got {x}")));
    }
    if x < 0.5 {
        return Ok((PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)?);
    }
    if x < 30.0 {
        return Ok(gamma_unchecked(x).ln());
    }
    let y = x - 1.0;
    let t = y + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (y + 0.5) * t.ln() - t + lanczos_sum(y).ln())
}

/// E_alpha(z) = sum_k z^k / Gamma(k alpha + 1) for alpha in (0, 1] and z >= 0.
///
/// Terms are accumulated until the next one drops below 1e-16 of the running
/// sum (once the terms have started to decrease).
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::arg(format!("mittag-leffler order must lie in (0,1], got {alpha}")));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::arg(format!("mittag-leffler argument must be finite and >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let lnz = z.ln();
    let term = |k: usize| -> Result<f64> {
        let arg = k as f64 * alpha + 1.0;
        if arg < 150.0 {
            let p = z.powi(k as i32);
            if p.is_finite() {
                return Ok(p / gamma_unchecked(arg));
            }
        }
        Ok((k as f64 * lnz - ln_gamma(arg)?).exp())
    };
    let mut sum = 1.0;
    let mut prev = 1.0;
    let mut k = 1usize;
    loop {
        let t = term(k)?;
        if !t.is_finite() || !(sum + t).is_finite() {
            return Err(Error::Overflow(format!("E_{alpha}({z}) exceeds f64 range")));
        }
        if t < 1e-16 * sum && t <= prev {
            break;
        }
        sum += t;
        prev = t;
        k += 1;
        if k > 1_000_000 {
            return Err(Error::NoConvergence(format!("E_{alpha}({z}) series")));
        }
    }
    Ok(sum)
}
