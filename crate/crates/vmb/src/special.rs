//! Small special-function helpers.

use std::f64::consts::PI;

/// Exponentially scaled modified Bessel function e^{-x} I_0(x), x >= 0.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 15.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0f64;
        loop {
            let ratio = (2.0 * k + 1.0).powi(2) / (8.0 * (k + 1.0) * x);
            if ratio >= 1.0 {
                break;
            }
            term *= ratio;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
