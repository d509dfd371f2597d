//! Test-side reference values, computed independently of the library.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `I0(x)·e^{-x}` from the integral `(1/π)∫₀^π exp(x(cos θ − 1)) dθ`. The
/// integrand is smooth and periodic, so the midpoint rule converges fast.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    (0..n).map(|k| (x * (((k as f64 + 0.5) * h).cos() - 1.0)).exp()).sum::<f64>() * h / PI
}

/// Symbol error rate of noncoherent orthogonal M-FSK in AWGN as a one
/// dimensional Rician integral over the correct-bin envelope `r`:
/// `SER = ∫ r·exp(−(r−a)²/2)·I0e(ar)·[1 − (1 − e^{−r²/2})^{M−1}] dr`
/// with `a² = 2·Es/N0` and unit noise variance per dimension.
pub fn noncoherent_ser_rician(m: usize, es_n0: f64) -> f64 {
    let a = (2.0 * es_n0).sqrt();
    let lo = (a - 12.0).max(0.0);
    let hi = a + 12.0;
    let n = 4_000;
    let h = (hi - lo) / n as f64;
    let f = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let pdf = r * (-(r - a) * (r - a) / 2.0).exp() * bessel_i0_scaled(a * r);
        let miss = -((m - 1) as f64 * (-(-r * r / 2.0).exp()).ln_1p()).exp_m1();
        pdf * miss
    };
    // Simpson's rule
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

/// The textbook alternating sum for noncoherent M-FSK; exact but only
/// numerically usable for small `m`.
pub fn noncoherent_ser_alternating(m: usize, es_n0: f64) -> f64 {
    let mut binom = 1.0;
    let mut s = 0.0;
    for k in 1..m {
        binom = binom * (m - k) as f64 / k as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * binom / (k as f64 + 1.0) * (-(k as f64) / (k as f64 + 1.0) * es_n0).exp();
    }
    s
}

/// Binomial standard deviation of an error-rate estimate.
pub fn binomial_sigma(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
