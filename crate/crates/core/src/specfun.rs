//! Special functions used by the densities: log-gamma, the regularized
//! incomplete gamma function, scaled `I0`, `J0`/`J1` with the zeros of `J0`,
//! and the asymptotic Kolmogorov survival function.
//!
//! Every function here is pure. The checked entry points return
//! [`Error::Domain`](crate::Error::Domain) for arguments outside their domain;
//! crate-internal hot paths call the unchecked variants.

use std::f64::consts::PI;

use crate::error::{domain, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("log_gamma requires a finite positive argument, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// Unchecked log-gamma (Lanczos, g = 7, nine terms) with reflection below 1/2.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx); only reached for 0 < x < 1/2.
        return PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    check_incomplete(a, x)?;
    Ok(reg_gamma_p(a, x))
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    check_incomplete(a, x)?;
    Ok(reg_gamma_q(a, x))
}

fn check_incomplete(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() || !(x >= 0.0) {
        return Err(domain(format!("incomplete gamma needs a > 0 and x >= 0, got a={a}, x={x}")));
    }
    Ok(())
}

pub(crate) fn reg_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

pub(crate) fn reg_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let half_tail = 0.5 * reg_gamma_q(0.5, 0.5 * z * z);
    if z < 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

/// `exp(-x) * I0(x)` for `x >= 0`. The result lies in `(0, 1]`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("bessel_i0_scaled requires x >= 0, got {x}")));
    }
    Ok(i0_scaled(x))
}

pub(crate) fn i0_scaled(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    if x < 15.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0f64;
        let mut sum = 1.0;
        let mut k = 0.0f64;
        loop {
            k += 1.0;
            term *= q / (k * k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        // Hankel expansion; all terms positive, truncated at the smallest one.
        let mut term = 1.0f64;
        let mut sum = 1.0;
        let mut k = 0.0f64;
        loop {
            k += 1.0;
            let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * k * x);
            if next >= term || next < sum * 1e-17 {
                if next < term {
                    sum += next;
                }
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Bessel function of the first kind of order zero, `x >= 0`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(domain(format!("bessel_j0 requires a finite x >= 0, got {x}")));
    }
    Ok(j0(x))
}

/// Bessel function of the first kind of order one, `x >= 0`.
pub fn bessel_j1(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(domain(format!("bessel_j1 requires a finite x >= 0, got {x}")));
    }
    Ok(j1(x))
}

pub(crate) fn j0(x: f64) -> f64 {
    libm::j0(x)
}

pub(crate) fn j1(x: f64) -> f64 {
    libm::j1(x)
}

/// McMahon's large-order expansion for the k-th positive zero of `J0`.
///
/// Already within ~1e-6 at k = 1 and far better beyond; good enough to use
/// as a panel boundary without refinement.
pub(crate) fn j0_zero_mcmahon(k: usize) -> f64 {
    let beta = (k as f64 - 0.25) * PI;
    let b8 = 8.0 * beta;
    let inv = 1.0 / b8;
    let inv2 = inv * inv;
    beta + inv * (1.0 - inv2 * (124.0 / 3.0 - inv2 * 120_928.0 / 15.0))
}

/// The k-th positive zero of `J0` (k starts at 1), refined by Newton steps.
pub fn bessel_j0_zero(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(domain("zeros of J0 are indexed from 1"));
    }
    let mut z = j0_zero_mcmahon(k);
    for _ in 0..4 {
        let step = j0(z) / j1(z);
        z += step;
        if step.abs() < 1e-15 * z {
            break;
        }
    }
    Ok(z)
}

/// Asymptotic Kolmogorov survival function
/// `Q(x) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² x²)`.
///
/// For `x < 1` the equivalent theta-function form
/// `1 - sqrt(2π)/x Σ exp(-(2k-1)² π² / (8x²))` is summed instead, since the
/// alternating series converges slowly there.
pub fn kolmogorov_sf(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("kolmogorov_sf requires x >= 0, got {x}")));
    }
    Ok(ks_sf(x))
}

pub(crate) fn ks_sf(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let value = if x < 1.0 {
        let w = PI * PI / (8.0 * x * x);
        let mut sum = 0.0;
        for k in 1..100 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * w).exp();
            sum += term;
            if term < 1e-17 {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / x * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += sign * term;
            sign = -sign;
            if term < 1e-12 {
                break;
            }
        }
        2.0 * sum
    };
    value.clamp(0.0, 1.0)
}
