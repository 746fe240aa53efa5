//! Cumulative distribution functions.
//!
//! Families with a closed-form CDF use it directly. Everything else integrates
//! the density between consecutive sorted query points with adaptive
//! Gauss–Kronrod and accumulates the pieces, so the result is non-decreasing
//! in `x` by construction.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::quadrature::{integrate, QuadratureRule};
use crate::specfun::{normal_cdf, reg_gamma_p};

use super::{Density, ModelSpec};

const GAP_ABS_TOL: f64 = 1e-10;
const GAP_REL_TOL: f64 = 1e-10;
const GAP_MAX_INTERVALS: usize = 200;
const PAR_THRESHOLD: usize = 64;

fn closed_form_cdf(model: &ModelSpec, x: f64) -> Option<f64> {
    let v = match *model {
        ModelSpec::Weibull { alpha, gamma } => -(-(x / gamma).powf(alpha)).exp_m1(),
        ModelSpec::Lognormal { mu, gamma } => {
            if x == 0.0 {
                0.0
            } else {
                normal_cdf((x.ln() - mu) / gamma)
            }
        }
        ModelSpec::Rayleigh { sigma } => -(-x * x / (2.0 * sigma * sigma)).exp_m1(),
        ModelSpec::Exponential { gamma } => -(-x / gamma).exp_m1(),
        ModelSpec::GammaLooks { looks, gamma } => reg_gamma_p(looks, gamma * looks * x),
        ModelSpec::GeneralizedGamma { power, sigma, kappa } => {
            reg_gamma_p(kappa, (x / sigma).powf(power))
        }
        _ => return None,
    };
    Some(v.clamp(0.0, 1.0))
}

fn check_points(xs: &[f64]) -> Result<()> {
    match xs.iter().position(|x| !(*x >= 0.0) || !x.is_finite()) {
        Some(i) => Err(domain(format!("CDF argument {i} must be finite and >= 0, got {}", xs[i]))),
        None => Ok(()),
    }
}

/// CDF of `model` at `x >= 0`.
pub fn cdf(model: &ModelSpec, x: f64, rule: &QuadratureRule) -> Result<f64> {
    Ok(cdf_many(model, &[x], rule)?[0])
}

/// CDF of `model` at every point of `xs`, returned in input order.
///
/// Cheaper than repeated [`cdf`] calls for integral-form families because the
/// density is integrated once over the sorted points.
pub fn cdf_many(model: &ModelSpec, xs: &[f64], rule: &QuadratureRule) -> Result<Vec<f64>> {
    model.validate()?;
    check_points(xs)?;
    if closed_form_cdf(model, 1.0).is_some() {
        return Ok(xs.iter().map(|&x| closed_form_cdf(model, x).expect("closed form")).collect());
    }

    let density = Density::new(model, rule)?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| xs[i]).collect();

    let gap = |k: usize| -> f64 {
        let lo = if k == 0 { 0.0 } else { sorted[k - 1] };
        let hi = sorted[k];
        if hi <= lo {
            return 0.0;
        }
        let v = integrate(|x| density.pdf(x), lo, hi, GAP_ABS_TOL, GAP_REL_TOL, GAP_MAX_INTERVALS).value;
        v.max(0.0)
    };
    let pieces: Vec<f64> = if sorted.len() >= PAR_THRESHOLD {
        (0..sorted.len()).into_par_iter().map(gap).collect()
    } else {
        (0..sorted.len()).map(gap).collect()
    };

    let mut out = vec![0.0; xs.len()];
    let mut running = 0.0;
    for (piece, &idx) in pieces.iter().zip(&order) {
        running += piece;
        out[idx] = running.min(1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::GgRicianParams;
    use proptest::prelude::*;

    #[test]
    fn weibull_closed_form() {
        let rule = QuadratureRule::default();
        let m = ModelSpec::Weibull { alpha: 2.0, gamma: 1.0 };
        let v = cdf(&m, 1.0, &rule).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn zero_maps_to_zero() {
        let rule = QuadratureRule::default();
        let p = GgRicianParams::new(1.0, 1.3, 1.7).unwrap();
        for m in [
            ModelSpec::GgRicianAmplitude(p),
            ModelSpec::GgRicianIntensity(p),
            ModelSpec::Rician { sigma: 1.0, big_delta: 2.0 },
            ModelSpec::Lognormal { mu: 0.0, gamma: 1.0 },
            ModelSpec::Weibull { alpha: 0.5, gamma: 1.0 },
            ModelSpec::G0 { looks: 1.0, gamma: 1.0, alpha: -2.0 },
        ] {
            assert_eq!(cdf(&m, 0.0, &rule).unwrap(), 0.0, "{m}");
        }
    }

    #[test]
    fn numeric_rician_matches_rayleigh_closed_form() {
        let rule = QuadratureRule::default();
        let xs = [0.3, 1.0, 2.5, 4.0];
        let numeric = cdf_many(&ModelSpec::Rician { sigma: 1.3, big_delta: 0.0 }, &xs, &rule).unwrap();
        let exact = cdf_many(&ModelSpec::Rayleigh { sigma: 1.3 }, &xs, &rule).unwrap();
        for (a, b) in numeric.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn ggrician_reaches_one() {
        // mean is near √2 δ; far beyond it the mass must be exhausted
        let rule = QuadratureRule::default();
        let m = ModelSpec::GgRicianAmplitude(GgRicianParams::new(1.0, 1.3, 1.7).unwrap());
        let v = cdf(&m, 2.5 + 20.0 * 1.3, &rule).unwrap();
        assert!((v - 1.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn input_order_is_preserved() {
        let rule = QuadratureRule::default();
        let m = ModelSpec::G0 { looks: 1.0, gamma: 1.0, alpha: -2.0 };
        let v = cdf_many(&m, &[2.0, 0.5, 1.0], &rule).unwrap();
        // 𝒢₀ with L = 1, γ = 1, α = -2 has CDF 1 - 1/(1+r²)²
        for (x, got) in [2.0f64, 0.5, 1.0].iter().zip(v) {
            let want = 1.0 - 1.0 / (1.0 + x * x).powi(2);
            assert!((got - want).abs() < 1e-9, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn rejects_negative_points() {
        let rule = QuadratureRule::default();
        assert!(cdf(&ModelSpec::Exponential { gamma: 1.0 }, -1.0, &rule).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn monotone_and_bounded(
            alpha in 0.5f64..2.0,
            gamma in 0.5f64..4.0,
            delta in 0.0f64..5.0,
            mut xs in proptest::collection::vec(0.0f64..30.0, 1..20),
        ) {
            let rule = QuadratureRule::default();
            let m = ModelSpec::GgRicianAmplitude(GgRicianParams::new(alpha, gamma, delta).unwrap());
            xs.sort_by(f64::total_cmp);
            let v = cdf_many(&m, &xs, &rule).unwrap();
            for w in v.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            prop_assert!(v.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
