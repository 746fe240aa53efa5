//! Closed-form reference densities, all evaluated in log space.

use std::f64::consts::LN_2;

use crate::error::{domain, usage, Result};
use crate::specfun::{i0_scaled, ln_gamma};

use super::ModelSpec;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A closed-form model with its log-normalizers precomputed.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    model: ModelSpec,
    ln_c: f64,
}

impl Prepared {
    pub(crate) fn new(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let ln_c = match *model {
            ModelSpec::Rayleigh { sigma } => -2.0 * sigma.ln(),
            ModelSpec::Rician { sigma, .. } => -2.0 * sigma.ln(),
            ModelSpec::NakagamiRice { r, .. } => -r.ln(),
            ModelSpec::GammaLooks { looks, gamma } => looks * (gamma * looks).ln() - ln_gamma(looks),
            ModelSpec::Exponential { gamma } => -gamma.ln(),
            ModelSpec::Weibull { alpha, gamma } => alpha.ln() - gamma.ln(),
            ModelSpec::Lognormal { gamma, .. } => -gamma.ln() - LN_SQRT_2PI,
            ModelSpec::G0 { looks, gamma, alpha } => {
                LN_2 + looks * looks.ln() + ln_gamma(looks - alpha)
                    - alpha * gamma.ln()
                    - ln_gamma(looks)
                    - ln_gamma(-alpha)
            }
            ModelSpec::GeneralizedGamma { power, sigma, kappa } => {
                power.ln() - sigma.ln() - ln_gamma(kappa)
            }
            other => {
                return Err(usage(format!(
                    "{} has no closed-form density; use the integral evaluators",
                    other.family()
                )))
            }
        };
        Ok(Self { model: *model, ln_c })
    }

    pub(crate) fn ln_pdf(&self, x: f64) -> f64 {
        let c = self.ln_c;
        match self.model {
            ModelSpec::Rayleigh { sigma } => {
                if x == 0.0 {
                    return f64::NEG_INFINITY;
                }
                c + x.ln() - x * x / (2.0 * sigma * sigma)
            }
            ModelSpec::Rician { sigma, big_delta } => {
                if x == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let s2 = sigma * sigma;
                c + x.ln() - (x - big_delta).powi(2) / (2.0 * s2)
                    + i0_scaled(x * big_delta / s2).ln()
            }
            ModelSpec::NakagamiRice { r, big_delta } => {
                let root = x.sqrt();
                c - (root - big_delta).powi(2) / r + i0_scaled(2.0 * root * big_delta / r).ln()
            }
            ModelSpec::GammaLooks { looks, gamma } => {
                power_term(looks - 1.0, x) + c - gamma * looks * x
            }
            ModelSpec::Exponential { gamma } => c - x / gamma,
            ModelSpec::Weibull { alpha, gamma } => {
                let z = x / gamma;
                power_term(alpha - 1.0, z) + c - z.powf(alpha)
            }
            ModelSpec::Lognormal { mu, gamma } => {
                if x == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let l = x.ln();
                c - l - (l - mu).powi(2) / (2.0 * gamma * gamma)
            }
            ModelSpec::G0 { looks, gamma, alpha } => {
                power_term(2.0 * looks - 1.0, x) + c
                    - (looks - alpha) * (gamma + looks * x * x).ln()
            }
            ModelSpec::GeneralizedGamma { power, sigma, kappa } => {
                let z = x / sigma;
                power_term(kappa * power - 1.0, z) + c - z.powf(power)
            }
            _ => unreachable!("Prepared only holds closed-form families"),
        }
    }
}

// ln(x^k), with the x = 0 limits 0 (k = 0), -inf (k > 0) and +inf (k < 0).
fn power_term(k: f64, x: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else if x == 0.0 {
        if k > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        k * x.ln()
    }
}

/// Exact density of a closed-form family at `x >= 0`.
///
/// GG-Rician, GGR, Laplace-Rician and stable-Rayleigh are integral forms and
/// are rejected here.
pub fn closed_form_pdf(model: &ModelSpec, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("density argument must be >= 0, got {x}")));
    }
    Ok(Prepared::new(model)?.ln_pdf(x).exp())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::distributions::GgRicianParams;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn direct_substitutions() {
        let v = closed_form_pdf(&ModelSpec::Rayleigh { sigma: 1.0 }, 1.0).unwrap();
        assert!(close(v, (-0.5f64).exp(), 1e-14));
        let v = closed_form_pdf(&ModelSpec::Weibull { alpha: 1.0, gamma: 2.0 }, 0.0).unwrap();
        assert!(close(v, 0.5, 1e-15));
        let v = closed_form_pdf(&ModelSpec::Lognormal { mu: 0.0, gamma: 1.0 }, 1.0).unwrap();
        assert!(close(v, 1.0 / (2.0 * PI).sqrt(), 1e-14));
        let v = closed_form_pdf(&ModelSpec::G0 { looks: 1.0, gamma: 1.0, alpha: -2.0 }, 1.0).unwrap();
        assert!(close(v, 0.5, 1e-13));
    }

    #[test]
    fn g0_normalizes_numerically() {
        let m = ModelSpec::G0 { looks: 1.0, gamma: 1.0, alpha: -2.0 };
        // ∫₀^∞ 4r/(1+r²)³ dr = 1; substitute r = tan(t)
        let n = 20_000;
        let mut total = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64 * PI / 2.0;
            let r = t.tan();
            total += closed_form_pdf(&m, r).unwrap() / t.cos().powi(2);
        }
        total *= PI / 2.0 / n as f64;
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn exponential_gamma_and_weibull_agree() {
        let e = closed_form_pdf(&ModelSpec::Exponential { gamma: 2.0 }, 1.3).unwrap();
        let w = closed_form_pdf(&ModelSpec::Weibull { alpha: 1.0, gamma: 2.0 }, 1.3).unwrap();
        // GammaLooks with L = 1 has rate γ
        let g = closed_form_pdf(&ModelSpec::GammaLooks { looks: 1.0, gamma: 0.5 }, 1.3).unwrap();
        assert!(close(e, w, 1e-14) && close(e, g, 1e-14));
    }

    #[test]
    fn ggd_contains_weibull() {
        // κ = 1 GΓD is Weibull with shape ν and scale σ
        let a = closed_form_pdf(&ModelSpec::GeneralizedGamma { power: 1.7, sigma: 2.0, kappa: 1.0 }, 1.1).unwrap();
        let b = closed_form_pdf(&ModelSpec::Weibull { alpha: 1.7, gamma: 2.0 }, 1.1).unwrap();
        assert!(close(a, b, 1e-13));
    }

    #[test]
    fn nakagami_rice_with_zero_location_is_exponential() {
        let a = closed_form_pdf(&ModelSpec::NakagamiRice { r: 2.0, big_delta: 0.0 }, 0.7).unwrap();
        let b = closed_form_pdf(&ModelSpec::Exponential { gamma: 2.0 }, 0.7).unwrap();
        assert!(close(a, b, 1e-14));
    }

    #[test]
    fn integral_families_are_rejected() {
        let p = GgRicianParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(closed_form_pdf(&ModelSpec::GgRicianAmplitude(p), 1.0).is_err());
        assert!(closed_form_pdf(&ModelSpec::StableRayleigh { alpha: 1.5, gamma: 1.0 }, 1.0).is_err());
        assert!(closed_form_pdf(&ModelSpec::Ggr { alpha: 1.5, gamma: 1.0 }, 1.0).is_err());
    }

    #[test]
    fn rician_stays_finite_far_in_the_tail() {
        let v = Prepared::new(&ModelSpec::Rician { sigma: 0.5, big_delta: 3.0 }).unwrap().ln_pdf(40.0);
        assert!(v.is_finite() && v < -1000.0);
    }
}
