//! Random-walk maximum-likelihood search for the reference families.
//!
//! Each iteration perturbs one free parameter with a Gaussian step whose width
//! is a fraction of the parameter's current magnitude. Priors are flat on the
//! family's support, and the readout is the best state visited.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{sum_ln_pdf, Density, Family, ModelSpec};
use crate::error::{usage, Error, Result};
use crate::quadrature::QuadratureRule;
use crate::sampling::{RngStream, SampleSet};

use super::check_not_degenerate;

/// Settings for [`fit_reference`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub n_iter: usize,
    /// Step standard deviation as a fraction of the parameter magnitude.
    pub width_frac: f64,
    /// Lower bound on the step standard deviation.
    pub width_floor: f64,
    /// Fixed look count for 𝒢₀; `None` fits it with the other parameters.
    pub looks: Option<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { n_iter: 2000, width_frac: 0.1, width_floor: 1e-3, looks: Some(1.0), seed: 0, stream_id: 0 }
    }
}

impl ReferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(usage("reference n_iter must be at least 1"));
        }
        if !(self.width_frac > 0.0 && self.width_frac.is_finite()) {
            return Err(usage(format!("width_frac must be > 0, got {}", self.width_frac)));
        }
        if !(self.width_floor > 0.0 && self.width_floor.is_finite()) {
            return Err(usage(format!("width_floor must be > 0, got {}", self.width_floor)));
        }
        if let Some(l) = self.looks {
            if !(l > 0.0 && l.is_finite()) {
                return Err(usage(format!("looks must be > 0, got {l}")));
            }
        }
        Ok(())
    }
}

/// Output of [`fit_reference`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFit {
    pub model: ModelSpec,
    pub loglik: f64,
    pub proposed: u64,
    pub accepted: u64,
    /// Set for integral-form densities, whose fits take far longer.
    pub slow: bool,
}

struct Moments {
    m1: f64,
    m2: f64,
    m4: f64,
    var: f64,
    log_mean: f64,
    log_sd: f64,
    median: f64,
}

impl Moments {
    fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let m1 = v.iter().sum::<f64>() / n;
        let m2 = v.iter().map(|x| x * x).sum::<f64>() / n;
        let m4 = v.iter().map(|x| x.powi(4)).sum::<f64>() / n;
        let logs: Vec<f64> = v.iter().filter(|&&x| x > 0.0).map(|x| x.ln()).collect();
        let ln = logs.len().max(1) as f64;
        let log_mean = logs.iter().sum::<f64>() / ln;
        let log_sd = (logs.iter().map(|l| (l - log_mean).powi(2)).sum::<f64>() / ln).sqrt();
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        Self { m1, m2, m4, var: (m2 - m1 * m1).max(0.0), log_mean, log_sd, median }
    }
}

// Method-of-moments style starting points; only need to be in the right basin.
fn start(family: Family, v: &[f64], looks: Option<f64>) -> Vec<f64> {
    let m = Moments::of(v);
    let tiny = 1e-6;
    let weibull_shape = if m.log_sd > 0.0 {
        std::f64::consts::PI / (m.log_sd * 6f64.sqrt())
    } else {
        1.0
    };
    let weibull_scale = (m.log_mean + 0.577_215_664_901_532_9 / weibull_shape).exp();
    match family {
        Family::Rayleigh => vec![(m.m2 / 2.0).sqrt()],
        Family::Rician => {
            let d4 = 2.0 * m.m2 * m.m2 - m.m4;
            let d2 = if d4 > 0.0 { d4.sqrt().min(0.95 * m.m2) } else { 0.25 * m.m2 };
            vec![((m.m2 - d2) / 2.0).sqrt().max(tiny), d2.sqrt()]
        }
        Family::NakagamiRice => {
            let disc = m.m1 * m.m1 - m.var;
            let r = if disc > 0.0 { m.m1 - disc.sqrt() } else { m.m1 };
            vec![r.max(tiny), (m.m1 - r).max(0.0).sqrt()]
        }
        Family::LaplaceRician => vec![(m.m2 / 4.0).sqrt().max(tiny), 0.0],
        Family::Ggr => vec![2.0, m.m2.sqrt().max(tiny)],
        Family::Weibull => vec![weibull_shape, weibull_scale],
        Family::Lognormal => vec![m.log_mean, m.log_sd.max(tiny)],
        Family::G0 => {
            let l = looks.unwrap_or(1.0);
            vec![l, 2.0 * m.m2.max(tiny), -3.0]
        }
        Family::GeneralizedGamma => vec![weibull_shape, weibull_scale, 1.0],
        Family::StableRayleigh => {
            let alpha: f64 = 1.5;
            let rayleigh_var = m.median * m.median / (4.0 * std::f64::consts::LN_2);
            vec![alpha, rayleigh_var.max(tiny).powf(alpha / 2.0)]
        }
        Family::GammaLooks => {
            let l = if m.var > 0.0 { (m.m1 * m.m1 / m.var).max(1.0) } else { 1.0 };
            vec![l, 1.0 / m.m1.max(tiny)]
        }
        Family::Exponential => vec![m.m1.max(tiny)],
        Family::GgRicianAmplitude | Family::GgRicianIntensity => unreachable!("rejected by caller"),
    }
}

fn ln_normal(x: f64, mean: f64, sd: f64) -> f64 {
    -sd.ln() - 0.5 * ((x - mean) / sd).powi(2)
}

/// Maximum-likelihood fit of a reference family by random-walk MH.
///
/// GG-Rician is fitted with [`super::mh_fit`] instead and is rejected here.
/// 𝒢₀ keeps its look count fixed at `cfg.looks` unless that is `None`.
pub fn fit_reference(
    family: Family,
    s: &SampleSet,
    cfg: &ReferenceConfig,
    rule: &QuadratureRule,
) -> Result<ReferenceFit> {
    cfg.validate()?;
    if family.is_ggrician() {
        return Err(usage(format!("{family} is fitted with the GG-Rician sampler, not fit_reference")));
    }
    if let Some(d) = family.domain() {
        if d != s.domain() {
            return Err(usage(format!("{family} expects {d} data but the samples are tagged {}", s.domain())));
        }
    }
    check_not_degenerate(s.values())?;

    let loglik = |v: &[f64]| match ModelSpec::from_params(family, v).and_then(|m| Density::new(&m, rule)) {
        Ok(d) => sum_ln_pdf(&d, s.values()),
        Err(_) => f64::NEG_INFINITY,
    };
    let mut cur = start(family, s.values(), cfg.looks);
    let mut cur_ll = loglik(&cur);
    if !cur_ll.is_finite() {
        return Err(Error::Init(format!(
            "{family}: log-likelihood at the moment-based start {cur:?} is {cur_ll}"
        )));
    }
    let free: Vec<usize> = (0..cur.len())
        .filter(|&i| !(family == Family::G0 && i == 0 && cfg.looks.is_some()))
        .collect();
    let width = |x: f64| (cfg.width_frac * x.abs()).max(cfg.width_floor);

    let mut rng = RngStream::new(cfg.seed, cfg.stream_id);
    let (mut best, mut best_ll) = (cur.clone(), cur_ll);
    let (mut proposed, mut accepted) = (0u64, 0u64);
    for _ in 0..cfg.n_iter {
        let u: f64 = rng.sample(Open01);
        let k = free[((u * free.len() as f64) as usize).min(free.len() - 1)];
        let z: f64 = rng.sample(StandardNormal);
        let x = cur[k];
        let x_new = x + width(x) * z;
        let mut cand = cur.clone();
        cand[k] = x_new;
        let ln_u = rng.sample::<f64, _>(Open01).ln();
        let cand_ll = loglik(&cand);
        proposed += 1;
        // the step width depends on the current value, so the proposal is asymmetric
        let hastings = ln_normal(x, x_new, width(x_new)) - ln_normal(x_new, x, width(x));
        if cand_ll.is_finite() && ln_u <= cand_ll - cur_ll + hastings {
            accepted += 1;
            cur = cand;
            cur_ll = cand_ll;
            if cur_ll > best_ll {
                best.clone_from(&cur);
                best_ll = cur_ll;
            }
        }
    }
    Ok(ReferenceFit {
        model: ModelSpec::from_params(family, &best)?,
        loglik: best_ll,
        proposed,
        accepted,
        slow: matches!(family, Family::StableRayleigh | Family::Ggr | Family::LaplaceRician),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Domain;
    use crate::sampling::sample_reference;

    fn draw(m: ModelSpec, n: usize, seed: u64) -> SampleSet {
        sample_reference(&m, n, &mut RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn weibull_recovery() {
        let rule = QuadratureRule::default();
        let s = draw(ModelSpec::Weibull { alpha: 2.0, gamma: 1.0 }, 5000, 1);
        let fit = fit_reference(Family::Weibull, &s, &ReferenceConfig::default(), &rule).unwrap();
        let v = fit.model.params();
        assert!((v[0] - 2.0).abs() < 0.1 && (v[1] - 1.0).abs() < 0.05, "{}", fit.model);
    }

    #[test]
    fn lognormal_matches_closed_form_ml() {
        let rule = QuadratureRule::default();
        let s = draw(ModelSpec::Lognormal { mu: 0.0, gamma: 1.0 }, 5000, 2);
        let logs: Vec<f64> = s.values().iter().map(|x| x.ln()).collect();
        let n = logs.len() as f64;
        let mu = logs.iter().sum::<f64>() / n;
        let sd = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n).sqrt();
        let fit = fit_reference(Family::Lognormal, &s, &ReferenceConfig::default(), &rule).unwrap();
        let v = fit.model.params();
        assert!((v[0] - mu).abs() < 0.05 && (v[1] / sd - 1.0).abs() < 0.05, "{} vs ({mu}, {sd})", fit.model);
        assert!(v[0].abs() < 0.05 && (v[1] - 1.0).abs() < 0.05);
    }

    #[test]
    fn exponential_data_gives_unit_weibull_shape() {
        let rule = QuadratureRule::default();
        let s = draw(ModelSpec::Exponential { gamma: 2.0 }, 5000, 3).retagged(Domain::Amplitude);
        let fit = fit_reference(Family::Weibull, &s, &ReferenceConfig::default(), &rule).unwrap();
        assert!((fit.model.params()[0] - 1.0).abs() < 0.05, "{}", fit.model);
    }

    #[test]
    fn best_visited_beats_the_start() {
        let rule = QuadratureRule::default();
        let s = draw(ModelSpec::Rician { sigma: 1.0, big_delta: 3.0 }, 2000, 4);
        let fit = fit_reference(Family::Rician, &s, &ReferenceConfig { n_iter: 300, ..Default::default() }, &rule).unwrap();
        let v = fit.model.params();
        assert!((v[0] - 1.0).abs() < 0.1 && (v[1] - 3.0).abs() < 0.15, "{}", fit.model);
        assert!(fit.accepted > 0 && fit.accepted <= fit.proposed);
    }

    #[test]
    fn g0_keeps_looks_fixed() {
        let rule = QuadratureRule::default();
        let s = draw(ModelSpec::Rayleigh { sigma: 1.0 }, 1000, 5);
        let cfg = ReferenceConfig { n_iter: 200, looks: Some(2.0), ..Default::default() };
        let fit = fit_reference(Family::G0, &s, &cfg, &rule).unwrap();
        assert_eq!(fit.model.params()[0], 2.0);
    }

    #[test]
    fn rejects_ggrician_and_domain_mismatch() {
        let rule = QuadratureRule::default();
        let s = draw(ModelSpec::Rayleigh { sigma: 1.0 }, 100, 6);
        let cfg = ReferenceConfig::default();
        assert!(matches!(fit_reference(Family::GgRicianAmplitude, &s, &cfg, &rule), Err(Error::Usage(_))));
        assert!(matches!(fit_reference(Family::GammaLooks, &s, &cfg, &rule), Err(Error::Usage(_))));
    }
}
