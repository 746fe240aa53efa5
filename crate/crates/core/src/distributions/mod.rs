//! Densities, CDFs and likelihoods for the GG-Rician family and the reference
//! models it is compared against.
//!
//! All evaluation happens in log space. [`Density`] precomputes the
//! per-parameter constants once so that likelihood loops over many samples
//! only pay for the per-point work.

mod cdf;
mod closed_form;
mod ggrician;
mod stable_rayleigh;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Error, Result};
use crate::quadrature::QuadratureRule;
use crate::sampling::SampleSet;

pub use cdf::{cdf, cdf_many};
pub use closed_form::closed_form_pdf;
pub use ggrician::{check_node_count, ggrician_amplitude_pdf, ggrician_intensity_pdf, GgRicianKernel, NODE_CHECK_TOLERANCE};
pub use stable_rayleigh::{stable_rayleigh_pdf, stable_rayleigh_pdf_with_cutoff, SR_CUTOFF};

/// Whether values are amplitudes `r` or intensities `ν = r²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Amplitude,
    Intensity,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Amplitude => "amplitude",
            Domain::Intensity => "intensity",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "amplitude" => Ok(Domain::Amplitude),
            "intensity" => Ok(Domain::Intensity),
            other => Err(usage(format!("unknown domain '{other}' (expected amplitude or intensity)"))),
        }
    }
}

/// Shape `alpha`, scale `gamma` and location `delta` of a GG-Rician law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgRicianParams {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl GgRicianParams {
    pub fn new(alpha: f64, gamma: f64, delta: f64) -> Result<Self> {
        let p = Self { alpha, gamma, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.alpha.is_finite() && self.gamma.is_finite() && self.delta.is_finite();
        if !finite || self.alpha <= 0.0 || self.gamma <= 0.0 || self.delta < 0.0 {
            return Err(domain(format!(
                "GG-Rician parameters need alpha > 0, gamma > 0, delta >= 0 (finite); got {self}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for GgRicianParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(alpha={}, gamma={}, delta={})", self.alpha, self.gamma, self.delta)
    }
}

/// Distribution family tag, used for CLI names and for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GgRicianAmplitude,
    GgRicianIntensity,
    Rician,
    Rayleigh,
    NakagamiRice,
    LaplaceRician,
    Ggr,
    Weibull,
    Lognormal,
    G0,
    GeneralizedGamma,
    StableRayleigh,
    GammaLooks,
    Exponential,
}

impl Family {
    pub const ALL: [Family; 14] = [
        Family::GgRicianAmplitude,
        Family::GgRicianIntensity,
        Family::Rician,
        Family::Rayleigh,
        Family::NakagamiRice,
        Family::LaplaceRician,
        Family::Ggr,
        Family::Weibull,
        Family::Lognormal,
        Family::G0,
        Family::GeneralizedGamma,
        Family::StableRayleigh,
        Family::GammaLooks,
        Family::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::GgRicianAmplitude => "ggrician",
            Family::GgRicianIntensity => "ggrician-intensity",
            Family::Rician => "rician",
            Family::Rayleigh => "rayleigh",
            Family::NakagamiRice => "nakagami-rice",
            Family::LaplaceRician => "laplace-rician",
            Family::Ggr => "ggr",
            Family::Weibull => "weibull",
            Family::Lognormal => "lognormal",
            Family::G0 => "g0",
            Family::GeneralizedGamma => "ggd",
            Family::StableRayleigh => "sr",
            Family::GammaLooks => "gamma",
            Family::Exponential => "exponential",
        }
    }

    /// Names of the parameters, in the order used by [`ModelSpec::params`].
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::GgRicianAmplitude | Family::GgRicianIntensity => &["alpha", "gamma", "delta"],
            Family::Rician => &["sigma", "big_delta"],
            Family::Rayleigh => &["sigma"],
            Family::NakagamiRice => &["r", "big_delta"],
            Family::LaplaceRician => &["gamma", "delta"],
            Family::Ggr => &["alpha", "gamma"],
            Family::Weibull => &["alpha", "gamma"],
            Family::Lognormal => &["mu", "gamma"],
            Family::G0 => &["looks", "gamma", "alpha"],
            Family::GeneralizedGamma => &["power", "sigma", "kappa"],
            Family::StableRayleigh => &["alpha", "gamma"],
            Family::GammaLooks => &["looks", "gamma"],
            Family::Exponential => &["gamma"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    /// The data domain a family is defined on, or `None` for the empirical
    /// families (Weibull, lognormal, 𝒢₀, GΓD) that are applied to either.
    pub fn domain(self) -> Option<Domain> {
        match self {
            Family::GgRicianIntensity
            | Family::NakagamiRice
            | Family::GammaLooks
            | Family::Exponential => Some(Domain::Intensity),
            Family::Weibull | Family::Lognormal | Family::G0 | Family::GeneralizedGamma => None,
            _ => Some(Domain::Amplitude),
        }
    }

    /// The GG-Rician family matching a data domain.
    pub fn ggrician(domain: Domain) -> Family {
        match domain {
            Domain::Amplitude => Family::GgRicianAmplitude,
            Domain::Intensity => Family::GgRicianIntensity,
        }
    }

    pub fn is_ggrician(self) -> bool {
        matches!(self, Family::GgRicianAmplitude | Family::GgRicianIntensity)
    }

    pub fn supported_names() -> String {
        Family::ALL.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let alias = match key.as_str() {
            "gg-rician" | "ggrician-amplitude" => "ggrician",
            "gamma-looks" => "gamma",
            "g-gamma" | "generalized-gamma" | "gammad" => "ggd",
            "stable-rayleigh" => "sr",
            "nakagami" | "nakagamirice" => "nakagami-rice",
            other => other,
        };
        Family::ALL.iter().copied().find(|f| f.name() == alias).ok_or_else(|| {
            usage(format!("unknown model '{s}'; supported: {}", Family::supported_names()))
        })
    }
}

/// A distribution family together with its parameter values.
///
/// Parameter conventions follow the usual SAR literature forms: Rician uses
/// `(σ, Δ)` with `Δ = √2 δ`; Nakagami-Rice uses `(R, Δ)`; 𝒢₀ stores its shape
/// `alpha` as a negative number; `GammaLooks` is the L-look intensity law with
/// rate `γL`; `Exponential` has mean `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    GgRicianAmplitude(GgRicianParams),
    GgRicianIntensity(GgRicianParams),
    Rician { sigma: f64, big_delta: f64 },
    Rayleigh { sigma: f64 },
    NakagamiRice { r: f64, big_delta: f64 },
    LaplaceRician { gamma: f64, delta: f64 },
    Ggr { alpha: f64, gamma: f64 },
    Weibull { alpha: f64, gamma: f64 },
    Lognormal { mu: f64, gamma: f64 },
    G0 { looks: f64, gamma: f64, alpha: f64 },
    GeneralizedGamma { power: f64, sigma: f64, kappa: f64 },
    StableRayleigh { alpha: f64, gamma: f64 },
    GammaLooks { looks: f64, gamma: f64 },
    Exponential { gamma: f64 },
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::GgRicianAmplitude(_) => Family::GgRicianAmplitude,
            ModelSpec::GgRicianIntensity(_) => Family::GgRicianIntensity,
            ModelSpec::Rician { .. } => Family::Rician,
            ModelSpec::Rayleigh { .. } => Family::Rayleigh,
            ModelSpec::NakagamiRice { .. } => Family::NakagamiRice,
            ModelSpec::LaplaceRician { .. } => Family::LaplaceRician,
            ModelSpec::Ggr { .. } => Family::Ggr,
            ModelSpec::Weibull { .. } => Family::Weibull,
            ModelSpec::Lognormal { .. } => Family::Lognormal,
            ModelSpec::G0 { .. } => Family::G0,
            ModelSpec::GeneralizedGamma { .. } => Family::GeneralizedGamma,
            ModelSpec::StableRayleigh { .. } => Family::StableRayleigh,
            ModelSpec::GammaLooks { .. } => Family::GammaLooks,
            ModelSpec::Exponential { .. } => Family::Exponential,
        }
    }

    /// Parameter values in [`Family::param_names`] order.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            ModelSpec::GgRicianAmplitude(p) | ModelSpec::GgRicianIntensity(p) => {
                vec![p.alpha, p.gamma, p.delta]
            }
            ModelSpec::Rician { sigma, big_delta } => vec![sigma, big_delta],
            ModelSpec::Rayleigh { sigma } => vec![sigma],
            ModelSpec::NakagamiRice { r, big_delta } => vec![r, big_delta],
            ModelSpec::LaplaceRician { gamma, delta } => vec![gamma, delta],
            ModelSpec::Ggr { alpha, gamma } => vec![alpha, gamma],
            ModelSpec::Weibull { alpha, gamma } => vec![alpha, gamma],
            ModelSpec::Lognormal { mu, gamma } => vec![mu, gamma],
            ModelSpec::G0 { looks, gamma, alpha } => vec![looks, gamma, alpha],
            ModelSpec::GeneralizedGamma { power, sigma, kappa } => vec![power, sigma, kappa],
            ModelSpec::StableRayleigh { alpha, gamma } => vec![alpha, gamma],
            ModelSpec::GammaLooks { looks, gamma } => vec![looks, gamma],
            ModelSpec::Exponential { gamma } => vec![gamma],
        }
    }

    /// Builds and validates a model from a family and its parameter vector.
    pub fn from_params(family: Family, v: &[f64]) -> Result<Self> {
        if v.len() != family.n_params() {
            return Err(usage(format!(
                "{family} takes {} parameters ({}), got {}",
                family.n_params(),
                family.param_names().join(", "),
                v.len()
            )));
        }
        let m = match family {
            Family::GgRicianAmplitude => {
                ModelSpec::GgRicianAmplitude(GgRicianParams { alpha: v[0], gamma: v[1], delta: v[2] })
            }
            Family::GgRicianIntensity => {
                ModelSpec::GgRicianIntensity(GgRicianParams { alpha: v[0], gamma: v[1], delta: v[2] })
            }
            Family::Rician => ModelSpec::Rician { sigma: v[0], big_delta: v[1] },
            Family::Rayleigh => ModelSpec::Rayleigh { sigma: v[0] },
            Family::NakagamiRice => ModelSpec::NakagamiRice { r: v[0], big_delta: v[1] },
            Family::LaplaceRician => ModelSpec::LaplaceRician { gamma: v[0], delta: v[1] },
            Family::Ggr => ModelSpec::Ggr { alpha: v[0], gamma: v[1] },
            Family::Weibull => ModelSpec::Weibull { alpha: v[0], gamma: v[1] },
            Family::Lognormal => ModelSpec::Lognormal { mu: v[0], gamma: v[1] },
            Family::G0 => ModelSpec::G0 { looks: v[0], gamma: v[1], alpha: v[2] },
            Family::GeneralizedGamma => {
                ModelSpec::GeneralizedGamma { power: v[0], sigma: v[1], kappa: v[2] }
            }
            Family::StableRayleigh => ModelSpec::StableRayleigh { alpha: v[0], gamma: v[1] },
            Family::GammaLooks => ModelSpec::GammaLooks { looks: v[0], gamma: v[1] },
            Family::Exponential => ModelSpec::Exponential { gamma: v[0] },
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks the parameter-domain constraints of the family.
    pub fn validate(&self) -> Result<()> {
        let family = self.family();
        let params = self.params();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(domain(format!("{family}: parameters must be finite, got {params:?}")));
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 {
                Ok(())
            } else {
                Err(domain(format!("{family}: {name} must be > 0, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| -> Result<()> {
            if v >= 0.0 {
                Ok(())
            } else {
                Err(domain(format!("{family}: {name} must be >= 0, got {v}")))
            }
        };
        match *self {
            ModelSpec::GgRicianAmplitude(p) | ModelSpec::GgRicianIntensity(p) => p.validate(),
            ModelSpec::Rician { sigma, big_delta } => {
                positive("sigma", sigma)?;
                non_negative("big_delta", big_delta)
            }
            ModelSpec::Rayleigh { sigma } => positive("sigma", sigma),
            ModelSpec::NakagamiRice { r, big_delta } => {
                positive("r", r)?;
                non_negative("big_delta", big_delta)
            }
            ModelSpec::LaplaceRician { gamma, delta } => {
                positive("gamma", gamma)?;
                non_negative("delta", delta)
            }
            ModelSpec::Ggr { alpha, gamma } | ModelSpec::Weibull { alpha, gamma } => {
                positive("alpha", alpha)?;
                positive("gamma", gamma)
            }
            ModelSpec::Lognormal { gamma, .. } => positive("gamma", gamma),
            ModelSpec::G0 { looks, gamma, alpha } => {
                positive("looks", looks)?;
                positive("gamma", gamma)?;
                if alpha < 0.0 {
                    Ok(())
                } else {
                    Err(domain(format!("g0: alpha must be < 0, got {alpha}")))
                }
            }
            ModelSpec::GeneralizedGamma { power, sigma, kappa } => {
                positive("power", power)?;
                positive("sigma", sigma)?;
                positive("kappa", kappa)
            }
            ModelSpec::StableRayleigh { alpha, gamma } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(domain(format!("sr: alpha must lie in (0, 2], got {alpha}")));
                }
                positive("gamma", gamma)
            }
            ModelSpec::GammaLooks { looks, gamma } => {
                if looks < 1.0 {
                    return Err(domain(format!("gamma: looks must be >= 1, got {looks}")));
                }
                positive("gamma", gamma)
            }
            ModelSpec::Exponential { gamma } => positive("gamma", gamma),
        }
    }

    /// Number of parameters, for information criteria.
    pub fn n_params(&self) -> usize {
        self.family().n_params()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = self.family();
        write!(f, "{family}(")?;
        for (i, (n, v)) in family.param_names().iter().zip(self.params()).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        f.write_str(")")
    }
}

/// JSON form: `{"family": "weibull", "params": {"alpha": 2.0, "gamma": 1.0}}`.
impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::{SerializeMap, SerializeStruct};

        struct Params<'a>(&'a ModelSpec);
        impl Serialize for Params<'_> {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let names = self.0.family().param_names();
                let mut map = s.serialize_map(Some(names.len()))?;
                for (n, v) in names.iter().zip(self.0.params()) {
                    map.serialize_entry(n, &v)?;
                }
                map.end()
            }
        }

        let mut st = s.serialize_struct("ModelSpec", 2)?;
        st.serialize_field("family", self.family().name())?;
        st.serialize_field("params", &Params(self))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            family: String,
            params: serde_json::Map<String, serde_json::Value>,
        }
        let raw = Raw::deserialize(d)?;
        let family: Family = raw.family.parse().map_err(serde::de::Error::custom)?;
        let values = family
            .param_names()
            .iter()
            .map(|n| {
                raw.params
                    .get(*n)
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| serde::de::Error::custom(format!("missing parameter '{n}'")))
            })
            .collect::<std::result::Result<Vec<f64>, D::Error>>()?;
        ModelSpec::from_params(family, &values).map_err(serde::de::Error::custom)
    }
}

/// A model prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Density<'q> {
    model: ModelSpec,
    kind: Kind<'q>,
}

#[derive(Debug, Clone)]
enum Kind<'q> {
    Amplitude(GgRicianKernel<'q>),
    Intensity(GgRicianKernel<'q>),
    Stable { alpha: f64, gamma: f64 },
    Closed(closed_form::Prepared),
}

impl<'q> Density<'q> {
    pub fn new(model: &ModelSpec, rule: &'q QuadratureRule) -> Result<Self> {
        model.validate()?;
        let kind = match *model {
            ModelSpec::GgRicianAmplitude(p) => Kind::Amplitude(GgRicianKernel::new(p, rule)),
            ModelSpec::GgRicianIntensity(p) => Kind::Intensity(GgRicianKernel::new(p, rule)),
            ModelSpec::Ggr { alpha, gamma } => Kind::Amplitude(GgRicianKernel::new(
                GgRicianParams { alpha, gamma, delta: 0.0 },
                rule,
            )),
            ModelSpec::LaplaceRician { gamma, delta } => Kind::Amplitude(GgRicianKernel::new(
                GgRicianParams { alpha: 1.0, gamma, delta },
                rule,
            )),
            ModelSpec::StableRayleigh { alpha, gamma } => Kind::Stable { alpha, gamma },
            _ => Kind::Closed(closed_form::Prepared::new(model)?),
        };
        Ok(Self { model: *model, kind })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// Natural log of the density at `x >= 0` (`-inf` where the density is 0).
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x >= 0.0) || x.is_infinite() {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            Kind::Amplitude(k) => k.ln_amplitude(x),
            Kind::Intensity(k) => k.ln_intensity(x),
            Kind::Stable { alpha, gamma } => {
                let v = stable_rayleigh::sr_pdf(x, *alpha, *gamma, SR_CUTOFF);
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::Closed(c) => c.ln_pdf(x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }
}

/// Density of any model at `x >= 0`.
pub fn pdf(model: &ModelSpec, x: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("density argument must be >= 0, got {x}")));
    }
    Ok(Density::new(model, rule)?.pdf(x))
}

/// Sum of log-densities of the samples under `model`.
///
/// Returns `-inf` (not an error) when any sample has zero density; the MH
/// sampler relies on this to reject absurd candidates. The sum is taken in
/// sample order so the result does not depend on thread scheduling.
pub fn log_likelihood(model: &ModelSpec, samples: &SampleSet, rule: &QuadratureRule) -> Result<f64> {
    if let Some(d) = model.family().domain() {
        if d != samples.domain() {
            return Err(usage(format!(
                "{} model expects {d} data but the samples are tagged {}",
                model.family(),
                samples.domain()
            )));
        }
    }
    let density = Density::new(model, rule)?;
    Ok(sum_ln_pdf(&density, samples.values()))
}

pub(crate) fn sum_ln_pdf(density: &Density<'_>, values: &[f64]) -> f64 {
    const PAR_THRESHOLD: usize = 256;
    let terms: Vec<f64> = if values.len() >= PAR_THRESHOLD {
        values.par_iter().map(|&x| density.ln_pdf(x)).collect()
    } else {
        values.iter().map(|&x| density.ln_pdf(x)).collect()
    };
    let mut total = 0.0;
    for t in terms {
        if t.is_nan() || t == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        total += t;
    }
    total
}
