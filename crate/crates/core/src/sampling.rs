//! Seeded random variates: generalized-Gaussian components, synthetic
//! GG-Rician amplitudes and the reference families used as test oracles.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{Domain, GgRicianParams, ModelSpec};
use crate::error::{domain, usage, Result};

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Streams with the same seed and different ids are independent ChaCha
/// streams, so parallel tasks can each own one without coordination.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Non-empty, finite, nonnegative observations tagged with their domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    values: Vec<f64>,
    domain: Domain,
    provenance: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, domain: Domain, provenance: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(usage("sample set is empty"));
        }
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(self::domain(format!(
                "sample {i} must be finite and >= 0, got {}",
                values[i]
            )));
        }
        Ok(Self { values, domain, provenance: provenance.into() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for the usual `len`/`is_empty` pairing.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same values under a different domain tag.
    pub fn retagged(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    /// Squares amplitudes into intensities or takes roots the other way.
    pub fn converted(&self, to: Domain) -> Self {
        let values = match (self.domain, to) {
            (Domain::Amplitude, Domain::Intensity) => self.values.iter().map(|r| r * r).collect(),
            (Domain::Intensity, Domain::Amplitude) => self.values.iter().map(|v| v.sqrt()).collect(),
            _ => self.values.clone(),
        };
        Self { values, domain: to, provenance: self.provenance.clone() }
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        Err(usage("sample count must be >= 1"))
    } else {
        Ok(())
    }
}

// X = δ + γ S G^{1/α}, G ~ Gamma(1/α, 1), S = ±1
struct GgDraw {
    gamma: Gamma<f64>,
    inv_alpha: f64,
    scale: f64,
    delta: f64,
}

impl GgDraw {
    fn new(alpha: f64, scale: f64, delta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() || !(scale > 0.0) || !scale.is_finite() || !delta.is_finite() {
            return Err(domain(format!(
                "generalized Gaussian needs alpha > 0, gamma > 0, finite delta; got ({alpha}, {scale}, {delta})"
            )));
        }
        let gamma = Gamma::new(1.0 / alpha, 1.0).map_err(|e| domain(e.to_string()))?;
        Ok(Self { gamma, inv_alpha: 1.0 / alpha, scale, delta })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g: f64 = self.gamma.sample(rng);
        let magnitude = self.scale * g.powf(self.inv_alpha);
        if rng.random::<bool>() {
            self.delta + magnitude
        } else {
            self.delta - magnitude
        }
    }
}

/// `n` generalized-Gaussian draws with shape `alpha`, scale `gamma`, location `delta`.
pub fn sample_gg(n: usize, alpha: f64, gamma: f64, delta: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    check_count(n)?;
    let gg = GgDraw::new(alpha, gamma, delta)?;
    Ok((0..n).map(|_| gg.draw(rng)).collect())
}

/// `n` GG-Rician amplitudes `√(x² + y²)` from independent GG components.
pub fn sample_ggrician(n: usize, p: &GgRicianParams, rng: &mut RngStream) -> Result<SampleSet> {
    check_count(n)?;
    p.validate()?;
    let gg = GgDraw::new(p.alpha, p.gamma, p.delta)?;
    let values = (0..n)
        .map(|_| {
            let x = gg.draw(rng);
            let y = gg.draw(rng);
            x.hypot(y)
        })
        .collect();
    let provenance = format!(
        "ggrician alpha={} gamma={} delta={} n={n} seed={} stream={}",
        p.alpha,
        p.gamma,
        p.delta,
        rng.seed(),
        rng.stream_id()
    );
    SampleSet::new(values, Domain::Amplitude, provenance)
}

/// `n` draws from a reference family.
///
/// Supports Weibull, lognormal, Rayleigh, Rician, exponential and the L-look
/// gamma law. Weibull and lognormal samples are tagged as amplitudes.
pub fn sample_reference(m: &ModelSpec, n: usize, rng: &mut RngStream) -> Result<SampleSet> {
    check_count(n)?;
    m.validate()?;
    let uniform = |rng: &mut RngStream| -> f64 { rng.sample(Open01) };
    let values: Vec<f64> = match *m {
        ModelSpec::Weibull { alpha, gamma } => {
            (0..n).map(|_| gamma * (-uniform(rng).ln()).powf(1.0 / alpha)).collect()
        }
        ModelSpec::Exponential { gamma } => (0..n).map(|_| -gamma * uniform(rng).ln()).collect(),
        ModelSpec::Rayleigh { sigma } => {
            (0..n).map(|_| sigma * (-2.0 * uniform(rng).ln()).sqrt()).collect()
        }
        ModelSpec::Lognormal { mu, gamma } => (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                (mu + gamma * z).exp()
            })
            .collect(),
        ModelSpec::Rician { sigma, big_delta } => (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (sigma * a + big_delta).hypot(sigma * b)
            })
            .collect(),
        ModelSpec::GammaLooks { looks, gamma } => {
            let g = Gamma::new(looks, 1.0 / (gamma * looks)).map_err(|e| domain(e.to_string()))?;
            (0..n).map(|_| g.sample(rng)).collect()
        }
        other => {
            return Err(usage(format!(
                "no sampler for {}; supported: weibull, lognormal, rayleigh, rician, exponential, gamma",
                other.family()
            )))
        }
    };
    let tag = m.family().domain().unwrap_or(Domain::Amplitude);
    SampleSet::new(values, tag, format!("{m} n={n} seed={} stream={}", rng.seed(), rng.stream_id()))
}
