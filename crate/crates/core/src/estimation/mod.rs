//! Parameter estimation: the three-move Metropolis-Hastings sampler for the
//! GG-Rician family and a random-walk maximum-likelihood search for the
//! reference families.

mod reference;

use std::fmt;
use std::io::Write;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{sum_ln_pdf, Density, Domain, GgRicianParams, ModelSpec};
use crate::error::{usage, Error, Result};
use crate::quadrature::QuadratureRule;
use crate::sampling::{RngStream, SampleSet};
use crate::specfun::normal_cdf;

pub use reference::{fit_reference, ReferenceConfig, ReferenceFit};

/// One of the three single-parameter updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    /// Update δ with a uniform window of half-width ε.
    Delta,
    /// Update γ with a Gaussian step of standard deviation ξ.
    Gamma,
    /// Update α with a uniform window of half-width η.
    Alpha,
}

impl Move {
    pub const ALL: [Move; 3] = [Move::Delta, Move::Gamma, Move::Alpha];

    pub fn label(self) -> &'static str {
        match self {
            Move::Delta => "M1",
            Move::Gamma => "M2",
            Move::Alpha => "M3",
        }
    }

    fn index(self) -> usize {
        match self {
            Move::Delta => 0,
            Move::Gamma => 1,
            Move::Alpha => 2,
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Sampler settings. [`Default`] gives 1000 iterations, 500 burn-in,
/// ε = 2.5, ξ = 3, η = 0.5, start (α, δ, γ) = (2, 10, 10) and equiprobable
/// moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub epsilon: f64,
    pub xi: f64,
    pub eta: f64,
    pub init_alpha: f64,
    pub init_delta: f64,
    pub init_gamma: f64,
    /// Probabilities of the δ, γ and α moves.
    pub move_probs: [f64; 3],
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self {
            n_iter: 1000,
            burn_in: 500,
            epsilon: 2.5,
            xi: 3.0,
            eta: 0.5,
            init_alpha: 2.0,
            init_delta: 10.0,
            init_gamma: 10.0,
            move_probs: [1.0 / 3.0; 3],
            seed: 0,
            stream_id: 0,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(usage("n_iter must be at least 1"));
        }
        if self.burn_in >= self.n_iter {
            return Err(usage(format!(
                "burn_in ({}) must be smaller than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        for (name, v) in [("epsilon", self.epsilon), ("xi", self.xi), ("eta", self.eta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(usage(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        GgRicianParams::new(self.init_alpha, self.init_gamma, self.init_delta)
            .map_err(|e| usage(format!("invalid starting point: {e}")))?;
        if self.move_probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(usage(format!("move probabilities must be >= 0, got {:?}", self.move_probs)));
        }
        let total: f64 = self.move_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(usage(format!("move probabilities must sum to 1, got {total}")));
        }
        Ok(())
    }

    pub fn init(&self) -> GgRicianParams {
        GgRicianParams { alpha: self.init_alpha, gamma: self.init_gamma, delta: self.init_delta }
    }

    /// Replaces the starting point with a Rician moment match (`alpha = 2`).
    ///
    /// With `m2 = E[r²]` and `m4 = E[r⁴]` of the amplitudes, a Rician law has
    /// `Δ⁴ = 2 m2² − m4` and `2σ² = m2 − Δ²`; then `delta = Δ/√2` and
    /// `gamma = √(2σ²)`. Useful when the data scale is far from the default
    /// start, where chains can settle in a large-`alpha` mode.
    pub fn start_from_moments(self, s: &SampleSet) -> Self {
        // intensities are squared amplitudes
        let (m2, m4) = match s.domain() {
            Domain::Amplitude => moment_pair(s.values().iter().map(|r| r * r)),
            Domain::Intensity => moment_pair(s.values().iter().copied()),
        };
        let big_delta2 = (2.0 * m2 * m2 - m4).max(0.0).sqrt().min(0.99 * m2);
        let gamma = (m2 - big_delta2).sqrt();
        let delta = (big_delta2 / 2.0).sqrt();
        if gamma > 0.0 && gamma.is_finite() && delta.is_finite() {
            Self { init_alpha: 2.0, init_gamma: gamma, init_delta: delta, ..self }
        } else {
            self
        }
    }
}

// mean of x and of x² for nonnegative x
fn moment_pair(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut a, mut b) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        a += x;
        b += x * x;
    }
    (a / n, b / n)
}

/// Proposed/accepted tally for one move.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveTally {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveTally {
    /// Acceptance rate, or 0 when the move was never proposed.
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Per-parameter posterior standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamStd {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
}

/// Chain history. Entry `i` is the state after iteration `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub loglik: Vec<f64>,
    pub moves: Vec<Move>,
    pub accepted: Vec<bool>,
}

impl Traces {
    fn with_capacity(n: usize) -> Self {
        Self {
            alpha: Vec::with_capacity(n),
            delta: Vec::with_capacity(n),
            gamma: Vec::with_capacity(n),
            loglik: Vec::with_capacity(n),
            moves: Vec::with_capacity(n),
            accepted: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Writes `iteration,alpha,delta,gamma,loglik,move,accepted` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,alpha,delta,gamma,loglik,move,accepted")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                i + 1,
                self.alpha[i],
                self.delta[i],
                self.gamma[i],
                self.loglik[i],
                self.moves[i],
                u8::from(self.accepted[i])
            )?;
        }
        Ok(())
    }
}

/// Output of [`mh_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub domain: Domain,
    pub config: MhConfig,
    pub traces: Traces,
    pub posterior_mean: GgRicianParams,
    pub posterior_std: ParamStd,
    /// Tallies for the δ, γ and α moves, in that order.
    pub accept_counts: [MoveTally; 3],
    pub final_loglik: f64,
    pub n_samples: usize,
}

impl FitResult {
    /// The fitted model, at the posterior mean.
    pub fn model(&self) -> ModelSpec {
        match self.domain {
            Domain::Amplitude => ModelSpec::GgRicianAmplitude(self.posterior_mean),
            Domain::Intensity => ModelSpec::GgRicianIntensity(self.posterior_mean),
        }
    }

    pub fn tally(&self, m: Move) -> MoveTally {
        self.accept_counts[m.index()]
    }

    /// Compact JSON-friendly view without the traces.
    pub fn summary(&self) -> FitSummary {
        let rate = |m: Move| MoveRate { move_label: m.label().to_string(), tally: self.tally(m), rate: self.tally(m).rate() };
        FitSummary {
            domain: self.domain,
            n_samples: self.n_samples,
            posterior_mean: self.posterior_mean,
            posterior_std: self.posterior_std,
            acceptance: Move::ALL.iter().map(|&m| rate(m)).collect(),
            final_loglik: self.final_loglik,
            config: self.config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRate {
    #[serde(rename = "move")]
    pub move_label: String,
    #[serde(flatten)]
    pub tally: MoveTally,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub domain: Domain,
    pub n_samples: usize,
    pub posterior_mean: GgRicianParams,
    pub posterior_std: ParamStd,
    pub acceptance: Vec<MoveRate>,
    pub final_loglik: f64,
    pub config: MhConfig,
}

/// Log of the MH ratio for a single-parameter move, before `min(1, ·)`.
///
/// Includes the Jeffreys prior ratio `γ/γ*` for [`Move::Gamma`] and the
/// Hastings correction for proposals truncated at zero: a uniform window
/// clipped at 0 has width `min(2w, x + w)`, and the Gaussian step renormalized
/// to the positive axis has mass `Φ(γ/ξ)`.
pub fn acceptance_log_ratio(
    mv: Move,
    current: &GgRicianParams,
    candidate: &GgRicianParams,
    loglik_current: f64,
    loglik_candidate: f64,
    cfg: &MhConfig,
) -> f64 {
    let window = |x: f64, w: f64| (2.0 * w).min(x + w);
    let correction = match mv {
        Move::Delta => {
            window(current.delta, cfg.epsilon).ln() - window(candidate.delta, cfg.epsilon).ln()
        }
        Move::Alpha => window(current.alpha, cfg.eta).ln() - window(candidate.alpha, cfg.eta).ln(),
        Move::Gamma => {
            let prior = (current.gamma / candidate.gamma).ln();
            let mass = normal_cdf(current.gamma / cfg.xi).ln() - normal_cdf(candidate.gamma / cfg.xi).ln();
            prior + mass
        }
    };
    loglik_candidate - loglik_current + correction
}

/// Posterior means and population standard deviations over the trace entries
/// after the first `burn_in`.
pub fn posterior_summary(t: &Traces, burn_in: usize) -> Result<(GgRicianParams, ParamStd)> {
    if burn_in >= t.len() {
        return Err(usage(format!("burn_in ({burn_in}) must be smaller than the trace length ({})", t.len())));
    }
    let stats = |v: &[f64]| {
        let tail = &v[burn_in..];
        let n = tail.len() as f64;
        let mean = tail.iter().sum::<f64>() / n;
        let var = tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (alpha, sa) = stats(&t.alpha);
    let (delta, sd) = stats(&t.delta);
    let (gamma, sg) = stats(&t.gamma);
    Ok((GgRicianParams { alpha, gamma, delta }, ParamStd { alpha: sa, gamma: sg, delta: sd }))
}

/// Normalized mean-square error `Σ(θ̂ − θ)² / Σθ²` over (α, δ, γ).
pub fn nmse(truth: &GgRicianParams, est: &GgRicianParams) -> f64 {
    let t = [truth.alpha, truth.delta, truth.gamma];
    let e = [est.alpha, est.delta, est.gamma];
    let num: f64 = t.iter().zip(&e).map(|(a, b)| (b - a).powi(2)).sum();
    let den: f64 = t.iter().map(|a| a * a).sum();
    num / den
}

pub(crate) fn check_not_degenerate(values: &[f64]) -> Result<()> {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::Degenerate(format!(
            "all {} samples equal {first}; the scale would collapse to 0",
            values.len()
        )));
    }
    Ok(())
}

fn ggrician_model(domain: Domain, p: GgRicianParams) -> ModelSpec {
    match domain {
        Domain::Amplitude => ModelSpec::GgRicianAmplitude(p),
        Domain::Intensity => ModelSpec::GgRicianIntensity(p),
    }
}

/// Draws from `U(x - w, x + w)` restricted to `(0, ∞)`.
fn clipped_uniform(x: f64, w: f64, rng: &mut RngStream) -> f64 {
    let lo = (x - w).max(0.0);
    let u: f64 = rng.sample(Open01);
    lo + u * (x + w - lo)
}

/// Draws from `N(x, s²)` restricted to `(0, ∞)`. The positive mass is at
/// least one half since `x > 0`, so plain rejection is cheap.
fn positive_normal(x: f64, s: f64, rng: &mut RngStream) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = x + s * z;
        if v > 0.0 {
            return v;
        }
    }
}

fn pick_move(probs: &[f64; 3], rng: &mut RngStream) -> Move {
    let u: f64 = rng.sample(Open01);
    if u < probs[0] {
        Move::Delta
    } else if u < probs[0] + probs[1] || probs[2] == 0.0 {
        Move::Gamma
    } else {
        Move::Alpha
    }
}

/// The chain itself, generic over the log-likelihood so it can be exercised
/// with stub targets.
pub(crate) fn run_chain<F>(cfg: &MhConfig, mut loglik: F) -> Result<(Traces, [MoveTally; 3], f64)>
where
    F: FnMut(&GgRicianParams) -> f64,
{
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed, cfg.stream_id);
    let mut cur = cfg.init();
    let mut cur_ll = loglik(&cur);
    if !cur_ll.is_finite() {
        return Err(Error::Init(format!(
            "log-likelihood at the starting point {cur} is {cur_ll}; choose a different start"
        )));
    }
    let mut traces = Traces::with_capacity(cfg.n_iter);
    let mut tally = [MoveTally::default(); 3];
    for _ in 0..cfg.n_iter {
        let mv = pick_move(&cfg.move_probs, &mut rng);
        let mut cand = cur;
        match mv {
            Move::Delta => cand.delta = clipped_uniform(cur.delta, cfg.epsilon, &mut rng),
            Move::Gamma => cand.gamma = positive_normal(cur.gamma, cfg.xi, &mut rng),
            Move::Alpha => cand.alpha = clipped_uniform(cur.alpha, cfg.eta, &mut rng),
        }
        let ln_u: f64 = rng.sample::<f64, _>(Open01).ln();
        let cand_ll = loglik(&cand);
        let ratio = acceptance_log_ratio(mv, &cur, &cand, cur_ll, cand_ll, cfg);
        let accept = cand_ll.is_finite() && ln_u <= ratio;
        tally[mv.index()].proposed += 1;
        if accept {
            tally[mv.index()].accepted += 1;
            cur = cand;
            cur_ll = cand_ll;
        }
        traces.alpha.push(cur.alpha);
        traces.delta.push(cur.delta);
        traces.gamma.push(cur.gamma);
        traces.loglik.push(cur_ll);
        traces.moves.push(mv);
        traces.accepted.push(accept);
    }
    Ok((traces, tally, cur_ll))
}

/// Fits GG-Rician parameters to `s` with the three-move sampler.
///
/// The likelihood is the amplitude or intensity density according to the
/// sample domain. The prior is flat in α and δ and `1/γ` in γ.
pub fn mh_fit(s: &SampleSet, cfg: &MhConfig, rule: &QuadratureRule) -> Result<FitResult> {
    cfg.validate()?;
    check_not_degenerate(s.values())?;
    let domain = s.domain();
    let loglik = |p: &GgRicianParams| match Density::new(&ggrician_model(domain, *p), rule) {
        Ok(d) => sum_ln_pdf(&d, s.values()),
        Err(_) => f64::NEG_INFINITY,
    };
    let (traces, accept_counts, final_loglik) = run_chain(cfg, loglik)?;
    let (posterior_mean, posterior_std) = posterior_summary(&traces, cfg.burn_in)?;
    Ok(FitResult {
        domain,
        config: *cfg,
        traces,
        posterior_mean,
        posterior_std,
        accept_counts,
        final_loglik,
        n_samples: s.len(),
    })
}
