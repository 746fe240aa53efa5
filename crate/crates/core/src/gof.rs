//! Goodness-of-fit measures and model scoring.
//!
//! Histograms use Sturges' bin count over `[min, max]` with half-open bins and
//! a closed last bin. KL and Bhattacharyya distance compare bin masses, with
//! the model's masses renormalized over the histogram support. RMSE and MAE
//! compare the model density with the histogram density at bin centers.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distributions::{cdf_many, log_likelihood, Density, ModelSpec};
use crate::error::{domain, usage, Error, Result};
use crate::quadrature::QuadratureRule;
use crate::sampling::SampleSet;
use crate::specfun::ks_sf;

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Empirical probability of each bin.
    pub fn masses(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Sturges' rule, `ceil(1 + log₂ n)`.
pub fn sturges_bin_count(n: usize) -> usize {
    assert!(n >= 1, "sturges_bin_count needs at least one sample");
    (1.0 + (n as f64).log2()).ceil() as usize
}

/// Sturges histogram of the values.
pub fn build_histogram(values: &[f64]) -> Result<Histogram> {
    if values.is_empty() {
        return Err(usage("cannot build a histogram from no samples"));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(hi > lo) {
        return Err(Error::Degenerate(format!("all samples equal {lo}; histogram has zero width")));
    }
    let k = sturges_bin_count(values.len());
    let width = (hi - lo) / k as f64;
    let mut edges: Vec<f64> = (0..=k).map(|i| lo + width * i as f64).collect();
    edges[k] = hi;
    let mut counts = vec![0u64; k];
    for &x in values {
        let mut b = (((x - lo) / width) as usize).min(k - 1);
        // float rounding can land a value one bin off its edge
        while b > 0 && x < edges[b] {
            b -= 1;
        }
        while b + 1 < k && x >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    let n = values.len() as f64;
    let densities = counts.iter().zip(edges.windows(2)).map(|(&c, w)| c as f64 / (n * (w[1] - w[0]))).collect();
    Ok(Histogram { edges, counts, densities })
}

/// Model probability of each bin, renormalized to sum to 1 over the
/// histogram's support. All zeros if the model puts no mass there.
pub fn model_bin_masses(h: &Histogram, m: &ModelSpec, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let f = cdf_many(m, &h.edges, rule)?;
    let raw: Vec<f64> = f.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(raw.iter().map(|q| q / total).collect())
}

/// `Σ p ln(p/q)` over bins with `p > 0`; `+inf` if such a bin has `q = 0`.
pub fn kl_from_masses(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pb, &qb) in p.iter().zip(q) {
        if pb > 0.0 {
            if !(qb > 0.0) {
                return f64::INFINITY;
            }
            total += pb * (pb / qb).ln();
        }
    }
    total.max(0.0)
}

/// `-ln Σ √(p q)`.
pub fn bhattacharyya_from_masses(p: &[f64], q: &[f64]) -> f64 {
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    if bc > 0.0 {
        (-bc.ln()).max(0.0)
    } else {
        f64::INFINITY
    }
}

/// KL divergence of the model's bin masses from the histogram's.
pub fn kl_divergence(h: &Histogram, m: &ModelSpec, rule: &QuadratureRule) -> Result<f64> {
    Ok(kl_from_masses(&h.masses(), &model_bin_masses(h, m, rule)?))
}

/// Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_test(values: &[f64], m: &ModelSpec, rule: &QuadratureRule) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(usage("KS test needs at least one sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let f = cdf_many(m, &sorted, rule)?;
    Ok(ks_from_sorted_cdf(&f))
}

/// KS statistic and p-value from model CDF values at the sorted samples.
pub fn ks_from_sorted_cdf(f: &[f64]) -> (f64, f64) {
    let n = f.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &fi) in f.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - fi).max(fi - i as f64 / n);
    }
    (d, ks_sf(n.sqrt() * d))
}

/// RMSE and MAE of the model density against the histogram densities at bin
/// centers, and the Bhattacharyya distance between bin masses.
pub fn curve_errors(h: &Histogram, m: &ModelSpec, rule: &QuadratureRule) -> Result<(f64, f64, f64)> {
    let density = Density::new(m, rule)?;
    let model: Vec<f64> = h.centers().into_iter().map(|c| density.pdf(c)).collect();
    let (rmse, mae) = rmse_mae(&model, &h.densities);
    let bd = bhattacharyya_from_masses(&h.masses(), &model_bin_masses(h, m, rule)?);
    Ok((rmse, mae, bd))
}

/// Root-mean-square and mean absolute difference of two equal-length curves.
pub fn rmse_mae(a: &[f64], b: &[f64]) -> (f64, f64) {
    let k = a.len() as f64;
    let (sq, abs) = a.iter().zip(b).fold((0.0, 0.0), |(sq, abs), (x, y)| {
        let e = x - y;
        (sq + e * e, abs + e.abs())
    });
    ((sq / k).sqrt(), abs / k)
}

/// Corrected Akaike information criterion.
pub fn aicc(loglik: f64, k: usize, n: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(domain(format!("AICc needs n > k + 1, got n={n}, k={k}")));
    }
    let kf = k as f64;
    Ok(2.0 * kf - 2.0 * loglik + 2.0 * kf * (kf + 1.0) / (n as f64 - kf - 1.0))
}

/// `AICc_best − AICc` for each entry, where the best is the lowest AICc.
/// Every value is `<= 0` and the best model(s) get exactly 0.
pub fn aicc_dif(values: &[f64]) -> Vec<f64> {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    values.iter().map(|v| best - v).collect()
}

fn ser_inf_as_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_null_as_inf<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// All fit measures for one model on one data set. `kl` is written as JSON
/// `null` when infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub model: ModelSpec,
    #[serde(serialize_with = "ser_inf_as_null", deserialize_with = "de_null_as_inf")]
    pub kl: f64,
    pub ks: f64,
    pub p: f64,
    pub rmse: f64,
    pub mae: f64,
    pub bd: f64,
    pub aicc: f64,
    pub loglik: f64,
    pub k: usize,
    pub n: usize,
}

pub const REPORT_CSV_HEADER: &str = "model,params,kl,ks,p,rmse,mae,bd,aicc,loglik,k,n";

impl GofReport {
    /// One CSV row matching [`REPORT_CSV_HEADER`]; params are `name=value`
    /// pairs joined with `;`.
    pub fn csv_row(&self) -> String {
        let family = self.model.family();
        let params: Vec<String> = family
            .param_names()
            .iter()
            .zip(self.model.params())
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            family,
            params.join(";"),
            self.kl,
            self.ks,
            self.p,
            self.rmse,
            self.mae,
            self.bd,
            self.aicc,
            self.loglik,
            self.k,
            self.n
        )
    }
}

/// Computes every measure for `model` on the samples.
pub fn evaluate(model: &ModelSpec, s: &SampleSet, rule: &QuadratureRule) -> Result<GofReport> {
    let h = build_histogram(s.values())?;
    let kl = kl_divergence(&h, model, rule)?;
    let (ks, p) = ks_test(s.values(), model, rule)?;
    let (rmse, mae, bd) = curve_errors(&h, model, rule)?;
    let loglik = log_likelihood(model, s, rule)?;
    let k = model.n_params();
    let n = s.len();
    Ok(GofReport { model: *model, kl, ks, p, rmse, mae, bd, aicc: aicc(loglik, k, n)?, loglik, k, n })
}

/// Share of metric wins per model, in percent.
///
/// Each inner slice holds one data set's reports, one per model. For every
/// data set and each of KL, KS, p, RMSE, MAE, BD and AICc the winner gets a
/// point; ties split it.
pub fn score_models(datasets: &[Vec<GofReport>]) -> Result<Vec<(String, f64)>> {
    type Metric = fn(&GofReport) -> f64;
    // lower is better for all; p-value is negated
    let metrics: [Metric; 7] = [|r| r.kl, |r| r.ks, |r| -r.p, |r| r.rmse, |r| r.mae, |r| r.bd, |r| r.aicc];
    let names = |set: &Vec<GofReport>| -> Vec<String> { set.iter().map(|r| r.model.family().to_string()).collect() };
    let first = datasets.first().ok_or_else(|| usage("no data sets to score"))?;
    let models = names(first);
    if models.is_empty() {
        return Err(usage("no models to score"));
    }
    let mut points: BTreeMap<&str, f64> = models.iter().map(|m| (m.as_str(), 0.0)).collect();
    if points.len() != models.len() {
        return Err(usage("each model family may appear only once per data set"));
    }
    for (i, set) in datasets.iter().enumerate() {
        let mut these = names(set);
        let mut want = models.clone();
        these.sort();
        want.sort();
        if these != want {
            return Err(usage(format!("data set {i} does not report the same models as data set 0")));
        }
        for metric in metrics {
            let key = |r: &GofReport| {
                let v = metric(r);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            };
            let best = set.iter().map(key).fold(f64::INFINITY, f64::min);
            let winners: Vec<&GofReport> = set.iter().filter(|r| key(r) == best).collect();
            let share = 1.0 / winners.len() as f64;
            for r in winners {
                let name = r.model.family().to_string();
                *points.get_mut(name.as_str()).expect("checked above") += share;
            }
        }
    }
    let total: f64 = points.values().sum();
    Ok(models.iter().map(|m| (m.clone(), 100.0 * points[m.as_str()] / total)).collect())
}

/// Writes the score table as `model,percentage` CSV.
pub fn write_scores_csv<W: Write>(scores: &[(String, f64)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "model,percentage")?;
    for (m, pct) in scores {
        writeln!(w, "{m},{pct}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Domain, GgRicianParams};
    use crate::sampling::{sample_reference, RngStream};
    use crate::specfun::kolmogorov_sf;

    fn report(family_model: ModelSpec, vals: [f64; 7]) -> GofReport {
        GofReport {
            model: family_model,
            kl: vals[0],
            ks: vals[1],
            p: vals[2],
            rmse: vals[3],
            mae: vals[4],
            bd: vals[5],
            aicc: vals[6],
            loglik: 0.0,
            k: 2,
            n: 100,
        }
    }

    #[test]
    fn sturges_counts() {
        assert_eq!(sturges_bin_count(1), 1);
        assert_eq!(sturges_bin_count(1500), 12);
        assert_eq!(sturges_bin_count(5000), 14);
        assert_eq!(sturges_bin_count(4), 3);
    }

    #[test]
    fn small_histogram_convention() {
        let h = build_histogram(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(h.edges, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(h.counts, vec![1, 1, 2]);
        assert!(matches!(build_histogram(&[2.0, 2.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn uniform_histogram_is_flat_within_multinomial_noise() {
        let s = sample_reference(&ModelSpec::Exponential { gamma: 1.0 }, 1500, &mut RngStream::new(8, 0)).unwrap();
        // F(x) of an exponential sample is uniform on (0, 1)
        let u: Vec<f64> = s.values().iter().map(|x| 1.0 - (-x).exp()).collect();
        let h = build_histogram(&u).unwrap();
        assert_eq!(h.n_bins(), 12);
        let n = 1500.0;
        for (&d, w) in h.densities.iter().zip(h.edges.windows(2)) {
            let pb = w[1] - w[0];
            let sd = (n * pb * (1.0 - pb)).sqrt() / (n * pb);
            assert!((d - 1.0).abs() < 4.0 * sd + 0.05, "{d}");
        }
        let area: f64 = h.densities.iter().zip(h.edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_comparison_is_zero() {
        let h = build_histogram(&[0.1, 0.4, 0.4, 0.9, 1.3, 2.0, 2.2]).unwrap();
        let p = h.masses();
        assert_eq!(kl_from_masses(&p, &p), 0.0);
        assert!(bhattacharyya_from_masses(&p, &p) < 1e-15);
        assert_eq!(kl_from_masses(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn constant_offset_curve_errors() {
        let eps = 0.05;
        let a = [0.3, 1.2, 0.8, 0.1];
        let b: Vec<f64> = a.iter().map(|x| x + eps).collect();
        let (rmse, mae) = rmse_mae(&a, &b);
        assert!((rmse - eps).abs() < 1e-15 && (mae - eps).abs() < 1e-15);
        let (r0, m0) = rmse_mae(&a, &a);
        assert_eq!((r0, m0), (0.0, 0.0));
    }

    #[test]
    fn ks_p_value_at_the_five_percent_point() {
        let d: f64 = 0.1358;
        let p = kolmogorov_sf(10.0 * d).unwrap();
        assert!((p - 0.05).abs() < 0.005, "{p}");
        let (_, p2) = ks_from_sorted_cdf(&[0.5]);
        assert!((0.0..=1.0).contains(&p2));
    }

    #[test]
    fn ks_of_empirical_interpolant_is_at_most_one_over_n() {
        let n = 50;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let (d, _) = ks_from_sorted_cdf(&f);
        assert!(d <= 1.0 / n as f64 + 1e-15);
    }

    #[test]
    fn ks_invariant_under_joint_scaling() {
        let rule = QuadratureRule::default();
        let s = sample_reference(&ModelSpec::Weibull { alpha: 2.0, gamma: 1.0 }, 300, &mut RngStream::new(9, 0)).unwrap();
        let a = ks_test(s.values(), &ModelSpec::Weibull { alpha: 2.0, gamma: 1.0 }, &rule).unwrap();
        let doubled: Vec<f64> = s.values().iter().map(|x| 2.0 * x).collect();
        let b = ks_test(&doubled, &ModelSpec::Weibull { alpha: 2.0, gamma: 2.0 }, &rule).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn aicc_values() {
        assert_eq!(aicc(-200.0, 3, 100).unwrap(), 406.25);
        let a = aicc(-10.0, 2, 5000).unwrap();
        let b = aicc(-10.0, 3, 5000).unwrap();
        assert!((b - a - (2.0 + 24.0 / 4996.0 - 12.0 / 4997.0)).abs() < 1e-12);
        assert!(aicc(0.0, 3, 4).is_err());
        let d = aicc_dif(&[10.0, 7.5, 12.0]);
        assert_eq!(d, vec![-2.5, 0.0, -4.5]);
    }

    #[test]
    fn scoring_splits() {
        let a = ModelSpec::Weibull { alpha: 1.0, gamma: 1.0 };
        let b = ModelSpec::Rayleigh { sigma: 1.0 };
        // A wins KL, KS, p, RMSE; B wins MAE, BD, AICc
        let set = vec![
            report(a, [0.1, 0.1, 0.9, 0.1, 0.5, 0.5, 50.0]),
            report(b, [0.2, 0.2, 0.8, 0.2, 0.4, 0.4, 40.0]),
        ];
        let s = score_models(&[set]).unwrap();
        assert_eq!(s[0].0, "weibull");
        assert!((s[0].1 - 57.142857).abs() < 1e-4 && (s[1].1 - 42.857143).abs() < 1e-4);

        let only = score_models(&[vec![report(a, [0.0; 7])]]).unwrap();
        assert_eq!(only[0].1, 100.0);

        let tie = score_models(&[vec![report(a, [0.0; 7]), report(b, [0.0; 7])]]).unwrap();
        assert_eq!((tie[0].1, tie[1].1), (50.0, 50.0));

        let twice = score_models(&[vec![report(a, [0.0; 7]), report(a, [1.0; 7])]]);
        assert!(matches!(twice, Err(Error::Usage(_))));
    }

    #[test]
    fn report_json_and_csv_shape() {
        let rule = QuadratureRule::default();
        let m = ModelSpec::GgRicianAmplitude(GgRicianParams::new(1.0, 1.3, 1.7).unwrap());
        let s = crate::sampling::sample_ggrician(300, &GgRicianParams::new(1.0, 1.3, 1.7).unwrap(), &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(s.domain(), Domain::Amplitude);
        let r = evaluate(&m, &s, &rule).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        for k in ["model", "kl", "ks", "p", "rmse", "mae", "bd", "aicc", "loglik", "k", "n"] {
            assert!(keys.contains(&k), "{k}");
        }
        assert_eq!(r.csv_row().split(',').count(), REPORT_CSV_HEADER.split(',').count());
        let inf = GofReport { kl: f64::INFINITY, ..r.clone() };
        let text = serde_json::to_string(&inf).unwrap();
        assert!(text.contains("\"kl\":null"));
        let back: GofReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.kl, f64::INFINITY);
    }
}
