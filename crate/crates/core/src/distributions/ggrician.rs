//! The GG-Rician amplitude and intensity densities.
//!
//! With independent generalized-Gaussian in-phase/quadrature components of
//! common shape α, scale γ and location δ, the amplitude density is
//!
//! ```text
//! f(r) = α² r / (4 γ² Γ²(1/α)) ∫₀^{2π} exp(-(|r cosθ - δ|^α + |r sinθ - δ|^α) / γ^α) dθ
//! ```
//!
//! and the intensity density is `f_I(ν) = f(√ν) / (2√ν)`.
//!
//! The integrand is invariant under θ ↦ π/2 - θ, so only `[π/4, 5π/4]` is
//! integrated and doubled. On that half circle the `|·|^α` kinks sit at
//! `θ₀ = acos(δ/r)` (or `π/2 - θ₀`) and `π/2 + θ₀`; they become panel
//! boundaries alongside the fixed π/4 grid. The exponent is shifted by its
//! running minimum so the integral is accumulated without underflow and
//! returned as a logarithm.

use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use crate::error::Result;
use crate::quadrature::{QuadratureRule, HALF_CIRCLE_BREAKS};
use crate::specfun::ln_gamma;

use super::GgRicianParams;

// Panels whose exponent bound exceeds the best node's by this much add less
// than 2π e^-60 relative to the peak and are skipped.
const NEGLIGIBLE_EXPONENT: f64 = 60.0;

// A panel whose exponent may vary by more than this is bisected before its
// nodes are evaluated.
const MAX_EXPONENT_SPREAD: f64 = 32.0;
const MAX_BISECTIONS: u32 = 16;

// Panels touching a kink are graded until `rs * width` is below this.
const GRADED_SCALE: f64 = 8.0;
const GRADING_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    // index of an unsplit grid panel, whose trig values the rule caches
    grid: Option<usize>,
    lower: f64,
    upper: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.lower.total_cmp(&other.lower).is_eq()
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

// reversed so the max-heap pops the smallest lower bound first
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.lower.total_cmp(&self.lower)
    }
}

// Running log-sum-exp of weighted exp(-e): total = exp(-shift) * acc.
#[derive(Debug)]
struct LogSum {
    shift: f64,
    acc: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self { shift: f64::INFINITY, acc: 0.0 }
    }
}

impl LogSum {
    #[inline]
    fn add(&mut self, e: f64, weight: f64) {
        if e < self.shift {
            self.acc = self.acc * (e - self.shift).exp() + weight;
            self.shift = e;
        } else {
            self.acc += weight * (self.shift - e).exp();
        }
    }
}

// Scaled geometry of one evaluation: radius rs = r/γ, location sd = δ/γ.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    rs: f64,
    sd: f64,
    alpha: f64,
}

impl Geometry {
    #[inline]
    fn exponent(&self, s: f64, c: f64) -> f64 {
        abs_pow(self.rs * c - self.sd, self.alpha) + abs_pow(self.rs * s - self.sd, self.alpha)
    }

    // Bounds of E(θ) over [a, b]. Both sin and cos are monotone on every
    // panel (the grid includes π/2 and π), so each component ranges over the
    // interval spanned by its endpoint values.
    fn panel(&self, a: f64, b: f64, grid: Option<usize>, depth: u32) -> Panel {
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let range = |u: f64, v: f64| {
            let (lo, hi) = if u < v { (u, v) } else { (v, u) };
            let (x, y) = (self.rs * lo - self.sd, self.rs * hi - self.sd);
            let near = x.max(-y).max(0.0);
            let far = x.abs().max(y.abs());
            (abs_pow(near, self.alpha), abs_pow(far, self.alpha))
        };
        let (cl, cu) = range(ca, cb);
        let (sl, su) = range(sa, sb);
        Panel { a, b, grid, lower: cl + sl, upper: cu + su, depth }
    }

    // Initial panels for [a, b], graded geometrically toward a kink endpoint.
    fn window(&self, a: f64, b: f64, left_kink: bool, right_kink: bool, grid: Option<usize>, out: &mut Vec<Panel>) {
        let graded = (left_kink || right_kink) && self.rs * (b - a) > GRADED_SCALE;
        if !graded {
            out.push(self.panel(a, b, grid, 0));
        } else if left_kink && right_kink {
            let mid = 0.5 * (a + b);
            self.graded(a, mid, true, out);
            self.graded(mid, b, false, out);
        } else {
            self.graded(a, b, left_kink, out);
        }
    }

    fn graded(&self, a: f64, b: f64, toward_a: bool, out: &mut Vec<Panel>) {
        let len = b - a;
        let mut frac = 1.0;
        while self.rs * len * frac > GRADED_SCALE {
            let next = frac * GRADING_RATIO;
            let (lo, hi) = if toward_a {
                (a + len * next, a + len * frac)
            } else {
                (b - len * frac, b - len * next)
            };
            out.push(self.panel(lo, hi, None, 0));
            frac = next;
        }
        let (lo, hi) = if toward_a { (a, a + len * frac) } else { (b - len * frac, b) };
        out.push(self.panel(lo, hi, None, 0));
    }
}

// |x|^α as exp(α ln|x|), which is markedly cheaper than powf here.
#[inline]
fn abs_pow(x: f64, alpha: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        0.0
    } else {
        (alpha * x.ln()).exp()
    }
}

/// Per-parameter constants of the GG-Rician densities.
#[derive(Debug, Clone)]
pub struct GgRicianKernel<'q> {
    params: GgRicianParams,
    inv_gamma: f64,
    // ln(α² / (4 γ² Γ²(1/α)))
    ln_norm: f64,
    rule: &'q QuadratureRule,
}

impl<'q> GgRicianKernel<'q> {
    /// `params` must already be validated.
    pub fn new(params: GgRicianParams, rule: &'q QuadratureRule) -> Self {
        let GgRicianParams { alpha, gamma, .. } = params;
        let ln_norm = 2.0 * alpha.ln() - 2.0 * LN_2 - 2.0 * gamma.ln() - 2.0 * ln_gamma(1.0 / alpha);
        Self { params, inv_gamma: 1.0 / gamma, ln_norm, rule }
    }

    pub fn params(&self) -> GgRicianParams {
        self.params
    }

    /// `ln ∫₀^{2π} exp(-E(θ)) dθ` at radius `r >= 0`.
    pub fn ln_theta_integral(&self, r: f64) -> f64 {
        let GgRicianParams { alpha, delta, .. } = self.params;
        let scaled_delta = delta * self.inv_gamma;
        if r == 0.0 {
            return (2.0 * PI).ln() - 2.0 * scaled_delta.powf(alpha);
        }
        let geo = Geometry { rs: r * self.inv_gamma, sd: scaled_delta, alpha };

        let kinks = if delta <= r {
            let theta0 = (delta / r).acos();
            [theta0.max(FRAC_PI_2 - theta0), FRAC_PI_2 + theta0]
        } else {
            [f64::NAN; 2]
        };
        let mut pts = [0.0f64; 7];
        pts[..5].copy_from_slice(&HALF_CIRCLE_BREAKS);
        pts[5..].copy_from_slice(&kinks);
        let n_pts = if kinks[0].is_nan() { 5 } else { 7 };
        let pts = &mut pts[..n_pts];
        pts.sort_unstable_by(f64::total_cmp);
        let is_kink = |t: f64| kinks.iter().any(|k| (t - k).abs() < 1e-12);

        let mut initial = Vec::with_capacity(16);
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 1e-14 {
                continue;
            }
            let grid = HALF_CIRCLE_BREAKS.windows(2).position(|g| g[0] == a && g[1] == b);
            geo.window(a, b, is_kink(a), is_kink(b), grid, &mut initial);
        }

        // Panels are taken in order of their exponent lower bound; wide-spread
        // panels are bisected on demand and the rest are skipped once they
        // cannot matter.
        let mut queue = BinaryHeap::from(initial);
        let mut sum = LogSum::default();
        while let Some(p) = queue.pop() {
            if p.lower > sum.shift + NEGLIGIBLE_EXPONENT {
                break;
            }
            if p.upper - p.lower > MAX_EXPONENT_SPREAD && p.depth < MAX_BISECTIONS {
                let mid = 0.5 * (p.a + p.b);
                queue.push(geo.panel(p.a, mid, None, p.depth + 1));
                queue.push(geo.panel(mid, p.b, None, p.depth + 1));
                continue;
            }
            match p.grid {
                Some(k) => {
                    for &(s, c, w) in self.rule.half_circle_panel(k) {
                        sum.add(geo.exponent(s, c), w);
                    }
                }
                None => self.rule.for_each_trig_node(p.a, p.b, |s, c, w| sum.add(geo.exponent(s, c), w)),
            }
        }
        if !sum.shift.is_finite() || !(sum.acc > 0.0) {
            return f64::NEG_INFINITY;
        }
        LN_2 + sum.acc.ln() - sum.shift
    }

    /// Log amplitude density at `r >= 0`.
    pub fn ln_amplitude(&self, r: f64) -> f64 {
        if r == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.ln_norm + r.ln() + self.ln_theta_integral(r)
    }

    /// Log intensity density at `nu >= 0`; finite at `nu = 0`.
    pub fn ln_intensity(&self, nu: f64) -> f64 {
        self.ln_norm - LN_2 + self.ln_theta_integral(nu.sqrt())
    }
}

/// GG-Rician amplitude density.
pub fn ggrician_amplitude_pdf(r: f64, p: &GgRicianParams, rule: &QuadratureRule) -> Result<f64> {
    p.validate()?;
    if !(r >= 0.0) {
        return Err(crate::error::domain(format!("amplitude must be >= 0, got {r}")));
    }
    Ok(GgRicianKernel::new(*p, rule).ln_amplitude(r).exp())
}

/// GG-Rician intensity density.
pub fn ggrician_intensity_pdf(nu: f64, p: &GgRicianParams, rule: &QuadratureRule) -> Result<f64> {
    p.validate()?;
    if !(nu >= 0.0) {
        return Err(crate::error::domain(format!("intensity must be >= 0, got {nu}")));
    }
    Ok(GgRicianKernel::new(*p, rule).ln_intensity(nu).exp())
}

/// Largest relative change of the amplitude density allowed by
/// [`check_node_count`] when the node count is doubled.
pub const NODE_CHECK_TOLERANCE: f64 = 1e-8;

/// Compares `rule` against a rule with twice the nodes on a canary set with
/// kinks and a sub-Laplace shape, returning the largest relative difference.
/// Fails with a numerical error above [`NODE_CHECK_TOLERANCE`]. Rules above
/// 2048 nodes are compared with half their nodes instead.
pub fn check_node_count(rule: &QuadratureRule) -> Result<f64> {
    let n = rule.node_count();
    let doubled = QuadratureRule::new(if n > 2048 { n / 2 } else { n * 2 })?;
    let canary = [(0.7, 1.3, 1.7), (1.7, 2.3, 2.9), (3.0, 1.0, 0.4)];
    let mut worst = 0.0f64;
    for (alpha, gamma, delta) in canary {
        let p = GgRicianParams::new(alpha, gamma, delta)?;
        let (a, b) = (GgRicianKernel::new(p, rule), GgRicianKernel::new(p, &doubled));
        for r in [0.05, 0.5, 1.0, 2.0, 3.5, 6.0, 10.0] {
            let diff = (a.ln_amplitude(r) - b.ln_amplitude(r)).exp_m1().abs();
            worst = worst.max(if diff.is_nan() { f64::INFINITY } else { diff });
        }
    }
    if worst > NODE_CHECK_TOLERANCE {
        return Err(crate::error::Error::Numerical(format!(
            "{} quadrature nodes differ from {} by {worst:.2e} (limit {NODE_CHECK_TOLERANCE:.0e}); use more nodes",
            rule.node_count(),
            doubled.node_count()
        )));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::i0_scaled;

    #[test]
    fn default_node_count_passes_the_doubling_check() {
        let worst = check_node_count(&QuadratureRule::default()).unwrap();
        assert!(worst <= NODE_CHECK_TOLERANCE);
        assert!(matches!(check_node_count(&QuadratureRule::new(8).unwrap()), Err(crate::Error::Numerical(_))));
        assert!(check_node_count(&QuadratureRule::new(4096).unwrap()).is_ok());
    }

    fn params(alpha: f64, gamma: f64, delta: f64) -> GgRicianParams {
        GgRicianParams::new(alpha, gamma, delta).unwrap()
    }

    // Tanh-sinh on the full circle, split at every kink: an independent
    // route to the θ-integral that copes with the α < 1 cusps.
    fn oracle_amplitude(r: f64, p: GgRicianParams) -> f64 {
        fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
            let (c, half) = (0.5 * (a + b), 0.5 * (b - a));
            let level = |h: f64| -> f64 {
                let mut sum = 0.0;
                let mut k = 0i64;
                loop {
                    let t = k as f64 * h;
                    if t > 4.0 {
                        break;
                    }
                    let u = 0.5 * PI * t.sinh();
                    let w = 0.5 * PI * t.cosh() / u.cosh().powi(2);
                    let x = u.tanh();
                    let mut v = w * f(c + half * x);
                    if k > 0 {
                        v += w * f(c - half * x);
                    }
                    sum += v;
                    k += 1;
                }
                sum * h * half
            };
            let mut h = 0.5;
            let mut prev = level(h);
            for _ in 0..8 {
                h *= 0.5;
                let next = level(h);
                if (next - prev).abs() <= 1e-15 * next.abs() {
                    return next;
                }
                prev = next;
            }
            prev
        }
        let GgRicianParams { alpha, gamma, delta } = p;
        let f = |t: f64| {
            (-(((r * t.cos() - delta).abs() / gamma).powf(alpha)
                + ((r * t.sin() - delta).abs() / gamma).powf(alpha)))
                .exp()
        };
        // a uniform pre-split keeps narrow peaks from being stepped over
        let mut pts: Vec<f64> = (0..=64).map(|k| k as f64 * PI / 32.0).collect();
        if delta < r {
            let t0 = (delta / r).acos();
            for t in [t0, 2.0 * PI - t0, (delta / r).asin(), PI - (delta / r).asin()] {
                pts.push(t);
            }
        }
        pts.sort_by(f64::total_cmp);
        let total: f64 =
            pts.windows(2).filter(|w| w[1] - w[0] >= 1e-15).map(|w| tanh_sinh(&f, w[0], w[1])).sum();
        let norm = alpha * alpha * r / (4.0 * gamma * gamma * crate::specfun::ln_gamma(1.0 / alpha).exp().powi(2));
        norm * total
    }

    fn rician(r: f64, sigma: f64, big_delta: f64) -> f64 {
        let s2 = sigma * sigma;
        r / s2 * (-(r - big_delta).powi(2) / (2.0 * s2)).exp() * i0_scaled(r * big_delta / s2)
    }

    #[test]
    fn zero_at_origin() {
        let q = QuadratureRule::default();
        assert_eq!(ggrician_amplitude_pdf(0.0, &params(1.3, 2.0, 0.7), &q).unwrap(), 0.0);
    }

    #[test]
    fn rician_oracle_point() {
        let q = QuadratureRule::default();
        let p = params(2.0, 2f64.sqrt(), 1.0 / 2f64.sqrt());
        let got = ggrician_amplitude_pdf(1.0, &p, &q).unwrap();
        let want = (-1f64).exp() * 1.266_065_877_752_008_4;
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!((got - 0.46576).abs() < 1e-5);
    }

    #[test]
    fn matches_adaptive_oracle() {
        let q = QuadratureRule::default();
        let cases = [
            (2.9, params(1.7, 2.3, 2.9)),
            (1.0, params(0.5, 0.5, 2.0)),
            (2.3, params(0.5, 0.5, 2.0)),
            (30.0, params(0.5, 0.5, 2.0)),
            (14.0, params(1.1, 2.0, 10.0)),
            (6.0, params(0.7, 1.5, 5.0)),
            (7.07, params(0.7, 1.5, 5.0)),
            (70.0, params(1.2, 32.0, 47.0)),
            (0.3, params(1.45, 5.0, 1.0)),
            // concentrated integrands where most panels are skipped
            (7.0, params(2.0, 1.0, 5.0)),
            (3.0, params(2.0, 1.0, 5.0)),
            (25.0, params(1.1, 2.0, 10.0)),
            (353.0, params(2.0, 1.0, 250.0)),
            (56.0, params(1.5, 0.5, 40.0)),
            (60.0, params(0.7, 0.5, 40.0)),
            (30.0, params(3.0, 0.4, 20.0)),
            (58.0, params(1.2, 0.3, 40.0)),
            (52.0, params(0.5, 0.2, 40.0)),
        ];
        for (r, p) in cases {
            let got = ggrician_amplitude_pdf(r, &p, &q).unwrap();
            let want = oracle_amplitude(r, p);
            let rel = ((got - want) / want).abs();
            assert!(rel < 1e-8, "r={r} {p}: got {got}, oracle {want}, rel {rel}");
        }
    }

    #[test]
    fn laplace_case_is_alpha_one() {
        let q = QuadratureRule::default();
        let p = params(1.0, 1.3, 1.7);
        for r in [0.5, 2.0, 4.0] {
            let got = ggrician_amplitude_pdf(r, &p, &q).unwrap();
            assert!(((got - oracle_amplitude(r, p)) / got).abs() < 1e-9);
        }
    }

    #[test]
    fn reduces_to_rician_for_alpha_two() {
        let q = QuadratureRule::default();
        for (gamma, delta) in [(2f64.sqrt(), 1.0 / 2f64.sqrt()), (1.0, 5.0), (4.0, 2.0)] {
            let p = params(2.0, gamma, delta);
            for r in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
                let got = ggrician_amplitude_pdf(r, &p, &q).unwrap();
                let want = rician(r, gamma / 2f64.sqrt(), 2f64.sqrt() * delta);
                assert!(((got - want) / want).abs() < 1e-8, "r={r} g={gamma} d={delta}");
            }
        }
    }

    #[test]
    fn intensity_at_origin_is_the_analytic_limit() {
        let q = QuadratureRule::default();
        let p = params(1.3, 0.8, 0.6);
        let k = GgRicianKernel::new(p, &q);
        let want = p.alpha.powi(2) / (8.0 * p.gamma.powi(2) * ln_gamma(1.0 / p.alpha).exp().powi(2))
            * 2.0
            * PI
            * (-2.0 * (p.delta / p.gamma).powf(p.alpha)).exp();
        assert!((k.ln_intensity(0.0).exp() - want).abs() < 1e-14);
        // continuity from the right
        assert!((k.ln_intensity(1e-14).exp() - want).abs() < 1e-6);
    }

    #[test]
    fn transform_identity() {
        let q = QuadratureRule::default();
        let p = params(0.8, 1.2, 2.2);
        for r in [0.5, 1.0, 3.0] {
            let fa = ggrician_amplitude_pdf(r, &p, &q).unwrap();
            let fi = ggrician_intensity_pdf(r * r, &p, &q).unwrap();
            assert!((fi * 2.0 * r - fa).abs() < 1e-10);
        }
    }

    #[test]
    fn extreme_candidates_do_not_produce_nan() {
        let q = QuadratureRule::default();
        let k = GgRicianKernel::new(params(1e6, 1.0, 0.5), &q);
        let v = k.ln_amplitude(3.0);
        assert!(!v.is_nan());
        let k = GgRicianKernel::new(params(1.0, 1e-6, 1e5), &q);
        assert!(!k.ln_amplitude(3.0).is_nan());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn agrees_with_oracle_where_the_mass_is(
            alpha in 0.5f64..3.0,
            gamma in 0.2f64..5.0,
            delta in 0.0f64..30.0,
            z in -3.0f64..3.0,
        ) {
            let q = QuadratureRule::default();
            let p = params(alpha, gamma, delta);
            let r = (2f64.sqrt() * delta + z * gamma).max(0.05 * gamma);
            let got = ggrician_amplitude_pdf(r, &p, &q).unwrap();
            let want = oracle_amplitude(r, p);
            proptest::prop_assume!(want > 1e-200);
            let rel = ((got - want) / want).abs();
            proptest::prop_assert!(rel < 1e-8, "r={} {}: {} vs {} rel {}", r, p, got, want, rel);
        }
    }
}
