//! Quadrature rules.
//!
//! [`QuadratureRule`] is the fixed angular rule used for the θ-integral of the
//! GG-Rician densities. [`integrate`] is a global-adaptive Gauss–Kronrod
//! (7/15) integrator used for CDFs and normalization checks.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{domain, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of equal panels the full circle is divided into.
pub const THETA_PANELS: usize = 8;

/// Angular rule for integrals over `[0, 2π]`.
///
/// The circle is split into eight panels of width π/4, each carrying
/// `node_count / 8` Gauss–Legendre nodes pushed through the endpoint-clustering
/// map `u ↦ u²/(u² + (1-u)²)`. Integrands with `|t|^α` kinks are further split
/// at the kink angles by the caller, so every kink sits on a panel endpoint,
/// where the map flattens the singularity.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    node_count: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // per-panel abscissae and weights on [0, 1], already mapped
    panel_nodes: Vec<f64>,
    panel_weights: Vec<f64>,
    // (sin θ, cos θ, weight) on the four fixed panels of [π/4, 5π/4]
    half_circle_trig: Vec<(f64, f64, f64)>,
}

impl QuadratureRule {
    /// Default node count used by the estimators and the CLI.
    pub const DEFAULT_NODES: usize = 256;

    pub fn new(node_count: usize) -> Result<Self> {
        if node_count < THETA_PANELS || !node_count.is_multiple_of(THETA_PANELS) || node_count > 4096 {
            return Err(domain(format!(
                "quadrature node count must be a multiple of {THETA_PANELS} in [8, 4096], got {node_count}"
            )));
        }
        let per_panel = node_count / THETA_PANELS;
        let (gl_x, gl_w) = gauss_legendre(per_panel);
        let mut panel_nodes = Vec::with_capacity(per_panel);
        let mut panel_weights = Vec::with_capacity(per_panel);
        for (x, w) in gl_x.iter().zip(&gl_w) {
            let u = 0.5 * (x + 1.0);
            let v = 1.0 - u;
            let den = u * u + v * v;
            panel_nodes.push(u * u / den);
            panel_weights.push(0.5 * w * 2.0 * u * v / (den * den));
        }
        // coarse rules do not integrate the map's Jacobian exactly; rescale so
        // constants are integrated exactly at every node count
        let total: f64 = panel_weights.iter().sum();
        panel_weights.iter_mut().for_each(|w| *w /= total);
        let width = 2.0 * PI / THETA_PANELS as f64;
        let mut nodes = Vec::with_capacity(node_count);
        let mut weights = Vec::with_capacity(node_count);
        for p in 0..THETA_PANELS {
            let start = p as f64 * width;
            for (u, w) in panel_nodes.iter().zip(&panel_weights) {
                nodes.push(start + width * u);
                weights.push(width * w);
            }
        }
        let mut rule = Self {
            node_count,
            nodes,
            weights,
            panel_nodes,
            panel_weights,
            half_circle_trig: Vec::with_capacity(4 * per_panel),
        };
        let mut trig = Vec::with_capacity(4 * per_panel);
        for k in 0..4 {
            rule.for_each_node(HALF_CIRCLE_BREAKS[k], HALF_CIRCLE_BREAKS[k + 1], |t, w| {
                let (s, c) = t.sin_cos();
                trig.push((s, c, w));
            });
        }
        rule.half_circle_trig = trig;
        Ok(rule)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Composite nodes over `[0, 2π]`, strictly increasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights matching [`nodes`](Self::nodes); they sum to 2π.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]` with one mapped panel.
    #[inline]
    pub fn panel<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let len = b - a;
        self.panel_nodes
            .iter()
            .zip(&self.panel_weights)
            .map(|(u, w)| w * f(a + len * u))
            .sum::<f64>()
            * len
    }

    /// Visits `(θ, weight)` pairs of one mapped panel on `[a, b]`.
    #[inline]
    pub(crate) fn for_each_node<F: FnMut(f64, f64)>(&self, a: f64, b: f64, mut f: F) {
        let len = b - a;
        for (u, w) in self.panel_nodes.iter().zip(&self.panel_weights) {
            f(a + len * u, w * len);
        }
    }

    /// Visits `(sin θ, cos θ, weight)` of one mapped panel on `[a, b]` with
    /// `b - a <= π/4`. The node angles are offsets of at most π/8 from the
    /// midpoint, so their sines and cosines come from short series and the
    /// angle-addition formulas instead of a library call per node.
    #[inline]
    pub(crate) fn for_each_trig_node<F: FnMut(f64, f64, f64)>(&self, a: f64, b: f64, mut f: F) {
        let len = b - a;
        debug_assert!(len <= FRAC_PI_4 * (1.0 + 1e-12));
        let (sm, cm) = (a + 0.5 * len).sin_cos();
        for (u, w) in self.panel_nodes.iter().zip(&self.panel_weights) {
            let (st, ct) = small_sin_cos(len * (u - 0.5));
            f(sm * ct + cm * st, cm * ct - sm * st, w * len);
        }
    }

    /// Cached `(sin θ, cos θ, weight)` of the mapped panel
    /// `[HALF_CIRCLE_BREAKS[k], HALF_CIRCLE_BREAKS[k + 1]]`, `k < 4`.
    pub(crate) fn half_circle_panel(&self, k: usize) -> &[(f64, f64, f64)] {
        let per_panel = self.panel_nodes.len();
        &self.half_circle_trig[k * per_panel..(k + 1) * per_panel]
    }

    /// Plain composite rule over `[0, 2π]` for smooth periodic integrands.
    pub fn integrate_circle<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(t, w)| w * f(*t)).sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(Self::DEFAULT_NODES).expect("default node count is valid")
    }
}

// sin and cos for |t| <= π/8 from their Taylor series; the first omitted
// terms are below 1e-19.
#[inline]
fn small_sin_cos(t: f64) -> (f64, f64) {
    let z = t * t;
    let s = t * (1.0
        + z * (-1.0 / 6.0
            + z * (1.0 / 120.0
                + z * (-1.0 / 5040.0
                    + z * (1.0 / 362_880.0
                        + z * (-1.0 / 39_916_800.0 + z * (1.0 / 6_227_020_800.0 - z / 1_307_674_368_000.0)))))));
    let c = 1.0
        + z * (-0.5
            + z * (1.0 / 24.0
                + z * (-1.0 / 720.0
                    + z * (1.0 / 40_320.0
                        + z * (-1.0 / 3_628_800.0 + z * (1.0 / 479_001_600.0 - z / 87_178_291_200.0))))));
    (s, c)
}

/// Canonical panel boundaries of the half circle `[π/4, 5π/4]`.
pub(crate) const HALF_CIRCLE_BREAKS: [f64; 5] =
    [FRAC_PI_4, 2.0 * FRAC_PI_4, 3.0 * FRAC_PI_4, 4.0 * FRAC_PI_4, 5.0 * FRAC_PI_4];

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gauss_kronrod_15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Global-adaptive Gauss–Kronrod integration of `f` over a finite `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the total
/// estimate is below `max(abs_tol, rel_tol * |value|)` or `max_intervals`
/// is reached. NaN integrand values propagate into the result.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Integral {
    if a == b {
        return Integral { value: 0.0, error: 0.0, intervals: 0 };
    }
    let (v, e) = gauss_kronrod_15(&mut f, a, b);
    let mut segs = vec![(a, b, v, e)];
    let mut value = v;
    let mut error = e;
    while error > abs_tol.max(rel_tol * value.abs()) && segs.len() < max_intervals {
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, sv, se) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval cannot be split further in f64
            segs.push((lo, hi, sv, 0.0));
            error -= se;
            continue;
        }
        let (v1, e1) = gauss_kronrod_15(&mut f, lo, mid);
        let (v2, e2) = gauss_kronrod_15(&mut f, mid, hi);
        value += v1 + v2 - sv;
        error += e1 + e2 - se;
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
    // re-sum to shed accumulated rounding from the running updates
    let value = segs.iter().map(|s| s.2).sum();
    let error = segs.iter().map(|s| s.3).sum();
    Integral { value, error, intervals: segs.len() }
}
