//! Globally adaptive Gauss–Kronrod integration and Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{IsacError, Result};

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel, max_intervals: 4000 }
    }

    pub fn with_abs(self, abs: f64) -> Self {
        Tolerance { abs, ..self }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-14, rel: 1e-10, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecIntegral {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub converged: bool,
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    // Error relative to the per-component target at the time of creation,
    // used only to order the heap.
    priority: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn gk15<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, dim: usize, scratch: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    f(c, scratch);
    for i in 0..dim {
        kron[i] = WGK[7] * scratch[i];
        gauss[i] = WG[3] * scratch[i];
    }
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = h * x;
        for &node in &[c - dx, c + dx] {
            f(node, scratch);
            for i in 0..dim {
                kron[i] += wk * scratch[i];
                if j % 2 == 1 {
                    gauss[i] += WG[j / 2] * scratch[i];
                }
            }
        }
    }
    let errors = kron.iter().zip(&gauss).map(|(k, g)| (h * (k - g)).abs()).collect();
    let values = kron.into_iter().map(|k| k * h).collect();
    (values, errors)
}

/// Integrates a vector-valued `f` over the panels delimited by `breakpoints`
/// (at least two, increasing), refining the worst panel until every component
/// meets `tol`.
pub fn integrate_vec_panels<F>(mut f: F, dim: usize, breakpoints: &[f64], tol: Tolerance) -> VecIntegral
where
    F: FnMut(f64, &mut [f64]),
{
    assert!(dim >= 1 && breakpoints.len() >= 2, "need a non-empty integrand and at least one panel");
    let mut scratch = vec![0.0; dim];
    let mut totals = vec![0.0; dim];
    let mut total_errs = vec![0.0; dim];
    let mut heap = BinaryHeap::new();
    let span = (breakpoints[breakpoints.len() - 1] - breakpoints[0]).abs();

    let make_panel = |a: f64, b: f64, values: Vec<f64>, errors: Vec<f64>, totals: &[f64]| {
        let priority = errors
            .iter()
            .zip(totals)
            .map(|(e, t)| e / tol.abs.max(tol.rel * t.abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        Panel { a, b, values, errors, priority }
    };

    let mut initial = Vec::with_capacity(breakpoints.len() - 1);
    for w in breakpoints.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1], dim, &mut scratch);
        for i in 0..dim {
            totals[i] += v[i];
            total_errs[i] += e[i];
        }
        initial.push((w[0], w[1], v, e));
    }
    for (a, b, v, e) in initial {
        heap.push(make_panel(a, b, v, e, &totals));
    }

    let done = |totals: &[f64], errs: &[f64]| {
        totals
            .iter()
            .zip(errs)
            .all(|(t, e)| *e <= tol.abs.max(tol.rel * t.abs()))
    };

    let mut converged = done(&totals, &total_errs);
    let mut frozen = Vec::new();
    while !converged && heap.len() + frozen.len() < tol.max_intervals {
        let Some(p) = heap.pop() else { break };
        let mid = 0.5 * (p.a + p.b);
        if (p.b - p.a).abs() <= 1e-13 * span.max(f64::MIN_POSITIVE) || mid == p.a || mid == p.b {
            frozen.push(p);
            continue;
        }
        let (v1, e1) = gk15(&mut f, p.a, mid, dim, &mut scratch);
        let (v2, e2) = gk15(&mut f, mid, p.b, dim, &mut scratch);
        for i in 0..dim {
            totals[i] += v1[i] + v2[i] - p.values[i];
            total_errs[i] += e1[i] + e2[i] - p.errors[i];
        }
        heap.push(make_panel(p.a, mid, v1, e1, &totals));
        heap.push(make_panel(mid, p.b, v2, e2, &totals));
        converged = done(&totals, &total_errs);
    }

    // Re-sum from the panels to shed accumulated update round-off.
    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    for p in heap.iter().chain(frozen.iter()) {
        for i in 0..dim {
            values[i] += p.values[i];
            errors[i] += p.errors[i];
        }
    }
    let converged = done(&values, &errors);
    VecIntegral { values, errors, converged }
}

pub fn integrate_vec<F>(f: F, dim: usize, a: f64, b: f64, tol: Tolerance) -> VecIntegral
where
    F: FnMut(f64, &mut [f64]),
{
    integrate_vec_panels(f, dim, &[a, b], tol)
}

pub fn integrate_panels<F: FnMut(f64) -> f64>(mut f: F, breakpoints: &[f64], tol: Tolerance) -> Integral {
    let r = integrate_vec_panels(|x, out| out[0] = f(x), 1, breakpoints, tol);
    Integral { value: r.values[0], error: r.errors[0], converged: r.converged }
}

/// `∫_a^b f(x) dx`
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Integral {
    integrate_panels(f, &[a, b], tol)
}

/// `∫_a^∞ f(r) dr` through `r = a + r0 (1 − u) / u`, `u ∈ (0, 1]`. `r0` should
/// be the length scale where the integrand starts to decay.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, r0: f64, tol: Tolerance) -> Integral {
    integrate_to_infinity_panels(&mut f, a, r0, 1, tol)
}

/// As [`integrate_to_infinity`], with the mapped interval pre-split into
/// `panels` equal pieces.
pub fn integrate_to_infinity_panels<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    r0: f64,
    panels: usize,
    tol: Tolerance,
) -> Integral {
    let breaks: Vec<f64> = (0..=panels.max(1)).map(|i| i as f64 / panels.max(1) as f64).collect();
    integrate_panels(
        |u| {
            let r = a + r0 * (1.0 - u) / u;
            let v = f(r) * r0 / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        &breaks,
        tol,
    )
}

/// Vector-valued version of [`integrate_to_infinity_panels`].
pub fn integrate_vec_to_infinity<F>(mut f: F, dim: usize, a: f64, r0: f64, panels: usize, tol: Tolerance) -> VecIntegral
where
    F: FnMut(f64, &mut [f64]),
{
    let breaks: Vec<f64> = (0..=panels.max(1)).map(|i| i as f64 / panels.max(1) as f64).collect();
    integrate_vec_panels(
        |u, out| {
            let r = a + r0 * (1.0 - u) / u;
            f(r, out);
            let jac = r0 / (u * u);
            for v in out.iter_mut() {
                *v *= jac;
                if !v.is_finite() {
                    *v = 0.0;
                }
            }
        },
        dim,
        &breaks,
        tol,
    )
}

/// Gauss–Legendre rule of fixed order on a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    interval: (f64, f64),
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn order(&self) -> usize {
        self.nodes.len()
    }
    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// The same rule moved to `[a, b]`.
    pub fn rescaled(&self, a: f64, b: f64) -> QuadratureRule {
        let (a0, b0) = self.interval;
        let s = (b - a) / (b0 - a0);
        QuadratureRule {
            nodes: self.nodes.iter().map(|x| a + (x - a0) * s).collect(),
            weights: self.weights.iter().map(|w| w * s).collect(),
            interval: (a, b),
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Iterator over `(node, weight)` pairs.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// `g`-point Gauss–Legendre rule on `[a, b]`, exact for polynomials of degree
/// up to `2g − 1`.
pub fn legendre_rule(g: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if g < 2 {
        return Err(IsacError::invalid("g", format!("rule order must be >= 2, got {g}")));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(IsacError::invalid("interval", format!("need finite a < b, got [{a}, {b}]")));
    }
    let n = g as f64;
    let mut nodes = vec![0.0; g];
    let mut weights = vec![0.0; g];
    let half = g.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_g and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=g {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[g - 1 - i] = x;
        weights[i] = w;
        weights[g - 1 - i] = w;
    }
    if g % 2 == 1 {
        nodes[g / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights, interval: (-1.0, 1.0) }.rescaled(a, b))
}
