//! Incomplete gamma family and the integrals built on it.

use statrs::function::gamma::{gamma, gamma_lr, gamma_ur, ln_gamma};

use super::quadrature::{integrate, Tolerance};
use crate::error::{IsacError, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `b = e^γ`, the constant in `E1(x) ≈ −ln(1 − e^{−b x})`; it makes the
/// approximation exact to first order as `x → 0`.
pub const E1_LOG_APPROX_B: f64 = 1.781_072_417_990_198;

// Relative cancellation beyond which a difference of closed forms is redone by
// quadrature.
const CANCELLATION: f64 = 1e-4;

/// Modified Lentz evaluation of the continued fraction for `Γ(a, x)`, valid
/// for every real `a` and converging quickly once `x ≳ 1`.
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln()).exp() * h
}

fn e1_series(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -z / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - z.ln() + sum
}

/// Exponential integral `E1(z) = ∫_z^∞ e^{−t}/t dt` for `z > 0`.
pub fn exponential_integral_e1(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else if z <= 1.0 {
        e1_series(z)
    } else {
        upper_gamma_cf(0.0, z)
    }
}

/// Upper incomplete gamma `Γ(w, z) = ∫_z^∞ t^{w−1} e^{−t} dt` for any real
/// `w` and `z > 0`.
pub fn upper_inc_gamma(w: f64, z: f64) -> f64 {
    debug_assert!(z > 0.0);
    if z == f64::INFINITY {
        return 0.0;
    }
    if z >= 1.0 && z > w {
        return upper_gamma_cf(w, z);
    }
    if w > 0.0 {
        return gamma(w) * gamma_ur(w, z);
    }
    // Here z < 1 and w ≤ 0: recur downwards from Γ(s, z), s ∈ [0, 1),
    // using Γ(a, z) = (Γ(a + 1, z) − z^a e^{−z}) / a. Every step adds a
    // positive quantity, so the recurrence is stable.
    let steps = (-w).ceil();
    let s = w + steps;
    let mut g = if s == 0.0 {
        e1_series(z)
    } else {
        gamma(s) * gamma_ur(s, z)
    };
    let mut a = s;
    for _ in 0..steps as usize {
        a -= 1.0;
        g = (g - (a * z.ln() - z).exp()) / a;
    }
    g
}

fn lower_inc_gamma(w: f64, z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else if z == f64::INFINITY {
        gamma(w)
    } else {
        gamma(w) * gamma_lr(w, z)
    }
}

/// Generalized incomplete gamma `Γ(w, z0, z1) = ∫_{z0}^{z1} t^{w−1} e^{−t} dt`.
///
/// `z1` may be `+∞`. For `w ≤ 0` the integral diverges at the origin, so
/// `z0 = 0` is rejected.
pub fn gen_inc_gamma(w: f64, z0: f64, z1: f64) -> Result<f64> {
    const OP: &str = "gen_inc_gamma";
    if !w.is_finite() {
        return Err(IsacError::domain(OP, format!("w = {w} is not finite")));
    }
    if !(z0.is_finite() && z0 >= 0.0) {
        return Err(IsacError::domain(OP, format!("z0 = {z0} must be finite and >= 0")));
    }
    if z1.is_nan() || z1 < z0 {
        return Err(IsacError::domain(OP, format!("need z0 <= z1, got [{z0}, {z1}]")));
    }
    if z0 == 0.0 && w <= 0.0 {
        return Err(IsacError::domain(
            OP,
            format!("w = {w} <= 0 with z0 = 0 is a divergent integral; use interference_exclusion_exponent instead"),
        ));
    }
    if z0 == z1 {
        return Ok(0.0);
    }

    let (hi, lo) = if w > 0.0 && z1 < w + 1.0 {
        (lower_inc_gamma(w, z1), lower_inc_gamma(w, z0))
    } else if z0 == 0.0 {
        return Ok(lower_inc_gamma(w, z1));
    } else {
        (upper_inc_gamma(w, z0), upper_inc_gamma(w, z1))
    };
    let value = hi - lo;
    if z1.is_finite() && z0 > 0.0 && value < CANCELLATION * hi.abs().max(lo.abs()) {
        let r = integrate(|t| (t.ln() * (w - 1.0) - t).exp(), z0, z1, Tolerance::rel(1e-13));
        return Ok(r.value);
    }
    Ok(value.max(0.0))
}

/// Rate `a = N (N!)^{−1/N}` of the surrogate in [`gamma_cdf_bound`].
pub fn gamma_cdf_bound_rate(n: usize) -> f64 {
    let n = n as f64;
    n * (-ln_gamma(n + 1.0) / n).exp()
}

/// `(1 − e^{−a c})^N`, the closed-form surrogate for `P(g < c)` where `g` is a
/// unit-mean gamma variable of shape `N`. It lies below the exact CDF.
pub fn gamma_cdf_bound(c: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(IsacError::domain("gamma_cdf_bound", "order must be >= 1"));
    }
    if c.is_nan() || c < 0.0 {
        return Err(IsacError::domain("gamma_cdf_bound", format!("c = {c} must be >= 0")));
    }
    if c == f64::INFINITY {
        return Ok(1.0);
    }
    let a = gamma_cdf_bound_rate(n);
    Ok((-(-a * c).exp_m1()).powi(n as i32))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InvSqMode {
    /// Closed form through `E1`, falling back to adaptive quadrature where
    /// the closed form cancels.
    Exact,
    /// `E1(x)` replaced by `−ln(1 − e^{−b x})`.
    Approx { b: f64 },
}

impl InvSqMode {
    pub fn approx() -> Self {
        InvSqMode::Approx { b: E1_LOG_APPROX_B }
    }
}

/// `∫_{τ1}^{τ2} e^{−μ/r²} r dr`.
pub fn exp_invsq_integral(mu: f64, tau1: f64, tau2: f64, mode: InvSqMode) -> Result<f64> {
    const OP: &str = "exp_invsq_integral";
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(IsacError::domain(OP, format!("mu = {mu} must be finite and >= 0")));
    }
    if !(tau1 > 0.0 && tau1 < tau2 && tau2.is_finite()) {
        return Err(IsacError::domain(OP, format!("need 0 < tau1 < tau2 < inf, got [{tau1}, {tau2}]")));
    }
    if mu == 0.0 {
        return Ok(0.5 * (tau2 * tau2 - tau1 * tau1));
    }
    let t1 = mu / (tau1 * tau1);
    let t2 = mu / (tau2 * tau2);
    let power = 0.5 * (tau2 * tau2 * (-t2).exp() - tau1 * tau1 * (-t1).exp());
    // Antiderivative: r² e^{−μ/r²} / 2 − (μ/2) E1(μ/r²).
    match mode {
        InvSqMode::Exact => {
            let log_part = 0.5 * mu * (exponential_integral_e1(t2) - exponential_integral_e1(t1));
            let value = power - log_part;
            if value < CANCELLATION * power.abs() {
                let r = integrate(|r| (-mu / (r * r)).exp() * r, tau1, tau2, Tolerance::rel(1e-12));
                return Ok(r.value);
            }
            Ok(value)
        }
        InvSqMode::Approx { b } => {
            if !(b.is_finite() && b > 0.0) {
                return Err(IsacError::domain(OP, format!("approximation constant b = {b} must be > 0")));
            }
            let e1_approx = |x: f64| -(-(-b * x).exp_m1()).ln();
            Ok(power - 0.5 * mu * (e1_approx(t2) - e1_approx(t1)))
        }
    }
}

/// `h(k) = k^{2/β} γ(1 − 2/β, k) − (1 − e^{−k})`, the scale-free exclusion
/// exponent `2∫_1^∞ (1 − e^{−k x^{−β}}) x dx`.
pub(crate) fn exclusion_h(k: f64, beta: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let delta = 2.0 / beta;
    if k < 0.5 {
        // Both terms are ≈ k here; sum the difference directly,
        // h(k) = Σ_{j≥1} (−1)^{j+1} k^j/j! · δ/(j − δ).
        let mut sum = 0.0;
        let mut term = 1.0;
        for j in 1..60 {
            term *= if j == 1 { k } else { -k / j as f64 };
            let add = term * delta / (j as f64 - delta);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    k.powf(delta) * lower_inc_gamma(1.0 - delta, k) + (-k).exp_m1()
}

/// `2∫_{r_excl}^∞ (1 − e^{−c r^{−β}}) r dr`, evaluated through the integrated
/// by parts form `r_excl² h(c r_excl^{−β})`.
pub fn interference_exclusion_exponent(c: f64, beta: f64, r_excl: f64) -> Result<f64> {
    const OP: &str = "interference_exclusion_exponent";
    if !(c.is_finite() && c >= 0.0) {
        return Err(IsacError::domain(OP, format!("c = {c} must be finite and >= 0")));
    }
    if !(beta.is_finite() && beta > 2.0) {
        return Err(IsacError::domain(OP, format!("beta = {beta} must exceed 2")));
    }
    if !(r_excl.is_finite() && r_excl > 0.0) {
        return Err(IsacError::domain(OP, format!("r_excl = {r_excl} must be > 0")));
    }
    Ok(r_excl * r_excl * exclusion_h(c * r_excl.powf(-beta), beta))
}
