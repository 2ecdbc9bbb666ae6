use statrs::function::gamma::gamma;

use crate::error::{IsacError, Result};

/// `Σ_k (b)_k / (c)_k x^k`, i.e. `₂F₁(1, b; c; x)`, for `|x| < 1`.
fn series_a1(b: f64, c: f64, x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..5000 {
        let k = k as f64;
        term *= (b + k) / (c + k) * x;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Gauss hypergeometric `₂F₁(1, b; c; z)` for `z ≤ 0`.
///
/// Small `|z|` uses the power series, moderate `|z|` the Pfaff transformation
/// `z → z/(z − 1)`, and `z < −3` the connection formula in `1/z`.
pub fn hyp2f1_neg(b: f64, c: f64, z: f64) -> Result<f64> {
    const OP: &str = "hyp2f1_neg";
    if !(b.is_finite() && c.is_finite()) {
        return Err(IsacError::domain(OP, format!("parameters b = {b}, c = {c} must be finite")));
    }
    if c <= 0.0 && c.fract() == 0.0 {
        return Err(IsacError::domain(OP, format!("c = {c} is a non-positive integer")));
    }
    if z.is_nan() || z > 0.0 {
        return Err(IsacError::domain(OP, format!("z = {z} must be <= 0")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z >= -0.5 {
        return Ok(series_a1(b, c, z));
    }
    if z >= -3.0 {
        // ₂F₁(1, b; c; z) = (1 − z)^{−1} ₂F₁(1, c − b; c; z/(z − 1)), argument in (1/3, 3/4].
        return Ok(series_a1(c - b, c, z / (z - 1.0)) / (1.0 - z));
    }
    if z == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    // Connection formula with a = 1:
    //   F = (c−1)/(b−1) (−z)^{−1} ₂F₁(1, 2−c; 2−b; 1/z)
    //     + Γ(c)Γ(1−b)/Γ(c−b) (−z)^{−b} (1 − 1/z)^{c−b−1}.
    if b.fract() == 0.0 {
        return Err(IsacError::domain(OP, format!("b = {b} is an integer; the 1/z expansion is degenerate")));
    }
    let w = 1.0 / z;
    let first = (c - 1.0) / (b - 1.0) / (-z) * series_a1(2.0 - c, 2.0 - b, w);
    let second = gamma(c) * gamma(1.0 - b) / gamma(c - b) * (-z).powf(-b) * (1.0 - w).powf(c - b - 1.0);
    Ok(first + second)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_cases() {
        // ₂F₁(1, 1; 2; z) = −ln(1 − z)/z
        for &z in &[-0.1, -0.5, -0.9, -2.0, -3.5, -50.0] {
            let want = -(1.0f64 - z).ln() / z;
            let got = series_or(1.0, 2.0, z);
            assert!((got / want - 1.0).abs() < 1e-13, "z = {z}: {got} vs {want}");
        }
        // ₂F₁(1, 1/2; 3/2; −x²) = atan(x)/x
        for &x in &[0.3f64, 0.9, 1.5, 2.0, 10.0, 1e3] {
            let got = hyp2f1_neg(0.5, 1.5, -x * x).unwrap();
            assert!((got / (x.atan() / x) - 1.0).abs() < 1e-13, "x = {x}");
        }
    }

    // Integer b is rejected only on the 1/z branch; route ln-case through Pfaff.
    fn series_or(b: f64, c: f64, z: f64) -> f64 {
        if z < -3.0 {
            series_a1(c - b, c, z / (z - 1.0)) / (1.0 - z)
        } else {
            hyp2f1_neg(b, c, z).unwrap()
        }
    }

    #[test]
    fn branches_agree_at_seams() {
        let (b, c) = (1.0 - 2.0 / 3.6, 2.0 - 2.0 / 3.6);
        for &z in &[-0.5f64, -3.0] {
            let lo = hyp2f1_neg(b, c, z - 1e-12).unwrap();
            let hi = hyp2f1_neg(b, c, z + 1e-12).unwrap();
            assert!((lo / hi - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn domain() {
        assert_eq!(hyp2f1_neg(0.3, 1.3, 0.0).unwrap(), 1.0);
        assert!(hyp2f1_neg(0.3, 1.3, 0.1).is_err());
        assert!(hyp2f1_neg(0.3, 1.3, f64::NAN).is_err());
        assert!(hyp2f1_neg(0.3, -1.0, -0.1).is_err());
    }
}
