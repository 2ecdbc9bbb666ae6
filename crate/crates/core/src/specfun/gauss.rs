use statrs::function::erf::erfc;

use crate::error::{IsacError, Result};

/// Standard Gaussian upper tail `Q(x) = P(Z > x)`.
pub fn gauss_q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn gauss_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`gauss_q`] on `(0, 1)`.
pub fn inv_gauss_q(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(IsacError::domain("inv_gauss_q", format!("p = {p} is not in (0, 1)")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        // Q(-x) = 1 - Q(x); 1 - p is exact enough here since p > 1/2.
        return inv_gauss_q(1.0 - p).map(|x| -x);
    }

    // Q is below 1e-300 past x = 37.
    let (mut lo, mut hi) = (0.0f64, 38.5f64);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if gauss_q(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton on ln Q(x) − ln p, well conditioned far into the tail.
    let target = p.ln();
    let mut x = 0.5 * (lo + hi);
    for _ in 0..8 {
        let q = gauss_q(x);
        let step = (q.ln() - target) * q / gauss_pdf(x);
        x += step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_examples() {
        assert_eq!(gauss_q(0.0), 0.5);
        assert!(gauss_q(8.0) < 1e-15);
        assert!((gauss_q(1.2816) - 0.1).abs() < 1e-4);
        assert!((gauss_q(1.0) + gauss_q(-1.0) - 1.0).abs() < 1e-15);
        assert!((gauss_q(5.0) / 2.866_515_718_791_939e-7 - 1.0).abs() < 1e-9);
        assert!((gauss_q(10.0) / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_round_trips() {
        assert_eq!(inv_gauss_q(0.5).unwrap(), 0.0);
        assert!((inv_gauss_q(gauss_q(1.7)).unwrap() - 1.7).abs() < 1e-12);
        assert!((inv_gauss_q(0.1).unwrap() - 1.281_551_565_5).abs() < 1e-9);
        for &p in &[1e-300, 1e-20, 1e-6, 0.3, 0.7, 1.0 - 1e-9] {
            let x = inv_gauss_q(p).unwrap();
            assert!((gauss_q(x) / p - 1.0).abs() < 1e-10, "p = {p}, x = {x}");
        }
        assert!(inv_gauss_q(0.0).is_err());
        assert!(inv_gauss_q(1.0).is_err());
        assert!(inv_gauss_q(f64::NAN).is_err());
    }
}
