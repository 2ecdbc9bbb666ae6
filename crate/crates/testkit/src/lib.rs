//! Oracles for the isac test suites: an integrator that shares no code with
//! the library's Gauss–Kronrod scheme, a derivative-free minimizer and
//! goodness-of-fit helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// Double-exponential (tanh-sinh) quadrature of `f` over `[a, b]`. Tolerates
/// integrable endpoint singularities since nodes never touch the endpoints.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    assert!(a < b, "tanh_sinh needs a < b");
    let half = 0.5 * (b - a);
    let pi2 = std::f64::consts::FRAC_PI_2;
    // (weight, distance-to-endpoint fraction) for node parameter t >= 0.
    let node = |t: f64| {
        let u = pi2 * t.sinh();
        let w = pi2 * t.cosh() / (u.cosh() * u.cosh());
        let gap = (-u).exp() / u.cosh(); // 1 − tanh(u)
        (w, gap)
    };
    let eval_pair = |t: f64| -> f64 {
        let (w, gap) = node(t);
        let d = half * gap;
        if d <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let (xl, xr) = (a + d, b - d);
        let l = if xl > a { f(xl) } else { 0.0 };
        let r = if xr < b { f(xr) } else { 0.0 };
        w * (if l.is_finite() { l } else { 0.0 } + if r.is_finite() { r } else { 0.0 })
    };

    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = pi2 * f(a + half);
    let mut t = h;
    while t <= t_max {
        sum += eval_pair(t);
        t += h;
    }
    let mut estimate = sum * h * half;
    for _ in 0..12 {
        h *= 0.5;
        let mut t = h;
        while t <= t_max {
            sum += eval_pair(t);
            t += 2.0 * h;
        }
        let next = sum * h * half;
        let done = (next - estimate).abs() <= rel_tol * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// `∫_a^∞ f`, through `x = a + s/(1 − s)`.
pub fn tanh_sinh_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64) -> f64 {
    tanh_sinh(
        |s| {
            let one_minus = 1.0 - s;
            f(a + s / one_minus) / (one_minus * one_minus)
        },
        0.0,
        1.0,
        rel_tol,
    )
}

/// CDF of a unit-mean gamma variable of integer shape `n` at `c`, by direct
/// quadrature of its density.
pub fn normalized_gamma_cdf(c: f64, n: u32) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let log_norm = nf * nf.ln() - ln_gamma(nf);
    tanh_sinh(|t| (log_norm + (nf - 1.0) * t.ln() - nf * t).exp(), 0.0, c, 1e-14)
}

/// Nelder–Mead simplex minimization. Returns the best point and value.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= tol * best.abs().max(1e-300) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64).collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + coef * (w - c)).collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < worst { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = p.0.iter().zip(&x_best).map(|(xi, bi)| bi + 0.5 * (xi - bi)).collect();
                    let fx = f(&x);
                    *p = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`. Sorts in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Pearson χ² statistic. Bins with expected count below 5 are merged into
/// their right neighbour. Returns `(statistic, degrees of freedom)`.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> (f64, usize) {
    assert_eq!(observed.len(), expected.len());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            merged.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => merged.push((o_acc, e_acc)),
        }
    }
    let stat = merged.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, merged.len().saturating_sub(1))
}

/// Upper `alpha` quantile of the χ² distribution with `dof` degrees of freedom.
pub fn chi_square_critical(alpha: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).expect("positive degrees of freedom").inverse_cdf(1.0 - alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_basics() {
        assert!((tanh_sinh(|x| x.exp(), 0.0, 1.0, 1e-14) - (std::f64::consts::E - 1.0)).abs() < 1e-13);
        assert!((tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-13) - 2.0).abs() < 1e-10);
        assert!((tanh_sinh_to_infinity(|x| (-x).exp(), 0.0, 1e-13) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn gamma_cdf_oracle() {
        let c: f64 = 0.7;
        assert!((normalized_gamma_cdf(c, 1) - (1.0 - (-c).exp())).abs() < 1e-13);
        // Shape 2: 1 − e^{−2c}(1 + 2c)
        let want = 1.0 - (-2.0 * c).exp() * (1.0 + 2.0 * c);
        assert!((normalized_gamma_cdf(c, 2) - want).abs() < 1e-13);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let (x, fx) = nelder_mead(
            |p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            &[-1.2, 1.0],
            0.5,
            1e-14,
            5000,
        );
        assert!(fx < 1e-8, "{x:?} {fx}");
    }

    #[test]
    fn chi_square_merges_sparse_bins() {
        // The two sparse cells fold into the next one: bins (10) and (12).
        let (stat, dof) = chi_square(&[10.0, 1.0, 1.0, 10.0], &[10.0, 1.0, 1.0, 10.0]);
        assert_eq!(stat, 0.0);
        assert_eq!(dof, 1);
        let (stat, dof) = chi_square(&[8.0, 3.0, 0.0, 9.0], &[10.0, 1.0, 1.0, 10.0]);
        assert!((stat - 0.4).abs() < 1e-12, "{stat}");
        assert_eq!(dof, 1);
        assert!((chi_square_critical(0.01, 1) - 6.634_896_6).abs() < 1e-6);
    }
}
