//! Quick runtime check of the special functions against direct quadrature
//! of their defining integrals.

use isac_core::specfun::quadrature::{integrate, integrate_to_infinity, Tolerance};
use isac_core::specfun::{
    exponential_integral_e1, gamma_cdf_bound, gauss_q, gen_inc_gamma, hyp2f1_neg, interference_exclusion_exponent,
    inv_gauss_q,
};
use statrs::function::gamma::ln_gamma;

pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.worst <= self.tol
    }
}

fn rel(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(1e-300)
    }
}

fn tight() -> Tolerance {
    Tolerance::rel(1e-12).with_abs(0.0)
}

fn worst(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
}

pub fn run() -> Vec<Check> {
    let mut out = Vec::new();

    let cases: [(f64, f64, f64); 5] = [(0.5, 0.1, 2.0), (2.5, 0.0, 4.0), (-0.5, 0.2, 3.0), (-1.2, 1.0, 50.0), (1.0 - 2.0 / 3.6, 0.0, 0.7)];
    out.push(Check {
        name: "gen_inc_gamma vs quadrature".into(),
        worst: worst(cases.iter().map(|&(w, a, b)| {
            let want = if a == 0.0 {
                // t = u^{1/w} removes the endpoint singularity.
                integrate(|u: f64| (-u.powf(1.0 / w)).exp(), 0.0, b.powf(w), tight()).value / w
            } else {
                integrate(|t: f64| t.powf(w - 1.0) * (-t).exp(), a, b, tight()).value
            };
            rel(gen_inc_gamma(w, a, b).unwrap_or(f64::NAN), want)
        })),
        tol: 1e-8,
    });

    out.push(Check {
        name: "exponential_integral_e1 vs quadrature".into(),
        worst: worst([0.01, 0.5, 1.0, 3.0, 20.0].into_iter().map(|z| {
            let want = integrate_to_infinity(|t: f64| (-t).exp() / t, z, z.max(1.0), tight()).value;
            rel(exponential_integral_e1(z), want)
        })),
        tol: 1e-8,
    });

    // ₂F₁(1, 1−δ; 2−δ; z) = ∫₀¹ du / (1 − z u^{1/(1−δ)}).
    let hyp = [(3.6, -0.3), (3.6, -2.0), (4.6, -10.0), (2.5, -50.0), (3.0, -1e4)];
    out.push(Check {
        name: "hyp2f1_neg vs quadrature".into(),
        worst: worst(hyp.iter().map(|&(beta, z)| {
            let d = 2.0 / beta;
            let want = integrate(|u: f64| 1.0 / (1.0 - z * u.powf(1.0 / (1.0 - d))), 0.0, 1.0, tight()).value;
            rel(hyp2f1_neg(1.0 - d, 2.0 - d, z).unwrap_or(f64::NAN), want)
        })),
        tol: 1e-8,
    });

    let excl = [(1.0, 3.6, 1.0), (1e-3, 3.6, 10.0), (50.0, 4.6, 2.0), (1e4, 2.5, 5.0)];
    out.push(Check {
        name: "interference_exclusion_exponent vs quadrature".into(),
        worst: worst(excl.iter().map(|&(c, beta, r)| {
            let want =
                integrate_to_infinity(|x: f64| 2.0 * x * -(-c * x.powf(-beta)).exp_m1(), r, r, tight()).value;
            rel(interference_exclusion_exponent(c, beta, r).unwrap_or(f64::NAN), want)
        })),
        tol: 1e-6,
    });

    // The surrogate must stay below the exact unit-mean gamma CDF.
    let mut excess: f64 = 0.0;
    for n in [1usize, 2, 5, 10, 20] {
        let nf = n as f64;
        let log_norm = nf * nf.ln() - ln_gamma(nf);
        for i in 1..=20 {
            let c = 0.15 * i as f64;
            let exact = integrate(|t: f64| (log_norm + (nf - 1.0) * t.ln() - nf * t).exp(), 0.0, c, tight()).value;
            excess = excess.max(gamma_cdf_bound(c, n).unwrap_or(f64::NAN) - exact);
        }
    }
    out.push(Check { name: "gamma_cdf_bound <= exact gamma CDF".into(), worst: excess.max(0.0), tol: 1e-12 });

    out.push(Check {
        name: "inv_gauss_q round trip".into(),
        worst: worst([1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9].into_iter().map(|p| rel(gauss_q(inv_gauss_q(p).unwrap_or(f64::NAN)), p))),
        tol: 1e-9,
    });
    out
}
