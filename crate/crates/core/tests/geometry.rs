use std::f64::consts::{LN_10, PI};

use isac_core::geometry::{
    achievability_check, crlb_exact, crlb_lower_bound, joint_pdf_r1_rl, pdf_ordered_distance, pdf_r1_given_rl,
    sample_ppp, DistanceProfile,
};
use isac_core::IsacError;
use isac_testkit::{chi_square, chi_square_critical, ks_critical_1pct, ks_statistic, tanh_sinh, tanh_sinh_to_infinity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 8.0 / 1.732_050_807_568_877_2 * 1e-6;

/// Window holding 100 stations on average; P(fewer than 10) is negligible.
fn window() -> f64 {
    (100.0 / (LAMBDA * PI)).sqrt()
}

fn nearest(seed: u64, l: usize) -> Vec<f64> {
    let real = sample_ppp(LAMBDA, window(), seed).unwrap();
    real.distances().take(l).collect()
}

fn fim_trace_inverse(profile: &DistanceProfile, beta: f64, xi: f64) -> f64 {
    // J = (10β/(ln10 ξ))² ∑ r⁻² u uᵀ with u the unit bearing vector.
    let c = (10.0 * beta / (LN_10 * xi)).powi(2);
    let (mut jxx, mut jxy, mut jyy) = (0.0, 0.0, 0.0);
    for (r, th) in profile.distances().iter().zip(profile.angles().unwrap()) {
        let w = c / (r * r);
        jxx += w * th.cos() * th.cos();
        jxy += w * th.cos() * th.sin();
        jyy += w * th.sin() * th.sin();
    }
    let det = jxx * jyy - jxy * jxy;
    (jxx + jyy) / det
}

fn random_profile(rng: &mut ChaCha8Rng, n: usize) -> DistanceProfile {
    let mut d: Vec<f64> = (0..n).map(|_| 5.0 + 500.0 * rng.random::<f64>()).collect();
    d.sort_by(f64::total_cmp);
    let a = (0..n).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
    DistanceProfile::with_angles(d, a).unwrap()
}

#[test]
fn ordered_distance_pdfs_normalize() {
    for l in [1usize, 4, 10] {
        let total = tanh_sinh_to_infinity(|r| pdf_ordered_distance(l, LAMBDA, r).unwrap(), 0.0, 1e-13);
        assert!((total - 1.0).abs() < 1e-8, "l={l}: {total}");
    }
    for l in [2usize, 3, 8] {
        let rl = 420.0;
        let total = tanh_sinh(|r1| pdf_r1_given_rl(l, r1, rl).unwrap(), 0.0, rl, 1e-14);
        assert!((total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn joint_density_normalizes_and_marginalizes() {
    let l = 4;
    let marginal = |rl: f64| tanh_sinh(|r1| joint_pdf_r1_rl(l, LAMBDA, r1, rl).unwrap(), 0.0, rl, 1e-13);
    for &rl in &[100.0, 450.0, 900.0] {
        let want = pdf_ordered_distance(l, LAMBDA, rl).unwrap();
        assert!((marginal(rl) / want - 1.0).abs() < 1e-8);
    }
    let total = tanh_sinh_to_infinity(marginal, 0.0, 1e-10);
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn poisson_count_mean() {
    let radius = (50.0 / (LAMBDA * PI)).sqrt();
    let n = 10_000;
    let mean = (0..n).map(|s| sample_ppp(LAMBDA, radius, s).unwrap().len() as f64).sum::<f64>() / n as f64;
    assert!((mean - 50.0).abs() < 3.0 * 50f64.sqrt() / (n as f64).sqrt(), "{mean}");
}

#[test]
fn nearest_distance_ks() {
    let mut r1: Vec<f64> = (0..20_000).map(|s| nearest(s, 1)[0]).collect();
    let d = ks_statistic(&mut r1, |r| 1.0 - (-LAMBDA * PI * r * r).exp());
    assert!(d < ks_critical_1pct(r1.len()), "D = {d}");
}

#[test]
fn fourth_distance_chi_square() {
    let n = 100_000;
    let samples: Vec<f64> = (0..n).map(|s| nearest(1_000_000 + s, 4)[3]).collect();
    let edges: Vec<f64> = (0..=40).map(|i| 30.0 * i as f64).collect();
    let mut observed = vec![0.0; edges.len()];
    for &r in &samples {
        let idx = ((r / 30.0) as usize).min(edges.len() - 1);
        observed[idx] += 1.0;
    }
    let mut expected: Vec<f64> = edges
        .windows(2)
        .map(|w| n as f64 * tanh_sinh(|r| pdf_ordered_distance(4, LAMBDA, r).unwrap(), w[0], w[1], 1e-12))
        .collect();
    expected.push(n as f64 - expected.iter().sum::<f64>());
    let (stat, dof) = chi_square(&observed, &expected);
    assert!(stat < chi_square_critical(0.01, dof), "chi2 = {stat}, dof = {dof}");
}

#[test]
fn nearest_given_fourth_ks() {
    // Condition on R_4 through the ratio R_1/R_4, whose law does not depend on R_4.
    let mut t: Vec<f64> = (0..20_000)
        .map(|s| {
            let d = nearest(3_000_000 + s, 4);
            d[0] / d[3]
        })
        .collect();
    let d = ks_statistic(&mut t, |x| 1.0 - (1.0 - x * x).powi(3));
    assert!(d < ks_critical_1pct(t.len()), "D = {d}");
    // Same law from the density itself.
    let cdf = |x: f64| tanh_sinh(|r| pdf_r1_given_rl(4, r, 1.0).unwrap(), 0.0, x, 1e-13);
    for x in [0.1, 0.4, 0.8] {
        assert!((cdf(x) - (1.0 - (1.0f64 - x * x).powi(3))).abs() < 1e-10);
    }
}

#[test]
fn proposition_bound_is_universal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (beta, xi) = (3.6, 0.125_892_5);
    for _ in 0..1000 {
        let n = rng.random_range(3..12);
        let p = random_profile(&mut rng, n);
        let exact = crlb_exact(&p, beta, xi).unwrap();
        let bound = crlb_lower_bound(p.distances(), beta, xi).unwrap();
        assert!(bound <= exact * (1.0 + 1e-12));
    }
}

#[test]
fn exact_crlb_equals_fim_trace_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let p = random_profile(&mut rng, 5);
        let exact = crlb_exact(&p, 4.6, 0.3).unwrap();
        let fim = fim_trace_inverse(&p, 4.6, 0.3);
        assert!((exact / fim - 1.0).abs() < 1e-10);
    }
}

#[test]
fn exact_crlb_needs_angles_and_three_stations() {
    let p = DistanceProfile::new(vec![1.0, 2.0, 3.0]).unwrap();
    assert!(matches!(crlb_exact(&p, 3.6, 0.1), Err(IsacError::InvalidParameter { .. })));
    let p = DistanceProfile::with_angles(vec![1.0, 2.0], vec![0.0, 1.0]).unwrap();
    assert_eq!(crlb_exact(&p, 3.6, 0.1), Err(IsacError::Unlocalizable(2)));
}

#[test]
fn ordered_distances_drift_outward() {
    let mean = |l: usize| tanh_sinh_to_infinity(|r| r * pdf_ordered_distance(l, LAMBDA, r).unwrap(), 0.0, 1e-12);
    let means: Vec<f64> = (1..=8).map(mean).collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]));
    for s in 0..200 {
        let d = nearest(s, 10);
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #[test]
    fn lower_bound_scale_and_permutation(d in prop::collection::vec(1.0f64..1e3, 3..10), s in 0.1f64..10.0) {
        let b = crlb_lower_bound(&d, 3.6, 0.2).unwrap();
        let scaled: Vec<f64> = d.iter().map(|r| r * s).collect();
        prop_assert!((crlb_lower_bound(&scaled, 3.6, 0.2).unwrap() / (b * s * s) - 1.0).abs() < 1e-12);
        let mut rev = d.clone();
        rev.reverse();
        prop_assert!((crlb_lower_bound(&rev, 3.6, 0.2).unwrap() / b - 1.0).abs() < 1e-12);
        let mut closer = d.clone();
        closer[0] *= 0.5;
        prop_assert!(crlb_lower_bound(&closer, 3.6, 0.2).unwrap() < b);
    }

    #[test]
    fn exact_crlb_rotation_and_scale(seed in any::<u64>(), rot in -10.0f64..10.0, s in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_profile(&mut rng, 6);
        let e = crlb_exact(&p, 3.6, 0.2).unwrap();
        let rotated = DistanceProfile::with_angles(
            p.distances().to_vec(),
            p.angles().unwrap().iter().map(|a| a + rot).collect(),
        ).unwrap();
        prop_assert!((crlb_exact(&rotated, 3.6, 0.2).unwrap() / e - 1.0).abs() < 1e-9);
        let scaled = DistanceProfile::with_angles(
            p.distances().iter().map(|r| r * s).collect(),
            p.angles().unwrap().to_vec(),
        ).unwrap();
        prop_assert!((crlb_exact(&scaled, 3.6, 0.2).unwrap() / (e * s * s) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn achievability_matches_definition(d in prop::collection::vec(1.0f64..100.0, 3..8)) {
        let w: Vec<f64> = d.iter().map(|r| r.powi(-2)).collect();
        let want = w.iter().sum::<f64>() >= 2.0 * w.iter().cloned().fold(0.0, f64::max);
        prop_assert_eq!(achievability_check(&d), want);
    }
}
