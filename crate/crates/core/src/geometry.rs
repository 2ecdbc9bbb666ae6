//! Base-station point process, ordered-distance laws and RSS position bounds.

use std::f64::consts::{LN_10, PI};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{IsacError, Result};

/// Largest expected point count [`sample_ppp`] will realize.
pub const MAX_EXPECTED_POINTS: f64 = 1e7;

/// A realization of the base-station process around the typical user, which
/// sits at the origin. Positions are sorted by distance.
#[derive(Debug, Clone, PartialEq)]
pub struct BsRealization {
    positions: Vec<[f64; 2]>,
    window_radius: f64,
}

impl BsRealization {
    /// Sorts `positions` by distance, then by angle, then by input order.
    pub fn new(mut positions: Vec<[f64; 2]>, window_radius: f64) -> Result<Self> {
        if !(window_radius.is_finite() && window_radius > 0.0) {
            return Err(IsacError::invalid("window_radius", format!("must be > 0, got {window_radius}")));
        }
        for p in &positions {
            if !(p[0].is_finite() && p[1].is_finite()) || p[0].hypot(p[1]) > window_radius {
                return Err(IsacError::invalid("positions", format!("{p:?} lies outside the window")));
            }
        }
        positions.sort_by(|a, b| {
            let (ra, rb) = (a[0] * a[0] + a[1] * a[1], b[0] * b[0] + b[1] * b[1]);
            ra.total_cmp(&rb).then(a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])))
        });
        Ok(BsRealization { positions, window_radius })
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }
    pub fn window_radius(&self) -> f64 {
        self.window_radius
    }
    pub fn len(&self) -> usize {
        self.positions.len()
    }
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.iter().map(|p| p[0].hypot(p[1]))
    }

    /// Profile of the `l` nearest stations, angles included.
    pub fn profile(&self, l: usize) -> Result<DistanceProfile> {
        if l > self.len() {
            return Err(IsacError::invalid("l", format!("realization has only {} points, asked for {l}", self.len())));
        }
        let near = &self.positions[..l];
        DistanceProfile::with_angles(
            near.iter().map(|p| p[0].hypot(p[1])).collect(),
            near.iter().map(|p| p[1].atan2(p[0])).collect(),
        )
    }

    /// One `x y` pair per line, meters. Debugging aid, not a stable format.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * 40);
        for p in &self.positions {
            let _ = writeln!(s, "{:e} {:e}", p[0], p[1]);
        }
        s
    }

    pub fn parse_text(text: &str, window_radius: f64) -> Result<Self> {
        let mut positions = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => positions.push([x, y]),
                _ => return Err(IsacError::invalid("realization text", format!("line {}: expected `x y`", i + 1))),
            }
        }
        BsRealization::new(positions, window_radius)
    }
}

/// Draws a homogeneous PPP of density `lambda_bs` (per m²) on the disk of
/// radius `window_radius` around the origin.
pub fn sample_ppp(lambda_bs: f64, window_radius: f64, seed: u64) -> Result<BsRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_ppp_with(lambda_bs, window_radius, &mut rng)
}

pub fn sample_ppp_with<R: Rng + ?Sized>(lambda_bs: f64, window_radius: f64, rng: &mut R) -> Result<BsRealization> {
    if !(lambda_bs.is_finite() && lambda_bs > 0.0) {
        return Err(IsacError::invalid("lambda_bs", format!("must be > 0, got {lambda_bs}")));
    }
    if !(window_radius.is_finite() && window_radius > 0.0) {
        return Err(IsacError::invalid("window_radius", format!("must be > 0, got {window_radius}")));
    }
    let mean = lambda_bs * PI * window_radius * window_radius;
    if mean > MAX_EXPECTED_POINTS {
        return Err(IsacError::ResourceGuard(mean));
    }
    let count = Poisson::new(mean).expect("positive finite mean").sample(rng) as usize;
    let positions = (0..count)
        .map(|_| {
            let r = window_radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            [r * theta.cos(), r * theta.sin()]
        })
        .collect();
    BsRealization::new(positions, window_radius)
}

/// Ordered distances `r_1 ≤ … ≤ r_L` from the user, optionally with the
/// bearing of each station.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile {
    distances: Vec<f64>,
    angles: Option<Vec<f64>>,
}

impl DistanceProfile {
    pub fn new(distances: Vec<f64>) -> Result<Self> {
        if distances.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(IsacError::invalid("distances", "must be finite and > 0"));
        }
        if distances.windows(2).any(|w| w[1] < w[0]) {
            return Err(IsacError::invalid("distances", "must be nondecreasing"));
        }
        Ok(DistanceProfile { distances, angles: None })
    }

    pub fn with_angles(distances: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != distances.len() {
            return Err(IsacError::invalid(
                "angles",
                format!("{} angles for {} distances", angles.len(), distances.len()),
            ));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(IsacError::invalid("angles", "must be finite"));
        }
        let mut p = DistanceProfile::new(distances)?;
        p.angles = Some(angles);
        Ok(p)
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }
    pub fn angles(&self) -> Option<&[f64]> {
        self.angles.as_deref()
    }
    pub fn len(&self) -> usize {
        self.distances.len()
    }
    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

pub(crate) fn ln_pdf_ordered_distance(l: usize, lambda_bs: f64, r: f64) -> f64 {
    let x = lambda_bs * PI * r * r;
    -x + std::f64::consts::LN_2 + l as f64 * x.ln() - r.ln() - ln_gamma(l as f64)
}

/// Density of the distance to the `l`-th nearest station,
/// `e^{−λπr²} 2(λπr²)^l / (r (l−1)!)`.
pub fn pdf_ordered_distance(l: usize, lambda_bs: f64, r: f64) -> Result<f64> {
    if l == 0 {
        return Err(IsacError::invalid("l", "order must be >= 1"));
    }
    if !(lambda_bs.is_finite() && lambda_bs > 0.0) {
        return Err(IsacError::invalid("lambda_bs", format!("must be > 0, got {lambda_bs}")));
    }
    if r.is_nan() {
        return Err(IsacError::domain("pdf_ordered_distance", "r is NaN"));
    }
    if r <= 0.0 || r == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(ln_pdf_ordered_distance(l, lambda_bs, r).exp())
}

/// Density of `R_1` given `R_l = rl`. The other `l − 1` stations are uniform
/// in the disk, so `R_1` is the nearest of them:
/// `2(l − 1) r1 (rl² − r1²)^{l−2} / rl^{2(l−1)}`.
pub fn pdf_r1_given_rl(l: usize, r1: f64, rl: f64) -> Result<f64> {
    if l < 2 {
        return Err(IsacError::invalid("l", format!("needs a second station, got l = {l}")));
    }
    if !(r1 > 0.0 && r1 < rl && rl.is_finite()) {
        return Err(IsacError::domain("pdf_r1_given_rl", format!("need 0 < r1 < rl, got r1 = {r1}, rl = {rl}")));
    }
    let t2 = (r1 / rl) * (r1 / rl);
    Ok(2.0 * (l - 1) as f64 * r1 / (rl * rl) * (1.0 - t2).powi(l as i32 - 2))
}

/// Joint density of `(R_1, R_l)`.
pub fn joint_pdf_r1_rl(l: usize, lambda_bs: f64, r1: f64, rl: f64) -> Result<f64> {
    Ok(pdf_ordered_distance(l, lambda_bs, rl)? * pdf_r1_given_rl(l, r1, rl)?)
}

/// `(ln 10 / (10 β))² ξ²`
fn crlb_scale(beta: f64, xi: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(IsacError::invalid("beta", format!("must be > 0, got {beta}")));
    }
    if !(xi.is_finite() && xi > 0.0) {
        return Err(IsacError::invalid("xi", format!("must be > 0, got {xi}")));
    }
    let k = LN_10 / (10.0 * beta);
    Ok(k * k * xi * xi)
}

/// Position CRLB of RSS ranging from the stations in `profile`:
/// `scale · 2∑r_l⁻² / ∑_l∑_m r_l⁻² r_m⁻² sin²(θ_l − θ_m)`.
pub fn crlb_exact(profile: &DistanceProfile, beta: f64, xi: f64) -> Result<f64> {
    let scale = crlb_scale(beta, xi)?;
    if profile.len() < 3 {
        return Err(IsacError::Unlocalizable(profile.len()));
    }
    let angles = profile
        .angles()
        .ok_or_else(|| IsacError::invalid("profile", "exact CRLB needs station angles"))?;
    let w: Vec<f64> = profile.distances().iter().map(|r| 1.0 / (r * r)).collect();
    let trace: f64 = w.iter().sum();
    let mut pairs = 0.0;
    for l in 0..w.len() {
        for m in (l + 1)..w.len() {
            let s = (angles[l] - angles[m]).sin();
            pairs += w[l] * w[m] * s * s;
        }
    }
    // pairs = det of the normalized FIM ∑ w u uᵀ.
    if pairs < 1e-14 * 0.25 * trace * trace {
        return Err(IsacError::SingularGeometry);
    }
    Ok(scale * 2.0 * trace / (2.0 * pairs))
}

/// Orientation-free lower bound `scale · 4 / ∑ r_l⁻²`.
pub fn crlb_lower_bound(distances: &[f64], beta: f64, xi: f64) -> Result<f64> {
    let scale = crlb_scale(beta, xi)?;
    if distances.len() < 3 {
        return Err(IsacError::Unlocalizable(distances.len()));
    }
    if distances.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
        return Err(IsacError::invalid("distances", "must be finite and > 0"));
    }
    Ok(scale * 4.0 / distances.iter().map(|r| 1.0 / (r * r)).sum::<f64>())
}

/// Whether some orientation of the stations attains [`crlb_lower_bound`]:
/// `∑ r_l⁻² ≥ 2 max r_k⁻²`. False for fewer than three stations.
pub fn achievability_check(distances: &[f64]) -> bool {
    if distances.len() < 3 {
        return false;
    }
    let w = distances.iter().map(|r| 1.0 / (r * r));
    let (sum, max) = w.fold((0.0, 0.0f64), |(s, m), x| (s + x, m.max(x)));
    sum >= 2.0 * max
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbour_law() {
        let lambda = 1e-5;
        for &r in &[10.0, 150.0, 400.0] {
            let want = 2.0 * PI * lambda * r * (-lambda * PI * r * r).exp();
            assert!((pdf_ordered_distance(1, lambda, r).unwrap() / want - 1.0).abs() < 1e-13);
        }
        assert_eq!(pdf_ordered_distance(3, lambda, 0.0).unwrap(), 0.0);
        assert!(pdf_ordered_distance(0, lambda, 1.0).is_err());
    }

    #[test]
    fn conditional_law() {
        // One other station, uniform in the disk.
        assert!((pdf_r1_given_rl(2, 0.3, 2.0).unwrap() - 2.0 * 0.3 / 4.0).abs() < 1e-15);
        assert!(pdf_r1_given_rl(1, 0.3, 2.0).is_err());
        assert!(pdf_r1_given_rl(3, 2.0, 2.0).is_err());
        assert!(pdf_r1_given_rl(3, 2.5, 2.0).is_err());
    }

    #[test]
    fn symmetric_triangle_attains_bound() {
        let p = DistanceProfile::with_angles(vec![50.0; 3], vec![0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]).unwrap();
        let exact = crlb_exact(&p, 3.6, 0.1259).unwrap();
        let bound = crlb_lower_bound(p.distances(), 3.6, 0.1259).unwrap();
        assert!((exact / bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_is_singular() {
        let p = DistanceProfile::with_angles(vec![10.0, 20.0, 30.0], vec![0.3, 0.3 + PI, 0.3]).unwrap();
        assert_eq!(crlb_exact(&p, 3.6, 0.1), Err(IsacError::SingularGeometry));
    }

    #[test]
    fn lower_bound_examples() {
        let k = LN_10 / 36.0;
        let want = k * k * 0.01 * 4.0 * 100.0 / 4.0;
        assert!((crlb_lower_bound(&[10.0; 4], 3.6, 0.1).unwrap() / want - 1.0).abs() < 1e-14);
        assert_eq!(crlb_lower_bound(&[1.0, 2.0], 3.6, 0.1), Err(IsacError::Unlocalizable(2)));
        assert!(achievability_check(&[5.0, 5.0, 5.0]));
        assert!(!achievability_check(&[1.0, 10.0, 10.0, 10.0]));
        assert!(!achievability_check(&[1.0, 1.0]));
    }

    #[test]
    fn realization_sorting_and_text() {
        let r = BsRealization::new(vec![[3.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -2.0]], 5.0).unwrap();
        let d: Vec<f64> = r.distances().collect();
        assert_eq!(d, vec![1.0, 1.0, 2.0, 3.0]);
        // Tie broken by angle: atan2 of (0,1) is π/2 < π for (−1,0).
        assert_eq!(r.positions()[0], [0.0, 1.0]);
        let back = BsRealization::parse_text(&r.to_text(), 5.0).unwrap();
        assert_eq!(back, r);
        assert!(BsRealization::parse_text("1 2 3\n", 5.0).is_err());
        assert!(BsRealization::new(vec![[6.0, 0.0]], 5.0).is_err());
    }

    #[test]
    fn ppp_guard_and_determinism() {
        assert!(matches!(sample_ppp(1.0, 2000.0, 1), Err(IsacError::ResourceGuard(_))));
        let a = sample_ppp(1e-5, 2000.0, 7).unwrap();
        let b = sample_ppp(1e-5, 2000.0, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.positions().iter().all(|p| p[0].hypot(p[1]) <= 2000.0));
    }
}
