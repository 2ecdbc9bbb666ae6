//! Monte Carlo estimates of the coverage and ergodic metrics from sampled
//! network snapshots.
//!
//! Each snapshot draws the stations of a Poisson field on a disk around the
//! user. The interference from beyond the disk is replaced by its mean, which
//! is exact in expectation and has negligible spread once the disk holds a
//! few hundred stations. Trial `t` of seed `s` always uses ChaCha8 stream `t`
//! of key `s`, so results do not depend on the number of worker threads.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;

use crate::analytic::{ser_of_sinr, CoverageQuery, ErgodicMetric, Metric};
use crate::error::{IsacError, Result};
use crate::geometry::{crlb_exact, crlb_lower_bound, DistanceProfile, MAX_EXPECTED_POINTS};
use crate::model::{BeamPattern, NetworkParams, QamOrder};

/// Expected station count of the default simulation disk.
pub const DEFAULT_WINDOW_POINTS: f64 = 2000.0;

/// Smallest accepted number of trials.
pub const MIN_TRIALS: usize = 100;

const Z95: f64 = 1.959_963_984_540_054;

/// Everything measured on one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMetrics {
    pub trial: u64,
    /// Participating stations, 0 when fewer than 3.
    pub l_participating: usize,
    /// Orientation-free CRLB bound (m²), `N_L` when unlocalizable.
    pub crlb_bound: f64,
    /// CRLB of the actual geometry, when localizable and not collinear.
    pub crlb_exact: Option<f64>,
    /// Fading-free participation SINR of the `l`-th nearest station,
    /// `l = 1..=L_P`; missing entries mean the disk held fewer stations.
    pub participation_sinr: Vec<f64>,
    pub sinr: f64,
    /// `log₂(1 + sinr)`
    pub rate: f64,
    pub ser: f64,
}

/// Sample mean with a 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub value: f64,
    pub half_width: f64,
    pub n_samples: usize,
}

impl EstimateWithCI {
    fn from_samples(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in values {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        if n == 0 {
            return None;
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Some(EstimateWithCI { value: mean, half_width: Z95 * (var / n as f64).sqrt(), n_samples: n })
    }

    fn proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        EstimateWithCI { value: p, half_width: Z95 * (p * (1.0 - p) / n as f64).sqrt(), n_samples: n }
    }

    /// Whether `x` lies within `max(floor, k × half_width)` of the estimate.
    pub fn agrees_with(&self, x: f64, floor: f64, k: f64) -> bool {
        (self.value - x).abs() <= floor.max(k * self.half_width)
    }
}

/// Simulation settings shared by every estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_trials: usize,
    pub seed: u64,
    /// Expected station count of the simulation disk.
    pub window_points: f64,
}

impl McConfig {
    pub fn new(n_trials: usize, seed: u64) -> Self {
        McConfig { n_trials, seed, window_points: DEFAULT_WINDOW_POINTS }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials < MIN_TRIALS {
            return Err(IsacError::invalid("n_trials", format!("must be >= {MIN_TRIALS}, got {}", self.n_trials)));
        }
        if !(self.window_points >= 50.0 && self.window_points <= MAX_EXPECTED_POINTS) {
            return Err(IsacError::invalid(
                "window_points",
                format!("must be in [50, {MAX_EXPECTED_POINTS:e}], got {}", self.window_points),
            ));
        }
        Ok(())
    }
}

/// Radius of the simulation disk holding `points` stations on average.
pub fn window_radius(params: &NetworkParams, points: f64) -> f64 {
    (points / (PI * params.lambda_bs())).sqrt()
}

/// `∑ r^{−β}` expected from stations beyond `radius`: `2πλ R^{2−β}/(β − 2)`.
fn path_loss_tail(params: &NetworkParams, radius: f64) -> f64 {
    let beta = params.beta();
    2.0 * PI * params.lambda_bs() * radius.powf(2.0 - beta) / (beta - 2.0)
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws one snapshot. The serving station is the nearest one and its beam
/// points at the user (gain `M1`); every other station interferes with a
/// random sector gain. Participation uses the fading-free, gain-free SINR.
pub fn simulate_snapshot(
    params: &NetworkParams,
    beam: &BeamPattern,
    qam: QamOrder,
    cfg: &McConfig,
    trial: u64,
) -> Result<SnapshotMetrics> {
    cfg.validate()?;
    Ok(snapshot(params, beam, qam, cfg, trial))
}

fn snapshot(params: &NetworkParams, beam: &BeamPattern, qam: QamOrder, cfg: &McConfig, trial: u64) -> SnapshotMetrics {
    let mut rng = trial_rng(cfg.seed, trial);
    let beta = params.beta();
    let l_p = params.l_p();
    let radius = window_radius(params, cfg.window_points);
    let count = Poisson::new(cfg.window_points).expect("validated mean").sample(&mut rng) as usize;
    let mut r2: Vec<f64> = (0..count).map(|_| radius * radius * rng.random::<f64>()).collect();
    let near = (l_p + 1).min(count);
    if near > 0 && near < count {
        r2.select_nth_unstable_by(near - 1, f64::total_cmp);
    }
    r2[..near].sort_unstable_by(f64::total_cmp);
    // Angles are independent of radii, so only the nearest need one.
    let angles: Vec<f64> = (0..near).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
    let loss: Vec<f64> = r2.iter().map(|&x| x.powf(-beta / 2.0)).collect();
    let tail = path_loss_tail(params, radius);

    // Participation: SINR_l = r_l^{−β} / (∑_{i>l} r_i^{−β} + N0/P_T).
    let total: f64 = loss.iter().sum::<f64>() + tail;
    let noise_p = params.n0() / params.p_t();
    let mut beyond = total;
    let mut participation_sinr = Vec::with_capacity(l_p);
    for &g in loss.iter().take(near.min(l_p)) {
        beyond -= g;
        participation_sinr.push(g / (beyond.max(0.0) + noise_p));
    }
    let gamma = params.gamma();
    let l = participation_sinr.iter().rposition(|&s| s >= gamma).map_or(0, |i| i + 1);
    let l = if l < 3 { 0 } else { l };

    let (crlb_bound, crlb_exact_value) = if l == 0 {
        (params.n_l_cap(), None)
    } else {
        let d: Vec<f64> = r2[..l].iter().map(|x| x.sqrt()).collect();
        let bound = crlb_lower_bound(&d, beta, params.xi()).expect("three or more positive distances");
        let exact = DistanceProfile::with_angles(d, angles[..l].to_vec())
            .and_then(|p| crlb_exact(&p, beta, params.xi()))
            .ok();
        (bound, exact)
    };

    // Communication: Rayleigh fading everywhere, gain M1 on the serving link.
    let (sinr, rate, ser) = if count == 0 {
        (0.0, 0.0, qam.max_ser())
    } else {
        let p_t = params.p_t();
        let (c1, m1, m2) = (beam.c1(), beam.m1(), beam.m2());
        let fade: f64 = Exp1.sample(&mut rng);
        let signal = p_t * m1 * loss[0] * fade;
        let mut interference = p_t * beam.mean_gain() * tail;
        for &g in &loss[1..] {
            let h: f64 = Exp1.sample(&mut rng);
            let gain = if rng.random::<f64>() < c1 { m1 } else { m2 };
            interference += p_t * h * gain * g;
        }
        let sinr: f64 = signal / (interference + params.sigma_n2());
        (sinr, sinr.ln_1p() / std::f64::consts::LN_2, ser_of_sinr(sinr, qam).expect("sinr >= 0"))
    };
    SnapshotMetrics {
        trial,
        l_participating: l,
        crlb_bound,
        crlb_exact: crlb_exact_value,
        participation_sinr,
        sinr,
        rate,
        ser,
    }
}

/// Simulates `cfg.n_trials` snapshots in parallel, in trial order.
pub fn simulate_batch(
    params: &NetworkParams,
    beam: &BeamPattern,
    qam: QamOrder,
    cfg: &McConfig,
) -> Result<Vec<SnapshotMetrics>> {
    cfg.validate()?;
    Ok((0..cfg.n_trials as u64).into_par_iter().map(|t| snapshot(params, beam, qam, cfg, t)).collect())
}

struct Events {
    positioning: Option<f64>,
    comm: Option<CommEvent>,
}

#[derive(Clone, Copy)]
enum CommEvent {
    Sinr(f64),
    Ser(f64, QamOrder),
}

impl Events {
    fn positioning(&self, m: &SnapshotMetrics) -> bool {
        self.positioning.is_none_or(|e| m.crlb_bound <= e)
    }
    fn comm(&self, m: &SnapshotMetrics) -> bool {
        match self.comm {
            None => true,
            Some(CommEvent::Sinr(e)) => m.sinr >= e,
            Some(CommEvent::Ser(e, qam)) => ser_of_sinr(m.sinr, qam).expect("sinr >= 0") <= e,
        }
    }
}

fn comm_event(query: &CoverageQuery) -> CommEvent {
    if query.metric.needs_eps2() {
        CommEvent::Sinr(query.eps2.expect("validated"))
    } else {
        CommEvent::Ser(query.eps3.expect("validated"), query.qam.expect("validated"))
    }
}

/// Event frequency of `query` over already simulated snapshots. Conditional
/// metrics count the joint event among snapshots meeting the condition.
pub fn estimate_from(snapshots: &[SnapshotMetrics], query: &CoverageQuery) -> Result<EstimateWithCI> {
    query.validate()?;
    if snapshots.is_empty() {
        return Err(IsacError::invalid("snapshots", "empty batch"));
    }
    let eps1 = query.eps1;
    let (target, condition) = match query.metric {
        Metric::Positioning => (Events { positioning: eps1, comm: None }, None),
        Metric::CommunicationSinr | Metric::CommunicationSer => {
            (Events { positioning: None, comm: Some(comm_event(query)) }, None)
        }
        Metric::JointCrlbSinr | Metric::JointCrlbSer => {
            (Events { positioning: eps1, comm: Some(comm_event(query)) }, None)
        }
        Metric::CondPGivenS | Metric::CondPGivenC => (
            Events { positioning: eps1, comm: None },
            Some(Events { positioning: None, comm: Some(comm_event(query)) }),
        ),
        Metric::CondSGivenP | Metric::CondCGivenP => (
            Events { positioning: None, comm: Some(comm_event(query)) },
            Some(Events { positioning: eps1, comm: None }),
        ),
    };
    let hit = |m: &SnapshotMetrics| target.positioning(m) && target.comm(m);
    match condition {
        None => Ok(EstimateWithCI::proportion(snapshots.iter().filter(|m| hit(m)).count(), snapshots.len())),
        Some(c) => {
            let kept: Vec<&SnapshotMetrics> =
                snapshots.iter().filter(|m| c.positioning(m) && c.comm(m)).collect();
            if kept.is_empty() {
                return Err(IsacError::DegenerateCondition(0.0));
            }
            Ok(EstimateWithCI::proportion(kept.iter().filter(|m| hit(m)).count(), kept.len()))
        }
    }
}

/// Coverage of `query` from `cfg.n_trials` fresh snapshots.
pub fn estimate_coverage(
    query: &CoverageQuery,
    params: &NetworkParams,
    beam: &BeamPattern,
    cfg: &McConfig,
) -> Result<EstimateWithCI> {
    query.validate()?;
    let qam = query.qam.unwrap_or(QamOrder::new(16).expect("16 is a square power of two"));
    estimate_from(&simulate_batch(params, beam, qam, cfg)?, query)
}

/// Sample moments of the CRLB bound, with and without unlocalizable users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbEstimate {
    pub mean_included: EstimateWithCI,
    pub mean_excluded: EstimateWithCI,
    pub mean_sqrt_included: EstimateWithCI,
    pub mean_sqrt_excluded: EstimateWithCI,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErgodicEstimate {
    Crlb(CrlbEstimate),
    Mean(EstimateWithCI),
}

impl ErgodicEstimate {
    /// `E[C̲]` with unlocalizable users included, or the plain mean.
    pub fn value(&self) -> EstimateWithCI {
        match self {
            ErgodicEstimate::Crlb(c) => c.mean_included,
            ErgodicEstimate::Mean(m) => *m,
        }
    }
}

fn degenerate<T>(v: Option<T>) -> Result<T> {
    v.ok_or(IsacError::DegenerateCondition(0.0))
}

fn crlb_moments<'a>(kept: impl Iterator<Item = &'a SnapshotMetrics> + Clone) -> Result<CrlbEstimate> {
    let localizable = kept.clone().filter(|m| m.l_participating > 0);
    Ok(CrlbEstimate {
        mean_included: degenerate(EstimateWithCI::from_samples(kept.clone().map(|m| m.crlb_bound)))?,
        mean_excluded: degenerate(EstimateWithCI::from_samples(localizable.clone().map(|m| m.crlb_bound)))?,
        mean_sqrt_included: degenerate(EstimateWithCI::from_samples(kept.map(|m| m.crlb_bound.sqrt())))?,
        mean_sqrt_excluded: degenerate(EstimateWithCI::from_samples(localizable.map(|m| m.crlb_bound.sqrt())))?,
    })
}

/// Ergodic values as direct sample means over already simulated snapshots.
pub fn ergodic_from(snapshots: &[SnapshotMetrics], metric: ErgodicMetric) -> Result<ErgodicEstimate> {
    match metric {
        ErgodicMetric::Crlb => crlb_moments(snapshots.iter()).map(ErgodicEstimate::Crlb),
        ErgodicMetric::Rate => degenerate(EstimateWithCI::from_samples(snapshots.iter().map(|m| m.rate))).map(ErgodicEstimate::Mean),
        ErgodicMetric::CrlbGivenSinr { eps2 } => {
            crlb_moments(snapshots.iter().filter(move |m| m.sinr >= eps2)).map(ErgodicEstimate::Crlb)
        }
        ErgodicMetric::SerGivenCrlb { eps1, qam } => degenerate(EstimateWithCI::from_samples(
            snapshots.iter().filter(|m| m.crlb_bound <= eps1).map(|m| ser_of_sinr(m.sinr, qam).expect("sinr >= 0")),
        ))
        .map(ErgodicEstimate::Mean),
        ErgodicMetric::RateGivenCrlb { eps1 } => degenerate(EstimateWithCI::from_samples(
            snapshots.iter().filter(|m| m.crlb_bound <= eps1).map(|m| m.rate),
        ))
        .map(ErgodicEstimate::Mean),
    }
}

pub fn estimate_ergodic(
    metric: ErgodicMetric,
    params: &NetworkParams,
    beam: &BeamPattern,
    cfg: &McConfig,
) -> Result<ErgodicEstimate> {
    let qam = match metric {
        ErgodicMetric::SerGivenCrlb { qam, .. } => qam,
        _ => QamOrder::new(16).expect("16 is a square power of two"),
    };
    ergodic_from(&simulate_batch(params, beam, qam, cfg)?, metric)
}

/// Histogram of the participating-station count, index `l = 0..=L_P`.
pub fn participation_histogram(snapshots: &[SnapshotMetrics], l_p: usize) -> Vec<usize> {
    let mut h = vec![0; l_p + 1];
    for m in snapshots {
        h[m.l_participating.min(l_p)] += 1;
    }
    h
}

/// Aggregate interference at the user from a Poisson field beyond `r1`, with
/// Rayleigh fading and sector gains, for checking the Laplace functional.
pub fn sample_interference(params: &NetworkParams, beam: &BeamPattern, r1: f64, cfg: &McConfig, trial: u64) -> f64 {
    let mut rng = trial_rng(cfg.seed, trial);
    let beta = params.beta();
    let outer = window_radius(params, cfg.window_points).max(2.0 * r1);
    let mean = params.lambda_bs() * PI * (outer * outer - r1 * r1);
    let count = Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize;
    let mut total = params.p_t() * beam.mean_gain() * path_loss_tail(params, outer);
    for _ in 0..count {
        let r2 = r1 * r1 + (outer * outer - r1 * r1) * rng.random::<f64>();
        let h: f64 = Exp1.sample(&mut rng);
        let gain = if rng.random::<f64>() < beam.c1() { beam.m1() } else { beam.m2() };
        total += params.p_t() * h * gain * r2.powf(-beta / 2.0);
    }
    total
}

/// Writes one CSV row per snapshot: `trial,L,crlb_bound,sinr,rate,ser`.
pub fn write_snapshots_csv<W: Write>(mut out: W, snapshots: &[SnapshotMetrics]) -> io::Result<()> {
    writeln!(out, "trial,L,crlb_bound,sinr,rate,ser")?;
    for m in snapshots {
        writeln!(out, "{},{},{:e},{:e},{:e},{:e}", m.trial, m.l_participating, m.crlb_bound, m.sinr, m.rate, m.ser)?;
    }
    Ok(())
}
