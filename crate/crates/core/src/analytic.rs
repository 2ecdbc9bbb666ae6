//! Coverage probabilities and ergodic values by numerical integration.
//!
//! Positioning uses the gamma-CDF surrogate of order `N = params.n_approx()`
//! for the event `μ ∑ r_l⁻² ≥ 1`, which turns the coverage into an
//! alternating binomial sum of Laplace functionals. Communication assumes
//! Rayleigh fading on every link, nearest-station association and the
//! two-level sectored beam for interferers.
//!
//! By default the participating stations inside the radius `R_l` enter
//! through Poisson functionals over the disk or annulus. That is an
//! approximation for a fixed number of points, and it makes the positioning
//! marginal of [`joint_cov`] differ slightly from [`positioning_cov`].
//! Conditional ratios therefore take their positioning marginal from the
//! joint kernel ([`positioning_marginal_joint`]). [`InteriorLaw::Binomial`]
//! switches both kernels to the exact conditional law, under which the two
//! marginals coincide.

use std::cell::Cell;
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{checked_probability, IsacError, Result};
use crate::geometry::ln_pdf_ordered_distance;
use crate::model::{BeamPattern, NetworkParams, QamOrder};
use crate::specfun::quadrature::{integrate, integrate_panels, integrate_to_infinity_panels, Tolerance};
use crate::specfun::{
    exclusion_h, exponential_integral_e1, gamma_cdf_bound_rate, gauss_q, hyp2f1_neg, inv_gauss_q, legendre_rule,
    InvSqMode, QuadratureRule, E1_LOG_APPROX_B,
};

/// Conditioning probabilities below this are refused.
pub const MIN_CONDITIONING_PROBABILITY: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Positioning,
    CommunicationSinr,
    CommunicationSer,
    JointCrlbSinr,
    JointCrlbSer,
    CondPGivenS,
    CondSGivenP,
    CondPGivenC,
    CondCGivenP,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Positioning,
        Metric::CommunicationSinr,
        Metric::CommunicationSer,
        Metric::JointCrlbSinr,
        Metric::JointCrlbSer,
        Metric::CondPGivenS,
        Metric::CondSGivenP,
        Metric::CondPGivenC,
        Metric::CondCGivenP,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Positioning => "positioning",
            Metric::CommunicationSinr => "communication_sinr",
            Metric::CommunicationSer => "communication_ser",
            Metric::JointCrlbSinr => "joint_crlb_sinr",
            Metric::JointCrlbSer => "joint_crlb_ser",
            Metric::CondPGivenS => "cond_p_given_s",
            Metric::CondSGivenP => "cond_s_given_p",
            Metric::CondPGivenC => "cond_p_given_c",
            Metric::CondCGivenP => "cond_c_given_p",
        }
    }

    pub fn needs_eps1(self) -> bool {
        !matches!(self, Metric::CommunicationSinr | Metric::CommunicationSer)
    }

    pub fn needs_eps2(self) -> bool {
        matches!(self, Metric::CommunicationSinr | Metric::JointCrlbSinr | Metric::CondPGivenC | Metric::CondCGivenP)
    }

    pub fn needs_eps3(self) -> bool {
        matches!(self, Metric::CommunicationSer | Metric::JointCrlbSer | Metric::CondPGivenS | Metric::CondSGivenP)
    }

    pub fn is_conditional(self) -> bool {
        matches!(self, Metric::CondPGivenS | Metric::CondSGivenP | Metric::CondPGivenC | Metric::CondCGivenP)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = IsacError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| IsacError::invalid("metric", format!("unknown metric `{s}`")))
    }
}

/// A coverage event and its thresholds: `eps1` on the CRLB bound (m²),
/// `eps2` on the SINR (linear), `eps3` on the SER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageQuery {
    pub metric: Metric,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub eps3: Option<f64>,
    pub qam: Option<QamOrder>,
}

impl CoverageQuery {
    pub fn new(metric: Metric) -> Self {
        CoverageQuery { metric, eps1: None, eps2: None, eps3: None, qam: None }
    }

    pub fn positioning(eps1: f64) -> Self {
        CoverageQuery::new(Metric::Positioning).with_eps1(eps1)
    }

    pub fn sinr(eps2: f64) -> Self {
        CoverageQuery::new(Metric::CommunicationSinr).with_eps2(eps2)
    }

    pub fn ser(eps3: f64, qam: QamOrder) -> Self {
        CoverageQuery::new(Metric::CommunicationSer).with_eps3(eps3, qam)
    }

    pub fn joint_sinr(eps1: f64, eps2: f64) -> Self {
        CoverageQuery::new(Metric::JointCrlbSinr).with_eps1(eps1).with_eps2(eps2)
    }

    pub fn joint_ser(eps1: f64, eps3: f64, qam: QamOrder) -> Self {
        CoverageQuery::new(Metric::JointCrlbSer).with_eps1(eps1).with_eps3(eps3, qam)
    }

    pub fn with_eps1(mut self, eps1: f64) -> Self {
        self.eps1 = Some(eps1);
        self
    }

    pub fn with_eps2(mut self, eps2: f64) -> Self {
        self.eps2 = Some(eps2);
        self
    }

    pub fn with_eps3(mut self, eps3: f64, qam: QamOrder) -> Self {
        self.eps3 = Some(eps3);
        self.qam = Some(qam);
        self
    }

    /// Checks that every threshold the metric needs is present and in range.
    /// `eps1` may be `+∞`; `eps3 = 1` is accepted as the sure SER event.
    pub fn validate(&self) -> Result<()> {
        let m = self.metric;
        if m.needs_eps1() {
            let e = self.eps1.ok_or_else(|| IsacError::invalid("eps1", format!("required by {m}")))?;
            if e.is_nan() || e <= 0.0 {
                return Err(IsacError::invalid("eps1", format!("must be > 0, got {e}")));
            }
        }
        if m.needs_eps2() {
            let e = self.eps2.ok_or_else(|| IsacError::invalid("eps2", format!("required by {m}")))?;
            if !(e.is_finite() && e > 0.0) {
                return Err(IsacError::invalid("eps2", format!("must be finite and > 0, got {e}")));
            }
        }
        if m.needs_eps3() {
            let e = self.eps3.ok_or_else(|| IsacError::invalid("eps3", format!("required by {m}")))?;
            if !(e > 0.0 && e <= 1.0) {
                return Err(IsacError::invalid("eps3", format!("must be in (0, 1], got {e}")));
            }
            if self.qam.is_none() {
                return Err(IsacError::invalid("qam", format!("required by {m}")));
            }
        }
        Ok(())
    }

    fn eps1(&self) -> f64 {
        self.eps1.expect("validated")
    }

    /// SINR threshold of the communication event; `None` when it always holds.
    fn comm_threshold(&self) -> Result<Option<f64>> {
        if let Some(e) = self.eps2.filter(|_| self.metric.needs_eps2()) {
            return Ok(Some(e));
        }
        let qam = self.qam.expect("validated");
        Ok(match sinr_for_ser(self.eps3.expect("validated"), qam)? {
            SerThreshold::Sinr(t) => Some(t),
            SerThreshold::AlwaysCovered => None,
        })
    }
}

/// Which expression to evaluate where the printed closed forms are
/// approximate or inconsistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPath {
    #[default]
    DefiningIntegral,
    PaperClosedForm,
}

impl EvalPath {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalPath::DefiningIntegral => "defining_integral",
            EvalPath::PaperClosedForm => "paper_closed_form",
        }
    }
}

impl FromStr for EvalPath {
    type Err = IsacError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "defining_integral" => Ok(EvalPath::DefiningIntegral),
            "paper_closed_form" => Ok(EvalPath::PaperClosedForm),
            other => Err(IsacError::invalid("path", format!("`{other}` is not defining_integral or paper_closed_form"))),
        }
    }
}

/// How the stations inside the participation radius are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InteriorLaw {
    /// Poisson functional over the disk or annulus, averaged over its radius.
    #[default]
    Poisson,
    /// Exact law given the ordered distances: the inner stations are i.i.d.
    /// uniform on the disk or annulus.
    Binomial,
}

impl InteriorLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            InteriorLaw::Poisson => "poisson",
            InteriorLaw::Binomial => "binomial",
        }
    }
}

impl FromStr for InteriorLaw {
    type Err = IsacError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(InteriorLaw::Poisson),
            "binomial" => Ok(InteriorLaw::Binomial),
            other => Err(IsacError::invalid("interior", format!("`{other}` is not poisson or binomial"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub path: EvalPath,
    pub interior: InteriorLaw,
    /// Relative tolerance of the adaptive integrations.
    pub rel_tol: f64,
    /// Gauss–Legendre nodes per decade of threshold in the ergodic integrals
    /// built on the joint kernel.
    pub ergodic_nodes_per_decade: usize,
    /// Re-evaluate the joint kernel with twice the Legendre order and warn if
    /// the two disagree.
    pub check_quadrature: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            path: EvalPath::DefiningIntegral,
            interior: InteriorLaw::Poisson,
            rel_tol: 1e-7, ergodic_nodes_per_decade: 4, check_quadrature: false }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 0.1) {
            return Err(IsacError::invalid("rel_tol", format!("must be in (0, 0.1), got {}", self.rel_tol)));
        }
        if self.ergodic_nodes_per_decade < 2 {
            return Err(IsacError::invalid("ergodic_nodes_per_decade", "must be >= 2"));
        }
        Ok(())
    }

    fn tol(&self) -> Tolerance {
        Tolerance::rel(self.rel_tol).with_abs(1e-13)
    }
}

/// `C(N, n)(−1)^n` for `n = 0..=N`.
fn signed_binomials(n_approx: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_approx + 1);
    let mut c = 1.0;
    for n in 0..=n_approx {
        out.push(if n % 2 == 0 { c } else { -c });
        c = c * (n_approx - n) as f64 / (n + 1) as f64;
    }
    out
}

/// Typical distance to the `l`-th station, used to scale mapped integrals.
fn ordered_scale(l: usize, lambda_bs: f64) -> f64 {
    (l as f64 / (PI * lambda_bs)).sqrt()
}

fn check_eps1(eps1: f64) -> Result<()> {
    if eps1.is_nan() || eps1 <= 0.0 {
        return Err(IsacError::invalid("eps1", format!("must be > 0, got {eps1}")));
    }
    Ok(())
}

/// `2∫_0^r (1 − e^{−c/s²}) s ds = r²(1 − e^{−x}) + c E1(x)` with `x = c/r²`.
/// The approximate mode replaces `E1(x)` by `−ln(1 − e^{−b x})`.
fn disk_exponent(c: f64, r: f64, mode: InvSqMode) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let x = c / (r * r);
    if x > 700.0 {
        return r * r;
    }
    let e1 = match mode {
        InvSqMode::Exact => exponential_integral_e1(x),
        InvSqMode::Approx { b } => -(-(-b * x).exp_m1()).ln(),
    };
    r * r * -(-x).exp_m1() + c * e1
}

/// Coverage of the positioning bound given that exactly `l` stations take
/// part, `P{C̲ ≤ ε1 | L = l}`.
///
/// With the Poisson interior the `l` stations are treated as a Poisson field
/// inside the disk of radius `R_l`, averaged over the law of `R_l`. That field
/// is empty with probability `e^{−λπR_l²}`, so the value tends to `1 − 2^{−l}`
/// rather than 1 as `eps1 → ∞`. The binomial interior conditions on `R_l`
/// and takes the other `l − 1` stations uniform in the disk, giving
/// `E[e^{−x} ψ(R_l)^{l−1}]` per order with `ψ = e^{−x} − x E1(x)`,
/// `x = anμ/R_l²`. The closed-form path swaps `E1` for its logarithmic
/// surrogate in either case.
pub fn positioning_cov_conditional(eps1: f64, l: usize, params: &NetworkParams, opts: &EvalOptions) -> Result<f64> {
    check_eps1(eps1)?;
    opts.validate()?;
    if l < 3 {
        return Err(IsacError::invalid("l", format!("positioning needs at least 3 stations, got {l}")));
    }
    let raw = positioning_kernel(eps1, l, params, opts);
    checked_probability("positioning_cov_conditional", raw)
}

fn positioning_kernel(eps1: f64, l: usize, params: &NetworkParams, opts: &EvalOptions) -> f64 {
    let lambda = params.lambda_bs();
    let coef = signed_binomials(params.n_approx());
    let a = gamma_cdf_bound_rate(params.n_approx());
    let mu = params.positioning_mu(eps1);
    let mode = match opts.path {
        EvalPath::DefiningIntegral => InvSqMode::Exact,
        EvalPath::PaperClosedForm => InvSqMode::Approx { b: E1_LOG_APPROX_B },
    };
    let integrand = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let ln_pdf = ln_pdf_ordered_distance(l, lambda, r);
        let mut sum = coef[0];
        for (n, &cn) in coef.iter().enumerate().skip(1) {
            let c = a * n as f64 * mu;
            let d = if c.is_finite() { disk_exponent(c, r, mode) } else { r * r };
            sum += cn
                * match opts.interior {
                    InteriorLaw::Poisson => (-PI * lambda * d).exp(),
                    InteriorLaw::Binomial => {
                        let psi = 1.0 - d / (r * r);
                        if psi <= 0.0 {
                            0.0
                        } else {
                            (-c / (r * r) + (l - 1) as f64 * psi.ln()).exp()
                        }
                    }
                };
        }
        sum * ln_pdf.exp()
    };
    integrate_to_infinity_panels(integrand, 0.0, ordered_scale(l, lambda), 4, opts.tol()).value
}

/// `P{SINR_l ≥ γ}` for the fading-free, beam-free participation SINR of the
/// `l`-th nearest station against the stations beyond it.
pub fn localizability(l: usize, gamma: f64, params: &NetworkParams) -> Result<f64> {
    if l == 0 {
        return Err(IsacError::invalid("l", "order must be >= 1"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(IsacError::invalid("gamma", format!("must be finite and > 0, got {gamma}")));
    }
    let lambda = params.lambda_bs();
    let beta = params.beta();
    let a = gamma_cdf_bound_rate(params.n_approx());
    let noise = params.n0() / params.p_t();
    // Per-order constants: signed binomial (with the extra −1), a n γ, h(a n γ).
    let terms: Vec<(f64, f64, f64)> = signed_binomials(params.n_approx())
        .into_iter()
        .enumerate()
        .skip(1)
        .map(|(n, c)| {
            let k = a * n as f64 * gamma;
            (-c, k, exclusion_h(k, beta))
        })
        .collect();
    let integrand = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let ln_pdf = ln_pdf_ordered_distance(l, lambda, r);
        let r_beta = r.powf(beta);
        terms
            .iter()
            .map(|&(c, k, h)| c * (ln_pdf - k * r_beta * noise - PI * lambda * r * r * h).exp())
            .sum::<f64>()
    };
    let tol = Tolerance::rel(1e-12).with_abs(1e-15);
    let raw = integrate_to_infinity_panels(integrand, 0.0, ordered_scale(l, lambda), 4, tol).value;
    checked_probability("localizability", raw)
}

fn clamp_pmf(raw: f64) -> Result<f64> {
    if raw >= 0.0 {
        Ok(raw.min(1.0))
    } else if raw > -1e-12 {
        Ok(0.0)
    } else {
        Err(IsacError::ProbabilityOutOfRange { what: "pmf_participation", raw })
    }
}

/// `P{L = l}` ignoring the `L_P` cap: `localizability(l) − localizability(l + 1)`.
pub fn pmf_participation(l: usize, gamma: f64, params: &NetworkParams) -> Result<f64> {
    clamp_pmf(localizability(l, gamma, params)? - localizability(l + 1, gamma, params)?)
}

/// Law of the participating-station count under the `L_P` cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Participation {
    l_p: usize,
    // at_least[l] = P_L(l | γ) for l = 3..=l_p, earlier slots unused.
    at_least: Vec<f64>,
}

impl Participation {
    pub fn new(params: &NetworkParams) -> Result<Self> {
        let l_p = params.l_p();
        let gamma = params.gamma();
        let values: Vec<f64> = (3..=l_p)
            .into_par_iter()
            .map(|l| localizability(l, gamma, params))
            .collect::<Result<_>>()?;
        let mut at_least = vec![f64::NAN; 3];
        at_least.extend(values);
        Ok(Participation { l_p, at_least })
    }

    pub fn l_p(&self) -> usize {
        self.l_p
    }

    /// `P{L ≥ l}` for `3 ≤ l ≤ L_P`.
    pub fn at_least(&self, l: usize) -> f64 {
        assert!((3..=self.l_p).contains(&l), "l = {l} outside 3..={}", self.l_p);
        self.at_least[l]
    }

    /// `(l, P{min(L, L_P) = l})` for `l = 3..=L_P`.
    pub fn weights(&self) -> Result<Vec<(usize, f64)>> {
        (3..=self.l_p)
            .map(|l| {
                let w = if l == self.l_p { self.at_least[l] } else { clamp_pmf(self.at_least[l] - self.at_least[l + 1])? };
                Ok((l, w))
            })
            .collect()
    }

    /// `1 − P_L(3 | γ)`
    pub fn unlocalizable(&self) -> f64 {
        1.0 - self.at_least[3]
    }
}

/// Marginal positioning coverage `P{C̲ ≤ ε1}`: the participation-weighted
/// conditional coverages plus the unlocalizable mass once `ε1 ≥ N_L`.
pub fn positioning_cov(eps1: f64, params: &NetworkParams, opts: &EvalOptions) -> Result<f64> {
    check_eps1(eps1)?;
    opts.validate()?;
    let part = Participation::new(params)?;
    positioning_cov_with(&part, eps1, params, opts)
}

fn positioning_cov_with(part: &Participation, eps1: f64, params: &NetworkParams, opts: &EvalOptions) -> Result<f64> {
    let localizable = positioning_localizable(part, eps1, params, opts)?;
    let step = if eps1 >= params.n_l_cap() { part.unlocalizable() } else { 0.0 };
    checked_probability("positioning_cov", localizable + step)
}

fn positioning_localizable(part: &Participation, eps1: f64, params: &NetworkParams, opts: &EvalOptions) -> Result<f64> {
    let weights = part.weights()?;
    let terms: Vec<f64> =
        weights.par_iter().map(|&(l, w)| if w == 0.0 { 0.0 } else { w * positioning_kernel(eps1, l, params, opts) }).collect();
    Ok(terms.iter().sum())
}

/// `φ(k) = 2∫_1^∞ k x^{−β} / (1 + k x^{−β}) x dx
///       = 2k/(β − 2) ₂F₁(1, 1 − 2/β; 2 − 2/β; −k)`.
fn interference_phi(k: f64, beta: f64) -> Result<f64> {
    if k == 0.0 {
        return Ok(0.0);
    }
    let delta = 2.0 / beta;
    Ok(2.0 * k / (beta - 2.0) * hyp2f1_neg(1.0 - delta, 2.0 - delta, -k)?)
}

/// `E[e^{−s I}]` for the interference from stations beyond `r1`, each with
/// unit-mean exponential fading and a random sectored gain.
///
/// The defining path integrates `2πλ∫_{r1}^∞ [1 − ∑_t c_t/(1 + s P_T M_t r^{−β})] r dr`
/// adaptively. The closed-form path evaluates the printed expression, whose
/// leading `r1^{β+2}` term makes it exceed 1 for all but tiny `r1`; such
/// values are reported as [`IsacError::ProbabilityOutOfRange`].
pub fn laplace_interference(
    s: f64,
    r1: f64,
    params: &NetworkParams,
    beam: &BeamPattern,
    opts: &EvalOptions,
) -> Result<f64> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(IsacError::invalid("s", format!("must be finite and >= 0, got {s}")));
    }
    if !(r1.is_finite() && r1 > 0.0) {
        return Err(IsacError::invalid("r1", format!("must be finite and > 0, got {r1}")));
    }
    opts.validate()?;
    if s == 0.0 {
        return Ok(1.0);
    }
    let lambda = params.lambda_bs();
    let beta = params.beta();
    let p_t = params.p_t();
    match opts.path {
        EvalPath::DefiningIntegral => {
            let lobes = beam.lobes();
            let f = |r: f64| {
                let path = p_t * r.powf(-beta);
                2.0 * r * lobes.iter().map(|&(c, m)| c * s * path * m / (1.0 + s * path * m)).sum::<f64>()
            };
            let r0 = r1.max((s * p_t * beam.m1()).powf(1.0 / beta));
            let integral = integrate_to_infinity_panels(f, r1, r0, 4, opts.tol());
            checked_probability("laplace_interference", (-PI * lambda * integral.value).exp())
        }
        EvalPath::PaperClosedForm => {
            let delta = 2.0 / beta;
            let spt = s * p_t;
            let rb = r1.powf(beta);
            let boundary = 1.0 - beam.lobes().iter().map(|&(c, m)| c / (1.0 + spt * m)).sum::<f64>();
            let lobe_sum: f64 = beam.lobes().iter().map(|&(c, m)| c * m / (spt * m + rb)).sum();
            let hyper = 2.0 / (rb * (beta - 2.0)) * hyp2f1_neg(1.0 - delta, 2.0 - delta, -spt * beam.m1() / rb)?;
            let exponent = PI * lambda * r1.powf(beta + 2.0) * boundary - PI * lambda * spt * r1 * r1 / 2.0 * (lobe_sum + hyper);
            let value = exponent.exp();
            if !(value > 0.0 && value <= 1.0) {
                return Err(IsacError::ProbabilityOutOfRange { what: "laplace_interference (closed form)", raw: value });
            }
            Ok(value)
        }
    }
}

/// `∑_t c_t φ(ε2 M_t / M1)`: interference exponent per unit `πλ r1²` for a
/// serving link with gain `M1`.
fn sinr_interference_factor(eps2: f64, params: &NetworkParams, beam: &BeamPattern) -> Result<f64> {
    let mut sum = 0.0;
    for (c, m) in beam.lobes() {
        sum += c * interference_phi(eps2 * m / beam.m1(), params.beta())?;
    }
    Ok(sum)
}

/// Communication coverage `P{Υ ≥ ε2}` with the serving beam aligned (gain
/// `M1`). The Laplace functional enters through its exact hypergeometric
/// form; the closed-form path of [`laplace_interference`] is not a
/// probability over the physical range of `r1` and is not used here.
pub fn comm_cov_sinr(eps2: f64, params: &NetworkParams, beam: &BeamPattern, opts: &EvalOptions) -> Result<f64> {
    if eps2.is_nan() || eps2 <= 0.0 {
        return Err(IsacError::invalid("eps2", format!("must be > 0, got {eps2}")));
    }
    opts.validate()?;
    if eps2 == f64::INFINITY {
        return Ok(0.0);
    }
    let lambda = params.lambda_bs();
    let beta = params.beta();
    let factor = 1.0 + sinr_interference_factor(eps2, params, beam)?;
    let snr_k = eps2 * params.sigma_n2() / (params.p_t() * beam.m1());
    let f = |r: f64| 2.0 * PI * lambda * r * (-snr_k * r.powf(beta) - PI * lambda * r * r * factor).exp();
    let r0 = 1.0 / (PI * lambda * factor).sqrt();
    let raw = integrate_to_infinity_panels(f, 0.0, r0, 4, opts.tol()).value;
    checked_probability("comm_cov_sinr", raw)
}

/// SER of square K-QAM at linear SINR `upsilon`: `4vQ − 4v²Q²`, `Q = Q(√(ςΥ))`.
pub fn ser_of_sinr(upsilon: f64, qam: QamOrder) -> Result<f64> {
    if upsilon.is_nan() || upsilon < 0.0 {
        return Err(IsacError::domain("ser_of_sinr", format!("SINR {upsilon} must be >= 0")));
    }
    let v = qam.v();
    let q = gauss_q((qam.varsigma() * upsilon).sqrt());
    Ok(4.0 * v * q - 4.0 * v * v * q * q)
}

/// SINR threshold equivalent to an SER threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SerThreshold {
    /// `S ≤ ε3` iff `Υ ≥` this value.
    Sinr(f64),
    /// `ε3` is at or above the SER at zero SINR, so the event always holds.
    AlwaysCovered,
}

/// Inverts [`ser_of_sinr`]: `Υ = [Q⁻¹((1 − √(1 − ε3))/(2v))]² / ς`.
pub fn sinr_for_ser(eps3: f64, qam: QamOrder) -> Result<SerThreshold> {
    if eps3.is_nan() || eps3 <= 0.0 {
        return Err(IsacError::domain("sinr_for_ser", format!("SER threshold {eps3} must be > 0")));
    }
    if eps3 >= qam.max_ser() {
        return Ok(SerThreshold::AlwaysCovered);
    }
    // Smaller root of 4v q − 4v² q² = ε3, written without cancellation.
    let q = eps3 / (2.0 * qam.v() * (1.0 + (1.0 - eps3).sqrt()));
    let x = inv_gauss_q(q)?;
    Ok(SerThreshold::Sinr(x * x / qam.varsigma()))
}

/// Communication coverage `P{S ≤ ε3}`.
pub fn comm_cov_ser(
    eps3: f64,
    qam: QamOrder,
    params: &NetworkParams,
    beam: &BeamPattern,
    opts: &EvalOptions,
) -> Result<f64> {
    match sinr_for_ser(eps3, qam)? {
        SerThreshold::AlwaysCovered => Ok(1.0),
        SerThreshold::Sinr(0.0) => Ok(1.0),
        SerThreshold::Sinr(t) => comm_cov_sinr(t, params, beam, opts),
    }
}

/// Joint coverage `P{C̲ ≤ ε1, Υ ≥ ε2}` given `L = l`, where `eps2 = None`
/// (or 0) drops the communication event.
///
/// Conditioned on `(R_1, R_l) = (r1, rl)` the summand of order `n` factors
/// into the serving-link term `e^{−ε2σ²r1^β/(P_T M1)} e^{−anμ/r1²}`, the
/// stations between `r1` and `rl` and the Poisson interference beyond `rl`.
/// The middle stations enter through a Poisson functional over the annulus,
/// or with the binomial interior as `l − 2` uniform points on the annulus
/// plus the `l`-th on its rim. Both use the `G`-point Gauss–Legendre rule on
/// `[r1, rl]`. The pair is integrated with `r1 = t rl`.
pub fn joint_cov_conditional(
    eps1: f64,
    eps2: Option<f64>,
    l: usize,
    params: &NetworkParams,
    beam: &BeamPattern,
    opts: &EvalOptions,
) -> Result<f64> {
    check_eps1(eps1)?;
    opts.validate()?;
    if l < 3 {
        return Err(IsacError::invalid("l", format!("positioning needs at least 3 stations, got {l}")));
    }
    if let Some(e) = eps2 {
        if !(e.is_finite() && e >= 0.0) {
            return Err(IsacError::invalid("eps2", format!("must be finite and >= 0, got {e}")));
        }
    }
    let rule = legendre_rule(params.g_quad(), 0.0, 1.0)?;
    let value = joint_kernel(eps1, eps2.unwrap_or(0.0), l, params, beam, opts, &rule)?;
    if opts.check_quadrature {
        let fine = legendre_rule(2 * params.g_quad(), 0.0, 1.0)?;
        let check = joint_kernel(eps1, eps2.unwrap_or(0.0), l, params, beam, opts, &fine)?;
        let gap = (check - value).abs();
        if gap > 10.0 * opts.rel_tol.max(1e-9) {
            warn!("joint kernel (l = {l}): G = {} and 2G differ by {gap:.3e}", params.g_quad());
        } else {
            debug!("joint kernel (l = {l}): G/2G gap {gap:.3e}");
        }
    }
    checked_probability("joint_cov_conditional", value)
}

fn joint_kernel(
    eps1: f64,
    eps2: f64,
    l: usize,
    params: &NetworkParams,
    beam: &BeamPattern,
    opts: &EvalOptions,
    rule: &QuadratureRule,
) -> Result<f64> {
    let lambda = params.lambda_bs();
    let beta = params.beta();
    let coef = signed_binomials(params.n_approx());
    let a = gamma_cdf_bound_rate(params.n_approx());
    let amu = a * params.positioning_mu(eps1);
    let lobes = beam.lobes();
    let gains: Vec<(f64, f64)> = lobes.iter().map(|&(c, m)| (c, eps2 * m / beam.m1())).collect();
    let snr_k = eps2 * params.sigma_n2() / (params.p_t() * beam.m1());
    let lf = (l - 1) as f64;
    let poisson_interior = opts.interior == InteriorLaw::Poisson;
    let tol = opts.tol();
    let failure: Cell<Option<IsacError>> = Cell::new(None);

    let inner = |rl: f64| -> f64 {
        let ln_pdf_rl = ln_pdf_ordered_distance(l, lambda, rl);
        if rl <= 0.0 || ln_pdf_rl < -745.0 {
            return 0.0;
        }
        let pdf_rl = ln_pdf_rl.exp();
        let f = |t: f64| -> f64 {
            if t <= 0.0 || t >= 1.0 {
                return 0.0;
            }
            let r1 = t * rl;
            let weight = 2.0 * lf * t * (1.0 - t * t).powi(l as i32 - 2);
            // Interference beyond rl, common to every order n.
            let ratio_b = t.powf(beta);
            let mut beyond = 0.0;
            for &(c, k) in &gains {
                match interference_phi(k * ratio_b, beta) {
                    Ok(v) => beyond += c * v,
                    Err(e) => {
                        failure.set(Some(e));
                        return 0.0;
                    }
                }
            }
            let common = -snr_k * r1.powf(beta) - PI * lambda * rl * rl * beyond;
            // acc[n] = 2∫_{r1}^{rl} A(ρ) e^{−anμ/ρ²} ρ dρ by Gauss–Legendre.
            let span = rl - r1;
            let mut acc = vec![0.0; coef.len()];
            let mut acc_area = 0.0;
            for (x, w) in rule.points() {
                let rho = r1 + span * x;
                let ratio = (r1 / rho).powf(beta);
                let a_rho: f64 = gains.iter().map(|&(c, k)| c / (1.0 + k * ratio)).sum();
                let base = if amu.is_finite() { (-amu / (rho * rho)).exp() } else { 0.0 };
                acc_area += 2.0 * w * span * rho;
                let mut term = 2.0 * w * span * rho * a_rho;
                for slot in acc.iter_mut() {
                    *slot += term;
                    term *= base;
                }
            }
            let full = rl * rl - r1 * r1;
            let a_rl: f64 = gains.iter().map(|&(c, k)| c / (1.0 + k * ratio_b)).sum();
            let e_rl = if amu.is_finite() { (-amu / (rl * rl)).exp() } else { 0.0 };
            let mut sum = 0.0;
            let mut e_rl_n = 1.0;
            for (n, &cn) in coef.iter().enumerate() {
                if n > 0 {
                    e_rl_n *= e_rl;
                }
                let serving = if n == 0 { 0.0 } else { -amu * n as f64 / (r1 * r1) };
                if !serving.is_finite() {
                    continue;
                }
                let middle = if poisson_interior {
                    -PI * lambda * (full - acc[n])
                } else {
                    // l − 2 stations uniform on the annulus, the l-th on its rim.
                    let mean = acc[n] / acc_area;
                    if mean <= 0.0 || a_rl * e_rl_n <= 0.0 {
                        continue;
                    }
                    (l - 2) as f64 * mean.ln() + (a_rl * e_rl_n).ln()
                };
                sum += cn * (common + serving + middle).exp();
            }
            weight * sum
        };
        pdf_rl * integrate(f, 0.0, 1.0, tol).value
    };
    let value = integrate_to_infinity_panels(inner, 0.0, ordered_scale(l, lambda), 4, tol).value;
    match failure.take() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Joint coverage of the positioning and communication events.
pub fn joint_cov(query: &CoverageQuery, params: &NetworkParams, beam: &BeamPattern, opts: &EvalOptions) -> Result<f64> {
    query.validate()?;
    if !matches!(query.metric, Metric::JointCrlbSinr | Metric::JointCrlbSer) {
        return Err(IsacError::invalid("metric", format!("{} is not a joint metric", query.metric)));
    }
    opts.validate()?;
    let part = Participation::new(params)?;
    joint_cov_with(&part, query.eps1(), query.comm_threshold()?, params, beam, opts)
}

fn joint_cov_with(
    part: &Participation,
    eps1: f64,
    eps2: Option<f64>,
    params: &NetworkParams,
    beam: &BeamPattern,
    opts: &EvalOptions,
) -> Result<f64> {
    let localizable = joint_localizable(part, eps1, eps2, params, beam, opts)?;
    let step = if eps1 >= params.n_l_cap() {
        // Unlocalizable users meet any ε1 ≥ N_L but still need the SINR event.
        let comm = match eps2 {
            Some(e) if e > 0.0 => comm_cov_sinr(e, params, beam, opts)?,
            _ => 1.0,
        };
        part.unlocalizable() * comm
    } else {
        0.0
    };
    checked_probability("joint_cov", localizable + step)
}

fn joint_localizable(
    part: &Participation,
    eps1: f64,
    eps2: Option<f64>,
    params: &NetworkParams,
    beam: &BeamPattern,
    opts: &EvalOptions,
) -> Result<f64> {
    let weights = part.weights()?;
    let terms: Vec<f64> = weights
        .par_iter()
        .map(|&(l, w)| if w == 0.0 { Ok(0.0) } else { Ok(w * joint_cov_conditional(eps1, eps2, l, params, beam, opts)?) })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// Positioning marginal built from the joint kernel with the communication
/// event dropped. This is the denominator of the positioning-conditioned
/// ratios in [`conditional_cov`].
pub fn positioning_marginal_joint(
    eps1: f64,
    params: &NetworkParams,
    beam: &BeamPattern,
    opts: &EvalOptions,
) -> Result<f64> {
    check_eps1(eps1)?;
    opts.validate()?;
    let part = Participation::new(params)?;
    joint_cov_with(&part, eps1, None, params, beam, opts)
}

/// Coverage of one function given that the other meets its threshold.
pub fn conditional_cov(
    query: &CoverageQuery,
    params: &NetworkParams,
    beam: &BeamPattern,
    opts: &EvalOptions,
) -> Result<f64> {
    query.validate()?;
    if !query.metric.is_conditional() {
        return Err(IsacError::invalid("metric", format!("{} is not a conditional metric", query.metric)));
    }
    opts.validate()?;
    let part = Participation::new(params)?;
    let eps1 = query.eps1();
    let eps2 = query.comm_threshold()?;
    let joint = joint_cov_with(&part, eps1, eps2, params, beam, opts)?;
    let condition = match query.metric {
        Metric::CondPGivenS | Metric::CondPGivenC => match eps2 {
            Some(e) => comm_cov_sinr(e, params, beam, opts)?,
            None => 1.0,
        },
        _ => joint_cov_with(&part, eps1, None, params, beam, opts)?,
    };
    ratio(joint, condition)
}

fn ratio(joint: f64, condition: f64) -> Result<f64> {
    if condition < MIN_CONDITIONING_PROBABILITY {
        return Err(IsacError::DegenerateCondition(condition));
    }
    checked_probability("conditional_cov", joint / condition)
}

/// Coverage for any metric.
pub fn coverage(query: &CoverageQuery, params: &NetworkParams, beam: &BeamPattern, opts: &EvalOptions) -> Result<f64> {
    query.validate()?;
    match query.metric {
        Metric::Positioning => positioning_cov(query.eps1(), params, opts),
        Metric::CommunicationSinr => comm_cov_sinr(query.eps2.expect("validated"), params, beam, opts),
        Metric::CommunicationSer => {
            comm_cov_ser(query.eps3.expect("validated"), query.qam.expect("validated"), params, beam, opts)
        }
        Metric::JointCrlbSinr | Metric::JointCrlbSer => joint_cov(query, params, beam, opts),
        _ => conditional_cov(query, params, beam, opts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErgodicMetric {
    /// `E[C̲]`
    Crlb,
    /// `E[log₂(1 + Υ)]`
    Rate,
    /// `E[C̲ | Υ ≥ eps2]`
    CrlbGivenSinr { eps2: f64 },
    /// `E[S | C̲ ≤ eps1]`
    SerGivenCrlb { eps1: f64, qam: QamOrder },
    /// `E[log₂(1 + Υ) | C̲ ≤ eps1]`
    RateGivenCrlb { eps1: f64 },
}

/// Ergodic CRLB in its reported reductions. "Included" keeps the
/// unlocalizable users at `N_L`; "excluded" conditions on localization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbErgodic {
    pub mean_included: f64,
    pub mean_excluded: f64,
    pub mean_sqrt_included: f64,
    pub mean_sqrt_excluded: f64,
}

impl CrlbErgodic {
    pub fn rms_included(&self) -> f64 {
        self.mean_included.sqrt()
    }
    pub fn rms_excluded(&self) -> f64 {
        self.mean_excluded.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErgodicValue {
    Crlb(CrlbErgodic),
    Mean(f64),
}

impl ErgodicValue {
    /// `E[C̲]` with unlocalizable users included, or the plain mean.
    pub fn value(&self) -> f64 {
        match self {
            ErgodicValue::Crlb(c) => c.mean_included,
            ErgodicValue::Mean(v) => *v,
        }
    }
}

const CRLB_GRID_FLOOR: f64 = 1e-6;
const SINR_GRID: (f64, f64) = (1e-8, 1e12);
const SER_GRID_FLOOR: f64 = 1e-12;

/// Ergodic values through the tail identity `E[X] = ∫ P{X > x} dx`.
pub fn ergodic(metric: ErgodicMetric, params: &NetworkParams, beam: &BeamPattern, opts: &EvalOptions) -> Result<ErgodicValue> {
    opts.validate()?;
    match metric {
        ErgodicMetric::Crlb => {
            let part = Participation::new(params)?;
            let cdf = |e: f64| positioning_localizable(&part, e, params, opts);
            crlb_tail_adaptive(cdf, params.n_l_cap(), opts).map(ErgodicValue::Crlb)
        }
        ErgodicMetric::Rate => {
            let f = |e: f64| comm_cov_sinr(e, params, beam, opts).map(|p| p / (1.0 + e));
            let head = SINR_GRID.0.ln_1p();
            let body = log_adaptive(f, SINR_GRID.0, SINR_GRID.1, opts)?;
            Ok(ErgodicValue::Mean((head + body) / LN_2))
        }
        ErgodicMetric::CrlbGivenSinr { eps2 } => {
            if !(eps2.is_finite() && eps2 > 0.0) {
                return Err(IsacError::invalid("eps2", format!("must be finite and > 0, got {eps2}")));
            }
            let part = Participation::new(params)?;
            let condition = comm_cov_sinr(eps2, params, beam, opts)?;
            if condition < MIN_CONDITIONING_PROBABILITY {
                return Err(IsacError::DegenerateCondition(condition));
            }
            let cdf = |e: f64| Ok(joint_localizable(&part, e, Some(eps2), params, beam, opts)? / condition);
            crlb_tail_grid(cdf, params.n_l_cap(), opts).map(ErgodicValue::Crlb)
        }
        ErgodicMetric::SerGivenCrlb { eps1, qam } => {
            check_eps1(eps1)?;
            let part = Participation::new(params)?;
            let condition = joint_cov_with(&part, eps1, None, params, beam, opts)?;
            if condition < MIN_CONDITIONING_PROBABILITY {
                return Err(IsacError::DegenerateCondition(condition));
            }
            let s_max = qam.max_ser();
            let tail = |s: f64| -> Result<f64> {
                let eps2 = match sinr_for_ser(s, qam)? {
                    SerThreshold::Sinr(t) => Some(t),
                    SerThreshold::AlwaysCovered => None,
                };
                let joint = joint_cov_with(&part, eps1, eps2, params, beam, opts)?;
                Ok((1.0 - joint / condition).max(0.0))
            };
            let body = log_grid(tail, SER_GRID_FLOOR, s_max, opts.ergodic_nodes_per_decade)?;
            Ok(ErgodicValue::Mean(SER_GRID_FLOOR + body))
        }
        ErgodicMetric::RateGivenCrlb { eps1 } => {
            check_eps1(eps1)?;
            let part = Participation::new(params)?;
            let condition = joint_cov_with(&part, eps1, None, params, beam, opts)?;
            if condition < MIN_CONDITIONING_PROBABILITY {
                return Err(IsacError::DegenerateCondition(condition));
            }
            let f = |e: f64| -> Result<f64> {
                let joint = joint_cov_with(&part, eps1, Some(e), params, beam, opts)?;
                Ok((joint / condition).min(1.0) / (1.0 + e))
            };
            let head = SINR_GRID.0.ln_1p();
            let body = log_grid(f, SINR_GRID.0, SINR_GRID.1, opts.ergodic_nodes_per_decade)?;
            Ok(ErgodicValue::Mean((head + body) / LN_2))
        }
    }
}

/// Adaptive `∫_lo^hi f(x) dx` in `u = ln x` with one panel per decade.
fn log_adaptive<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, opts: &EvalOptions) -> Result<f64> {
    let failure: Cell<Option<IsacError>> = Cell::new(None);
    let g = |u: f64| {
        let x = u.exp();
        match f(x) {
            Ok(v) => v * x,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let r = integrate_panels(g, &decade_breaks(lo, hi), Tolerance::rel(opts.rel_tol.max(1e-9)).with_abs(1e-12));
    match failure.take() {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// Composite Gauss–Legendre `∫_lo^hi f(x) dx` in `u = ln x`, `nodes` per
/// decade, evaluated in parallel and summed in order.
fn log_grid<F: Fn(f64) -> Result<f64> + Sync>(f: F, lo: f64, hi: f64, nodes: usize) -> Result<f64> {
    let breaks = decade_breaks(lo, hi);
    let mut points = Vec::new();
    for w in breaks.windows(2) {
        let rule = legendre_rule(nodes, w[0], w[1])?;
        points.extend(rule.points());
    }
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(u, w)| {
            let x = u.exp();
            Ok(w * x * f(x)?)
        })
        .collect::<Result<_>>()?;
    Ok(values.iter().sum())
}

fn decade_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let panels = ((b - a) / std::f64::consts::LN_10).ceil().max(1.0) as usize;
    (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect()
}

/// Tail integrals of a CRLB law from its localizable CDF on `(0, N_L]`.
fn crlb_tail_adaptive<F: Fn(f64) -> Result<f64>>(cdf: F, n_l: f64, opts: &EvalOptions) -> Result<CrlbErgodic> {
    let mass = cdf(n_l)?;
    crlb_reductions(mass, n_l, |weight| {
        log_adaptive(|e| Ok(weight(e) * (1.0 - cdf(e)?)), CRLB_GRID_FLOOR, n_l, opts)
    }, |weight| log_adaptive(|e| Ok(weight(e) * (1.0 - cdf(e)? / mass).max(0.0)), CRLB_GRID_FLOOR, n_l, opts))
}

fn crlb_tail_grid<F: Fn(f64) -> Result<f64> + Sync>(cdf: F, n_l: f64, opts: &EvalOptions) -> Result<CrlbErgodic> {
    let mass = cdf(n_l)?;
    let nodes = opts.ergodic_nodes_per_decade;
    crlb_reductions(
        mass,
        n_l,
        |weight| log_grid(|e| Ok(weight(e) * (1.0 - cdf(e)?)), CRLB_GRID_FLOOR, n_l, nodes),
        |weight| log_grid(|e| Ok(weight(e) * (1.0 - cdf(e)? / mass).max(0.0)), CRLB_GRID_FLOOR, n_l, nodes),
    )
}

fn crlb_reductions<I, X>(mass: f64, n_l: f64, included: I, excluded: X) -> Result<CrlbErgodic>
where
    I: Fn(&(dyn Fn(f64) -> f64 + Sync)) -> Result<f64>,
    X: Fn(&(dyn Fn(f64) -> f64 + Sync)) -> Result<f64>,
{
    if mass < MIN_CONDITIONING_PROBABILITY {
        return Err(IsacError::DegenerateCondition(mass));
    }
    debug!("crlb tail: localizable mass {mass:.6} below N_L = {n_l}");
    let one = |_: f64| 1.0;
    let half_inv_sqrt = |e: f64| 0.5 / e.sqrt();
    // Below the grid floor the tail probability is 1.
    let floor = CRLB_GRID_FLOOR;
    Ok(CrlbErgodic {
        mean_included: floor + included(&one)?,
        mean_excluded: floor + excluded(&one)?,
        mean_sqrt_included: floor.sqrt() + included(&half_inv_sqrt)?,
        mean_sqrt_excluded: floor.sqrt() + excluded(&half_inv_sqrt)?,
    })
}
