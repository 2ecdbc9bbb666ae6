//! Physical parameters of the network model.
//!
//! Everything is stored in SI / linear units: meters, watts, linear gains and
//! densities per square meter. The boundary types ([`NetworkSpec`],
//! [`BeamSpec`]) carry the human-facing units (per km², dB, dBm, degrees) and
//! are converted exactly once by their `build` methods.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{IsacError, Result};

/// Largest supported `l_p`; participation sets are tracked in a `u64` mask.
pub const MAX_L_P: usize = 64;

/// Largest supported order of the gamma-CDF surrogate. The alternating
/// binomial sums lose roughly `log10(C(N, N/2))` digits.
pub const MAX_N_APPROX: usize = 20;

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm (referenced to 1 mW) to watts.
pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    db_to_linear(x_dbm - 30.0)
}

pub fn watts_to_dbm(x: f64) -> f64 {
    linear_to_db(x) + 30.0
}

/// How the configured shadowing setting `xi_db` becomes the standard deviation
/// of the dB-domain RSS term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XiInterpretation {
    /// `10^(xi_db / 10)`
    #[default]
    PowerDb,
    /// `10^(xi_db / 20)`
    AmplitudeDb,
    /// `|xi_db|` taken literally
    Raw,
}

impl XiInterpretation {
    pub const ALL: [XiInterpretation; 3] =
        [XiInterpretation::PowerDb, XiInterpretation::AmplitudeDb, XiInterpretation::Raw];

    pub fn to_std_dev(self, xi_db: f64) -> f64 {
        match self {
            XiInterpretation::PowerDb => db_to_linear(xi_db),
            XiInterpretation::AmplitudeDb => 10f64.powf(xi_db / 20.0),
            XiInterpretation::Raw => xi_db.abs(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            XiInterpretation::PowerDb => "power_db",
            XiInterpretation::AmplitudeDb => "amplitude_db",
            XiInterpretation::Raw => "raw",
        }
    }
}

impl fmt::Display for XiInterpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for XiInterpretation {
    type Err = IsacError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power_db" => Ok(XiInterpretation::PowerDb),
            "amplitude_db" => Ok(XiInterpretation::AmplitudeDb),
            "raw" => Ok(XiInterpretation::Raw),
            other => Err(IsacError::invalid(
                "xi_interpretation",
                format!("`{other}` is not one of power_db, amplitude_db, raw"),
            )),
        }
    }
}

/// Network settings in boundary units. Defaults are the evaluation setup of
/// the reference deployment (8/√3 BS per km², β = 3.6, 0 dB transmit power,
/// −89 dBm noise, ξ = −9 dB, N = 5).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub lambda_bs_per_km2: f64,
    pub beta: f64,
    pub p_t_db: f64,
    pub n0_dbm: f64,
    pub sigma_n2_dbm: f64,
    pub xi_db: f64,
    pub xi_interpretation: XiInterpretation,
    pub gamma_db: f64,
    pub l_p: usize,
    pub n_l_cap_m2: f64,
    pub n_approx: usize,
    pub g_quad: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            lambda_bs_per_km2: 8.0 / 3f64.sqrt(),
            beta: 3.6,
            p_t_db: 0.0,
            n0_dbm: -89.0,
            sigma_n2_dbm: -89.0,
            xi_db: -9.0,
            xi_interpretation: XiInterpretation::PowerDb,
            gamma_db: -15.0,
            l_p: 10,
            n_l_cap_m2: 1e4,
            n_approx: 5,
            g_quad: 32,
        }
    }
}

impl NetworkSpec {
    pub fn build(&self) -> Result<NetworkParams> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(IsacError::invalid(name, format!("{v} is not finite")))
            }
        };
        let lambda_km2 = finite("lambda_bs_per_km2", self.lambda_bs_per_km2)?;
        finite("beta", self.beta)?;
        finite("p_t_db", self.p_t_db)?;
        finite("n0_dbm", self.n0_dbm)?;
        finite("sigma_n2_dbm", self.sigma_n2_dbm)?;
        finite("xi_db", self.xi_db)?;
        finite("gamma_db", self.gamma_db)?;
        finite("n_l_cap_m2", self.n_l_cap_m2)?;

        NetworkParams::new(NetworkParams {
            lambda_bs: lambda_km2 * 1e-6,
            beta: self.beta,
            p_t: db_to_linear(self.p_t_db),
            n0: dbm_to_watts(self.n0_dbm),
            sigma_n2: dbm_to_watts(self.sigma_n2_dbm),
            xi: self.xi_interpretation.to_std_dev(self.xi_db),
            gamma: db_to_linear(self.gamma_db),
            l_p: self.l_p,
            n_l_cap: self.n_l_cap_m2,
            n_approx: self.n_approx,
            g_quad: self.g_quad,
        })
    }
}

/// Validated network constants in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    lambda_bs: f64,
    beta: f64,
    p_t: f64,
    n0: f64,
    sigma_n2: f64,
    xi: f64,
    gamma: f64,
    l_p: usize,
    n_l_cap: f64,
    n_approx: usize,
    g_quad: usize,
}

impl NetworkParams {
    fn new(p: NetworkParams) -> Result<Self> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(IsacError::invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("lambda_bs", p.lambda_bs)?;
        positive("p_t", p.p_t)?;
        positive("n0", p.n0)?;
        positive("sigma_n2", p.sigma_n2)?;
        positive("xi", p.xi)?;
        positive("gamma", p.gamma)?;
        positive("n_l_cap", p.n_l_cap)?;
        if !(p.beta.is_finite() && p.beta > 2.0) {
            return Err(IsacError::invalid("beta", format!("path-loss exponent must exceed 2, got {}", p.beta)));
        }
        if !(3..=MAX_L_P).contains(&p.l_p) {
            return Err(IsacError::invalid("l_p", format!("must be in 3..={MAX_L_P}, got {}", p.l_p)));
        }
        if !(5..=MAX_N_APPROX).contains(&p.n_approx) {
            return Err(IsacError::invalid(
                "n_approx",
                format!("must be in 5..={MAX_N_APPROX}, got {}", p.n_approx),
            ));
        }
        if p.g_quad < 2 {
            return Err(IsacError::invalid("g_quad", format!("must be >= 2, got {}", p.g_quad)));
        }
        Ok(p)
    }

    /// BS density per m².
    pub fn lambda_bs(&self) -> f64 {
        self.lambda_bs
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    /// Transmit power, W.
    pub fn p_t(&self) -> f64 {
        self.p_t
    }
    /// Positioning-stage noise power, W.
    pub fn n0(&self) -> f64 {
        self.n0
    }
    /// Communication noise power, W.
    pub fn sigma_n2(&self) -> f64 {
        self.sigma_n2
    }
    /// Standard deviation of the dB-domain shadowing term.
    pub fn xi(&self) -> f64 {
        self.xi
    }
    /// Localizability SINR threshold, linear.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn l_p(&self) -> usize {
        self.l_p
    }
    /// CRLB value assigned to unlocalizable snapshots, m².
    pub fn n_l_cap(&self) -> f64 {
        self.n_l_cap
    }
    pub fn n_approx(&self) -> usize {
        self.n_approx
    }
    pub fn g_quad(&self) -> usize {
        self.g_quad
    }

    /// `(ln 10 / (10 β))² ξ²`, the common prefactor of both CRLB expressions.
    pub fn crlb_scale(&self) -> f64 {
        let k = std::f64::consts::LN_10 / (10.0 * self.beta);
        k * k * self.xi * self.xi
    }

    /// μ of the conditional positioning coverage: CRLB bound ≤ ε1 iff
    /// `μ ∑ r_l⁻² ≥ 1`.
    pub fn positioning_mu(&self, eps1: f64) -> f64 {
        eps1 / (4.0 * self.crlb_scale())
    }

    pub fn with_lambda_bs(&self, lambda_bs: f64) -> Result<Self> {
        NetworkParams::new(NetworkParams { lambda_bs, ..self.clone() })
    }
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        NetworkParams::new(NetworkParams { beta, ..self.clone() })
    }
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        NetworkParams::new(NetworkParams { gamma, ..self.clone() })
    }
    pub fn with_l_p(&self, l_p: usize) -> Result<Self> {
        NetworkParams::new(NetworkParams { l_p, ..self.clone() })
    }
    pub fn with_p_t(&self, p_t: f64) -> Result<Self> {
        NetworkParams::new(NetworkParams { p_t, ..self.clone() })
    }
    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        NetworkParams::new(NetworkParams { xi, ..self.clone() })
    }
    pub fn with_n_approx(&self, n_approx: usize) -> Result<Self> {
        NetworkParams::new(NetworkParams { n_approx, ..self.clone() })
    }
    pub fn with_g_quad(&self, g_quad: usize) -> Result<Self> {
        NetworkParams::new(NetworkParams { g_quad, ..self.clone() })
    }
    pub fn with_n_l_cap(&self, n_l_cap: f64) -> Result<Self> {
        NetworkParams::new(NetworkParams { n_l_cap, ..self.clone() })
    }
}

/// Sectored antenna pattern in boundary units.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSpec {
    pub m1_db: f64,
    pub m2_db: f64,
    pub phi_deg: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        BeamSpec { m1_db: 0.0, m2_db: -20.0, phi_deg: 30.0 }
    }
}

impl BeamSpec {
    pub fn build(&self) -> Result<BeamPattern> {
        BeamPattern::new(db_to_linear(self.m1_db), db_to_linear(self.m2_db), self.phi_deg.to_radians())
    }
}

/// Two-level beam: main-lobe gain `m1` over width `phi`, side-lobe gain `m2`
/// elsewhere. A random interferer points its main lobe at the user with
/// probability `c1 = phi / 2π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamPattern {
    m1: f64,
    m2: f64,
    phi: f64,
}

impl BeamPattern {
    pub fn new(m1: f64, m2: f64, phi: f64) -> Result<Self> {
        if !(m2.is_finite() && m2 > 0.0) {
            return Err(IsacError::invalid("m2", format!("must be > 0, got {m2}")));
        }
        if !(m1.is_finite() && m1 >= m2) {
            return Err(IsacError::invalid("m1", format!("main-lobe gain {m1} must be >= side-lobe gain {m2}")));
        }
        if !(phi.is_finite() && phi > 0.0 && phi < 2.0 * PI) {
            return Err(IsacError::invalid("phi", format!("main-lobe width must be in (0, 2π), got {phi}")));
        }
        Ok(BeamPattern { m1, m2, phi })
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }
    pub fn m2(&self) -> f64 {
        self.m2
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn c1(&self) -> f64 {
        self.phi / (2.0 * PI)
    }
    pub fn c2(&self) -> f64 {
        1.0 - self.c1()
    }

    /// `[(c1, M1), (c2, M2)]`
    pub fn lobes(&self) -> [(f64, f64); 2] {
        [(self.c1(), self.m1), (self.c2(), self.m2)]
    }

    /// Mean interferer gain `c1 M1 + c2 M2`.
    pub fn mean_gain(&self) -> f64 {
        self.c1() * self.m1 + self.c2() * self.m2
    }
}

/// Square K-QAM constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QamOrder {
    k: u32,
}

impl QamOrder {
    pub fn new(k: u32) -> Result<Self> {
        let root = (k as f64).sqrt().round() as u32;
        if k < 4 || root * root != k {
            return Err(IsacError::invalid("qam_k", format!("constellation size must be a perfect square >= 4, got {k}")));
        }
        Ok(QamOrder { k })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// `v = (√K − 1) / √K`
    pub fn v(&self) -> f64 {
        let s = (self.k as f64).sqrt();
        (s - 1.0) / s
    }

    /// `ς = 3 / (K − 1)`
    pub fn varsigma(&self) -> f64 {
        3.0 / (self.k as f64 - 1.0)
    }

    /// SER at zero SINR, `2v − v²`.
    pub fn max_ser(&self) -> f64 {
        let v = self.v();
        2.0 * v - v * v
    }
}

/// The reference evaluation setup.
pub fn from_paper_defaults() -> (NetworkParams, BeamPattern) {
    let params = NetworkSpec::default().build().expect("default network settings are valid");
    let beam = BeamSpec::default().build().expect("default beam settings are valid");
    (params, beam)
}
