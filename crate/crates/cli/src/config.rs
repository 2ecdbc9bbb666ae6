//! Config file parsing and resolution into validated evaluation plans.

use std::fmt;
use std::path::{Path, PathBuf};

use isac_core::analytic::{CoverageQuery, EvalOptions, EvalPath, InteriorLaw, Metric};
use isac_core::montecarlo::{McConfig, DEFAULT_WINDOW_POINTS};
use isac_core::{BeamSpec, NetworkSpec, QamOrder, XiInterpretation};
use serde::Deserialize;

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: unreadable or malformed config, out-of-domain values.
    Usage(String),
    /// An engine failed on valid input.
    Engine(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Engine(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Engine(m) => f.write_str(m),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    network: NetworkSection,
    #[serde(default)]
    beam: BeamSection,
    sweep: Option<SweepSection>,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NetworkSection {
    lambda_bs_per_km2: f64,
    beta: f64,
    p_t_db: f64,
    n0_dbm: f64,
    sigma_n2_dbm: f64,
    xi_db: f64,
    xi_interpretation: String,
    gamma_db: f64,
    l_p: usize,
    n_l_cap_m2: f64,
    n_approx: usize,
    g_quad: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let d = NetworkSpec::default();
        NetworkSection {
            lambda_bs_per_km2: d.lambda_bs_per_km2,
            beta: d.beta,
            p_t_db: d.p_t_db,
            n0_dbm: d.n0_dbm,
            sigma_n2_dbm: d.sigma_n2_dbm,
            xi_db: d.xi_db,
            xi_interpretation: d.xi_interpretation.as_str().to_owned(),
            gamma_db: d.gamma_db,
            l_p: d.l_p,
            n_l_cap_m2: d.n_l_cap_m2,
            n_approx: d.n_approx,
            g_quad: d.g_quad,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BeamSection {
    m1_db: f64,
    m2_db: f64,
    phi_deg: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        let d = BeamSpec::default();
        BeamSection { m1_db: d.m1_db, m2_db: d.m2_db, phi_deg: d.phi_deg }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    parameter: String,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    engine: String,
    #[serde(alias = "metric")]
    metrics: OneOrMany,
    eps1_m2: f64,
    eps2: f64,
    eps3: f64,
    qam_order: u32,
    n_trials: usize,
    seed: u64,
    window_points: f64,
    eval_path: String,
    interior: String,
    rel_tol: f64,
    output: Option<PathBuf>,
    timing: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        let o = EvalOptions::default();
        RunSection {
            engine: "analytic".into(),
            metrics: OneOrMany::Many(Vec::new()),
            eps1_m2: 1.0,
            eps2: 1.0,
            eps3: 1e-3,
            qam_order: 16,
            n_trials: 10_000,
            seed: 1,
            window_points: DEFAULT_WINDOW_POINTS,
            eval_path: o.path.as_str().into(),
            interior: o.interior.as_str().into(),
            rel_tol: o.rel_tol,
            output: None,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytic,
    MonteCarlo,
    Both,
}

impl Engine {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "analytic" => Ok(Engine::Analytic),
            "montecarlo" => Ok(Engine::MonteCarlo),
            "both" => Ok(Engine::Both),
            other => Err(usage(format!("run.engine: `{other}` is not one of analytic, montecarlo, both"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::MonteCarlo => "montecarlo",
            Engine::Both => "both",
        }
    }

    pub fn analytic(self) -> bool {
        self != Engine::MonteCarlo
    }

    pub fn montecarlo(self) -> bool {
        self != Engine::Analytic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgodicKind {
    Crlb,
    Rate,
    CrlbGivenSinr,
    SerGivenCrlb,
    RateGivenCrlb,
}

/// A quantity the CLI can tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Coverage(Metric),
    Ergodic(ErgodicKind),
    /// `P{L = l}`, swept over `l`; presets only.
    Pmf,
}

const ERGODIC_NAMES: [(&str, ErgodicKind); 5] = [
    ("ergodic_crlb", ErgodicKind::Crlb),
    ("ergodic_rate", ErgodicKind::Rate),
    ("ergodic_crlb_given_sinr", ErgodicKind::CrlbGivenSinr),
    ("ergodic_ser_given_crlb", ErgodicKind::SerGivenCrlb),
    ("ergodic_rate_given_crlb", ErgodicKind::RateGivenCrlb),
];

impl MetricKind {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        if let Ok(m) = s.parse::<Metric>() {
            return Ok(MetricKind::Coverage(m));
        }
        ERGODIC_NAMES.iter().find(|(n, _)| *n == s).map(|&(_, k)| MetricKind::Ergodic(k)).ok_or_else(|| {
            let names: Vec<&str> =
                Metric::ALL.iter().map(|m| m.as_str()).chain(ERGODIC_NAMES.iter().map(|(n, _)| *n)).collect();
            usage(format!("unknown metric `{s}`; expected one of {}", names.join(", ")))
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Coverage(m) => m.as_str(),
            MetricKind::Ergodic(k) => ERGODIC_NAMES.iter().find(|(_, e)| *e == k).expect("listed").0,
            MetricKind::Pmf => "pmf_participation",
        }
    }
}

/// Thresholds shared by all metrics at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub qam: QamOrder,
}

impl Thresholds {
    pub fn query(&self, metric: Metric) -> CoverageQuery {
        let mut q = CoverageQuery::new(metric);
        if metric.needs_eps1() {
            q = q.with_eps1(self.eps1);
        }
        if metric.needs_eps2() {
            q = q.with_eps2(self.eps2);
        }
        if metric.needs_eps3() {
            q = q.with_eps3(self.eps3, self.qam);
        }
        q
    }
}

/// Everything one evaluation point needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub network: NetworkSpec,
    pub beam: BeamSpec,
    pub thresholds: Thresholds,
    /// Order for [`MetricKind::Pmf`].
    pub l: usize,
}

pub const SWEEP_PARAMETERS: [&str; 8] = ["lambda_bs", "beta", "gamma", "l_p", "p_t", "eps1", "eps2", "eps3"];

/// Sets one swept quantity. Units follow the config keys: `lambda_bs` in
/// BS/km², `gamma` and `p_t` in dB, `eps1` in m², `eps2` linear.
pub fn apply_sweep(point: &mut Point, parameter: &str, value: f64) -> Result<(), CliError> {
    let bad = |why: &str| usage(format!("sweep value {value} for `{parameter}`: {why}"));
    if value.is_nan() || (value.is_infinite() && parameter != "eps1") {
        return Err(bad("must be finite"));
    }
    let as_index = || {
        if value >= 0.0 && value.fract() == 0.0 && value <= 1e6 {
            Ok(value as usize)
        } else {
            Err(bad("must be a non-negative integer"))
        }
    };
    match parameter {
        "lambda_bs" => point.network.lambda_bs_per_km2 = value,
        "beta" => point.network.beta = value,
        "gamma" => point.network.gamma_db = value,
        "l_p" => point.network.l_p = as_index()?,
        "p_t" => point.network.p_t_db = value,
        "eps1" => point.thresholds.eps1 = value,
        "eps2" => point.thresholds.eps2 = value,
        "eps3" => point.thresholds.eps3 = value,
        "l" => point.l = as_index()?,
        other => {
            return Err(usage(format!(
                "sweep.parameter: `{other}` is not one of {}",
                SWEEP_PARAMETERS.join(", ")
            )))
        }
    }
    Ok(())
}

/// Checks a point before any computation: network and beam build, and every
/// requested metric accepts the thresholds.
pub fn check_point(point: &Point, metrics: &[MetricKind]) -> Result<(), CliError> {
    point.network.build().map_err(|e| usage(e.to_string()))?;
    point.beam.build().map_err(|e| usage(e.to_string()))?;
    for m in metrics {
        match m {
            MetricKind::Coverage(c) => point.thresholds.query(*c).validate().map_err(|e| usage(e.to_string()))?,
            MetricKind::Ergodic(ErgodicKind::CrlbGivenSinr) => {
                if !(point.thresholds.eps2.is_finite() && point.thresholds.eps2 > 0.0) {
                    return Err(usage("eps2 must be finite and > 0"));
                }
            }
            MetricKind::Ergodic(ErgodicKind::SerGivenCrlb | ErgodicKind::RateGivenCrlb) => {
                if point.thresholds.eps1.is_nan() || point.thresholds.eps1 <= 0.0 {
                    return Err(usage("eps1 must be > 0"));
                }
            }
            MetricKind::Ergodic(_) => {}
            MetricKind::Pmf => {
                if point.l == 0 {
                    return Err(usage("pmf order l must be >= 1"));
                }
            }
        }
    }
    Ok(())
}

/// A fully resolved `run` or `validate` plan.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub base: Point,
    pub sweep: Option<(String, Vec<f64>)>,
    pub metrics: Vec<MetricKind>,
    pub engine: Engine,
    pub mc: McConfig,
    pub opts: EvalOptions,
    pub output: Option<PathBuf>,
    pub timing: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| usage(format!("config: {}", e.message())))?;
        let n = file.network;
        let xi_interpretation: XiInterpretation = n.xi_interpretation.parse().map_err(|e| usage(format!("{e}")))?;
        let network = NetworkSpec {
            lambda_bs_per_km2: n.lambda_bs_per_km2,
            beta: n.beta,
            p_t_db: n.p_t_db,
            n0_dbm: n.n0_dbm,
            sigma_n2_dbm: n.sigma_n2_dbm,
            xi_db: n.xi_db,
            xi_interpretation,
            gamma_db: n.gamma_db,
            l_p: n.l_p,
            n_l_cap_m2: n.n_l_cap_m2,
            n_approx: n.n_approx,
            g_quad: n.g_quad,
        };
        let b = file.beam;
        let beam = BeamSpec { m1_db: b.m1_db, m2_db: b.m2_db, phi_deg: b.phi_deg };
        let r = file.run;
        let qam = QamOrder::new(r.qam_order).map_err(|e| usage(e.to_string()))?;
        let base = Point { network, beam, thresholds: Thresholds { eps1: r.eps1_m2, eps2: r.eps2, eps3: r.eps3, qam }, l: 1 };

        let names = match r.metrics {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        };
        if names.is_empty() {
            return Err(usage("run.metrics must name at least one metric"));
        }
        let metrics = names.iter().map(|s| MetricKind::parse(s)).collect::<Result<Vec<_>, _>>()?;

        let opts = EvalOptions {
            path: r.eval_path.parse::<EvalPath>().map_err(|e| usage(e.to_string()))?,
            interior: r.interior.parse::<InteriorLaw>().map_err(|e| usage(e.to_string()))?,
            rel_tol: r.rel_tol,
            ..EvalOptions::default()
        };
        opts.validate().map_err(|e| usage(e.to_string()))?;
        let mc = McConfig { n_trials: r.n_trials, seed: r.seed, window_points: r.window_points };
        mc.validate().map_err(|e| usage(e.to_string()))?;

        let sweep = match file.sweep {
            None => None,
            Some(s) if s.values.is_empty() => {
                if !SWEEP_PARAMETERS.contains(&s.parameter.as_str()) {
                    return Err(usage(format!("sweep.parameter: `{}` is not supported", s.parameter)));
                }
                None
            }
            Some(s) => {
                if !SWEEP_PARAMETERS.contains(&s.parameter.as_str()) {
                    return Err(usage(format!(
                        "sweep.parameter: `{}` is not one of {}",
                        s.parameter,
                        SWEEP_PARAMETERS.join(", ")
                    )));
                }
                Some((s.parameter, s.values))
            }
        };
        let cfg = RunConfig {
            base,
            sweep,
            metrics,
            engine: Engine::parse(&r.engine)?,
            mc,
            opts,
            output: r.output,
            timing: r.timing,
        };
        for p in cfg.points()? {
            check_point(&p.1, &cfg.metrics)?;
        }
        Ok(cfg)
    }

    /// Sweep points as `(sweep value, point)`; a single unswept point when no
    /// sweep is configured.
    pub fn points(&self) -> Result<Vec<(Option<f64>, Point)>, CliError> {
        match &self.sweep {
            None => Ok(vec![(None, self.base.clone())]),
            Some((param, values)) => values
                .iter()
                .map(|&v| {
                    let mut p = self.base.clone();
                    apply_sweep(&mut p, param, v)?;
                    Ok((Some(v), p))
                })
                .collect(),
        }
    }

    /// `# key = value` lines describing the resolved configuration.
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = point_header(&self.base);
        let r = |k: &str, v: String| format!("run.{k} = {v}");
        lines.push(r("engine", self.engine.as_str().into()));
        lines.push(r("metrics", self.metrics.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(",")));
        lines.push(r("eval_path", self.opts.path.as_str().into()));
        lines.push(r("interior", self.opts.interior.as_str().into()));
        lines.push(r("rel_tol", self.opts.rel_tol.to_string()));
        lines.push(r("n_trials", self.mc.n_trials.to_string()));
        lines.push(r("seed", self.mc.seed.to_string()));
        lines.push(r("window_points", self.mc.window_points.to_string()));
        match &self.sweep {
            None => lines.push("sweep = none".into()),
            Some((p, v)) => {
                lines.push(format!("sweep.parameter = {p}"));
                lines.push(format!(
                    "sweep.values = {}",
                    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                ));
            }
        }
        lines
    }
}

/// Resolved network, beam and threshold values in internal units.
pub fn point_header(p: &Point) -> Vec<String> {
    let mut lines = Vec::new();
    if let Ok(n) = p.network.build() {
        lines.push(format!("network.lambda_bs_per_m2 = {}", n.lambda_bs()));
        lines.push(format!("network.beta = {}", n.beta()));
        lines.push(format!("network.p_t_w = {}", n.p_t()));
        lines.push(format!("network.n0_w = {}", n.n0()));
        lines.push(format!("network.sigma_n2_w = {}", n.sigma_n2()));
        lines.push(format!("network.xi = {} ({})", n.xi(), p.network.xi_interpretation));
        lines.push(format!("network.gamma = {}", n.gamma()));
        lines.push(format!("network.l_p = {}", n.l_p()));
        lines.push(format!("network.n_l_cap_m2 = {}", n.n_l_cap()));
        lines.push(format!("network.n_approx = {}", n.n_approx()));
        lines.push(format!("network.g_quad = {}", n.g_quad()));
    }
    if let Ok(b) = p.beam.build() {
        lines.push(format!("beam.m1 = {}", b.m1()));
        lines.push(format!("beam.m2 = {}", b.m2()));
        lines.push(format!("beam.phi_rad = {}", b.phi()));
    }
    let t = &p.thresholds;
    lines.push(format!("thresholds.eps1_m2 = {}", t.eps1));
    lines.push(format!("thresholds.eps2 = {}", t.eps2));
    lines.push(format!("thresholds.eps3 = {}", t.eps3));
    lines.push(format!("thresholds.qam_order = {}", t.qam.k()));
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = RunConfig::parse("[run]\nmetric = \"communication_sinr\"\n").unwrap();
        assert_eq!(cfg.metrics, vec![MetricKind::Coverage(Metric::CommunicationSinr)]);
        assert_eq!(cfg.engine, Engine::Analytic);
        assert_eq!(cfg.points().unwrap().len(), 1);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::parse("[network]\nlamda_bs = 3.0\n[run]\nmetric = \"positioning\"\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("lamda_bs"), "{err}");
        let err = RunConfig::parse("[runn]\n").unwrap_err();
        assert!(err.to_string().contains("runn"));
    }

    #[test]
    fn domain_errors_are_usage_errors() {
        let err = RunConfig::parse("[network]\nbeta = 1.5\n[run]\nmetric = \"positioning\"\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = RunConfig::parse(
            "[run]\nmetric = \"positioning\"\n[sweep]\nparameter = \"beta\"\nvalues = [3.0, 1.9]\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
        let err =
            RunConfig::parse("[run]\nmetric = \"positioning\"\n[sweep]\nparameter = \"xi\"\nvalues = [1.0]\n").unwrap_err();
        assert!(err.to_string().contains("xi"));
        assert!(RunConfig::parse("[run]\nmetric = \"nope\"\n").is_err());
        assert!(RunConfig::parse("[run]\nmetric = \"positioning\"\nengine = \"fast\"\n").is_err());
    }

    #[test]
    fn sweep_units() {
        let mut p = RunConfig::parse("[run]\nmetric = \"positioning\"\n").unwrap().base;
        apply_sweep(&mut p, "lambda_bs", 10.0).unwrap();
        apply_sweep(&mut p, "gamma", -10.0).unwrap();
        apply_sweep(&mut p, "l_p", 6.0).unwrap();
        let n = p.network.build().unwrap();
        assert!((n.lambda_bs() - 1e-5).abs() < 1e-20);
        assert!((n.gamma() - 0.1).abs() < 1e-15);
        assert_eq!(n.l_p(), 6);
        assert!(apply_sweep(&mut p, "l_p", 6.5).is_err());
        apply_sweep(&mut p, "eps1", f64::INFINITY).unwrap();
        assert!(apply_sweep(&mut p, "eps2", f64::INFINITY).is_err());
    }

    #[test]
    fn empty_sweep_is_one_point() {
        let cfg = RunConfig::parse("[run]\nmetric = \"positioning\"\n[sweep]\nparameter = \"eps1\"\nvalues = []\n").unwrap();
        assert_eq!(cfg.points().unwrap().len(), 1);
    }
}
