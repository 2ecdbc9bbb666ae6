//! Named sweeps that regenerate the reference figures as CSV tables.

use isac_core::analytic::Metric;
use isac_core::{BeamSpec, NetworkSpec, QamOrder};

use crate::config::{apply_sweep, usage, CliError, ErgodicKind, MetricKind, Point, Thresholds};

pub const PRESETS: [&str; 7] = [
    "positioning-coverage",
    "pmf-L",
    "comm-coverage",
    "joint-coverage",
    "conditional-coverage",
    "ergodic-crlb",
    "ergodic-ser",
];

pub struct Series {
    pub label: String,
    pub base: Point,
    pub parameter: &'static str,
    pub values: Vec<f64>,
    pub metrics: Vec<MetricKind>,
}

impl Series {
    pub fn points(&self) -> Result<Vec<(f64, Point)>, CliError> {
        self.values
            .iter()
            .map(|&v| {
                let mut p = self.base.clone();
                apply_sweep(&mut p, self.parameter, v)?;
                Ok((v, p))
            })
            .collect()
    }
}

fn base() -> Point {
    Point {
        network: NetworkSpec::default(),
        beam: BeamSpec::default(),
        thresholds: Thresholds { eps1: 1.0, eps2: 1.0, eps3: 1e-3, qam: QamOrder::new(16).expect("valid order") },
        l: 1,
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

const LAMBDAS: [f64; 6] = [1.0, 2.0, 4.0, 6.0, 8.0, 10.0];

fn series(label: String, base: Point, parameter: &'static str, values: Vec<f64>, metrics: Vec<MetricKind>) -> Series {
    Series { label, base, parameter, values, metrics }
}

pub fn preset(name: &str) -> Result<Vec<Series>, CliError> {
    let cov = |m| vec![MetricKind::Coverage(m)];
    let out = match name {
        "positioning-coverage" => {
            let mut out = Vec::new();
            for gamma_db in [-10.0, -15.0] {
                let mut p = base();
                p.network.gamma_db = gamma_db;
                p.network.l_p = 20;
                out.push(series(
                    format!("gamma_db={gamma_db},l_p=20"),
                    p,
                    "eps1",
                    log_space(0.1, 100.0, 13),
                    cov(Metric::Positioning),
                ));
            }
            for lambda in [1.0, 10.0] {
                let mut p = base();
                p.network.lambda_bs_per_km2 = lambda;
                out.push(series(format!("lambda_bs={lambda}"), p, "eps1", log_space(0.1, 100.0, 13), cov(Metric::Positioning)));
            }
            out
        }
        "pmf-L" => [(3.6, -15.0), (4.6, -15.0), (3.6, -10.0)]
            .into_iter()
            .map(|(beta, gamma_db)| {
                let mut p = base();
                p.network.beta = beta;
                p.network.gamma_db = gamma_db;
                p.network.l_p = 40;
                series(
                    format!("beta={beta},gamma_db={gamma_db}"),
                    p,
                    "l",
                    (1..=30).map(f64::from).collect(),
                    vec![MetricKind::Pmf],
                )
            })
            .collect(),
        "comm-coverage" => {
            let eps2: Vec<f64> = (-2..=6).map(|k| 10f64.powf(k as f64 * 5.0 / 10.0)).collect();
            let mut out: Vec<Series> = [1.0, 8.0 / 3f64.sqrt(), 10.0]
                .into_iter()
                .map(|lambda| {
                    let mut p = base();
                    p.network.lambda_bs_per_km2 = lambda;
                    series(format!("lambda_bs={lambda}"), p, "eps2", eps2.clone(), cov(Metric::CommunicationSinr))
                })
                .collect();
            let mut p = base();
            p.beam.phi_deg = 10.0;
            out.push(series("phi_deg=10".into(), p, "eps2", eps2, cov(Metric::CommunicationSinr)));
            out
        }
        "joint-coverage" => vec![series(
            "eps1=1,eps3=1e-3,qam=16".into(),
            base(),
            "lambda_bs",
            LAMBDAS.to_vec(),
            cov(Metric::JointCrlbSer),
        )],
        "conditional-coverage" => vec![series(
            "eps1=1,eps3=1e-3,qam=16".into(),
            base(),
            "lambda_bs",
            LAMBDAS.to_vec(),
            vec![MetricKind::Coverage(Metric::CondSGivenP), MetricKind::Coverage(Metric::CondPGivenS)],
        )],
        "ergodic-crlb" => [(3.6, -15.0), (3.6, -10.0), (4.6, -15.0)]
            .into_iter()
            .map(|(beta, gamma_db)| {
                let mut p = base();
                p.network.beta = beta;
                p.network.gamma_db = gamma_db;
                series(
                    format!("beta={beta},gamma_db={gamma_db}"),
                    p,
                    "lambda_bs",
                    LAMBDAS.to_vec(),
                    vec![MetricKind::Ergodic(ErgodicKind::Crlb)],
                )
            })
            .collect(),
        "ergodic-ser" => {
            let mut p = base();
            p.thresholds.eps1 = 0.5;
            vec![series(
                "eps1=0.5,qam=16".into(),
                p,
                "lambda_bs",
                vec![1.0, 4.0, 10.0],
                vec![MetricKind::Ergodic(ErgodicKind::SerGivenCrlb)],
            )]
        }
        other => return Err(usage(format!("unknown preset `{other}`; expected one of {}", PRESETS.join(", ")))),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::check_point;

    #[test]
    fn every_preset_resolves() {
        for name in PRESETS {
            for s in preset(name).unwrap() {
                for (_, p) in s.points().unwrap() {
                    check_point(&p, &s.metrics).unwrap();
                }
            }
        }
        assert!(preset("fig7").is_err());
    }
}
