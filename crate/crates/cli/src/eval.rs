//! Evaluates metrics at a point with either engine and formats result rows.

use std::io::Write;
use std::time::Instant;

use isac_core::analytic::{self, ErgodicMetric, ErgodicValue, EvalOptions};
use isac_core::montecarlo::{self, ErgodicEstimate, EstimateWithCI, McConfig, SnapshotMetrics};
use isac_core::{BeamPattern, IsacError, NetworkParams};

use crate::config::{CliError, ErgodicKind, MetricKind, Point};

/// One CSV data row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub series: Option<String>,
    pub sweep_param: Option<String>,
    pub sweep_value: Option<f64>,
    pub metric: String,
    pub engine: &'static str,
    pub value: f64,
    pub ci_half_width: Option<f64>,
    pub n_samples: Option<usize>,
    pub wall_time_s: Option<f64>,
}

/// A metric value before it is attached to a sweep position.
#[derive(Debug, Clone, PartialEq)]
pub struct Value {
    pub metric: String,
    pub value: f64,
    pub ci: Option<EstimateWithCI>,
}

fn engine_error(metric: MetricKind, e: IsacError) -> CliError {
    CliError::Engine(format!("{}: {e}", metric.as_str()))
}

fn build(point: &Point) -> Result<(NetworkParams, BeamPattern), CliError> {
    let p = point.network.build().map_err(|e| crate::config::usage(e.to_string()))?;
    let b = point.beam.build().map_err(|e| crate::config::usage(e.to_string()))?;
    Ok((p, b))
}

fn ergodic_metric(kind: ErgodicKind, point: &Point) -> ErgodicMetric {
    let t = &point.thresholds;
    match kind {
        ErgodicKind::Crlb => ErgodicMetric::Crlb,
        ErgodicKind::Rate => ErgodicMetric::Rate,
        ErgodicKind::CrlbGivenSinr => ErgodicMetric::CrlbGivenSinr { eps2: t.eps2 },
        ErgodicKind::SerGivenCrlb => ErgodicMetric::SerGivenCrlb { eps1: t.eps1, qam: t.qam },
        ErgodicKind::RateGivenCrlb => ErgodicMetric::RateGivenCrlb { eps1: t.eps1 },
    }
}

fn crlb_names(base: &str) -> [String; 4] {
    ["mean_included", "mean_excluded", "mean_sqrt_included", "mean_sqrt_excluded"].map(|s| format!("{base}.{s}"))
}

pub fn analytic_values(point: &Point, metric: MetricKind, opts: &EvalOptions) -> Result<Vec<Value>, CliError> {
    let (p, b) = build(point)?;
    let plain = |v: f64| vec![Value { metric: metric.as_str().into(), value: v, ci: None }];
    let err = |e| engine_error(metric, e);
    match metric {
        MetricKind::Coverage(m) => analytic::coverage(&point.thresholds.query(m), &p, &b, opts).map(plain).map_err(err),
        MetricKind::Pmf => analytic::pmf_participation(point.l, p.gamma(), &p).map(plain).map_err(err),
        MetricKind::Ergodic(k) => match analytic::ergodic(ergodic_metric(k, point), &p, &b, opts).map_err(err)? {
            ErgodicValue::Crlb(c) => Ok(crlb_names(metric.as_str())
                .into_iter()
                .zip([c.mean_included, c.mean_excluded, c.mean_sqrt_included, c.mean_sqrt_excluded])
                .map(|(metric, value)| Value { metric, value, ci: None })
                .collect()),
            ErgodicValue::Mean(v) => Ok(plain(v)),
        },
    }
}

pub fn simulate(point: &Point, mc: &McConfig) -> Result<Vec<SnapshotMetrics>, CliError> {
    let (p, b) = build(point)?;
    montecarlo::simulate_batch(&p, &b, point.thresholds.qam, mc).map_err(|e| CliError::Engine(e.to_string()))
}

pub fn montecarlo_values(point: &Point, metric: MetricKind, snaps: &[SnapshotMetrics]) -> Result<Vec<Value>, CliError> {
    let with_ci = |e: EstimateWithCI| vec![Value { metric: metric.as_str().into(), value: e.value, ci: Some(e) }];
    let err = |e| engine_error(metric, e);
    match metric {
        MetricKind::Coverage(m) => montecarlo::estimate_from(snaps, &point.thresholds.query(m)).map(with_ci).map_err(err),
        MetricKind::Pmf => {
            let l = point.l;
            let hits = snaps.iter().filter(|s| s.l_participating == l).count();
            let n = snaps.len();
            let v = hits as f64 / n as f64;
            // Counts at the cap include every larger order, so only l < L_P is an estimate of P{L = l}.
            let l_p = point.network.l_p;
            if l >= l_p {
                return Err(CliError::Engine(format!("pmf at l = {l} needs l_p > {l}, got {l_p}")));
            }
            let hw = 1.959_963_984_540_054 * (v * (1.0 - v) / n as f64).sqrt();
            Ok(with_ci(EstimateWithCI { value: v, half_width: hw, n_samples: n }))
        }
        MetricKind::Ergodic(k) => match montecarlo::ergodic_from(snaps, ergodic_metric(k, point)).map_err(err)? {
            ErgodicEstimate::Crlb(c) => Ok(crlb_names(metric.as_str())
                .into_iter()
                .zip([c.mean_included, c.mean_excluded, c.mean_sqrt_included, c.mean_sqrt_excluded])
                .map(|(metric, e)| Value { metric, value: e.value, ci: Some(e) })
                .collect()),
            ErgodicEstimate::Mean(e) => Ok(with_ci(e)),
        },
    }
}

/// Settings shared by every point of a table.
pub struct Plan<'a> {
    pub metrics: &'a [MetricKind],
    pub analytic: bool,
    pub montecarlo: bool,
    pub opts: &'a EvalOptions,
    pub mc: &'a McConfig,
    pub timing: bool,
}

/// Rows for one point: analytic values first, then Monte Carlo values, each
/// in metric order.
pub fn evaluate_point(
    plan: &Plan<'_>,
    point: &Point,
    series: Option<&str>,
    sweep: Option<(&str, f64)>,
) -> Result<Vec<Row>, CliError> {
    let mut rows = Vec::new();
    let row = |engine: &'static str, v: Value, wall: Option<f64>| Row {
        series: series.map(str::to_owned),
        sweep_param: sweep.map(|s| s.0.to_owned()),
        sweep_value: sweep.map(|s| s.1),
        metric: v.metric,
        engine,
        value: v.value,
        ci_half_width: v.ci.map(|c| c.half_width),
        n_samples: v.ci.map(|c| c.n_samples),
        wall_time_s: wall,
    };
    if plan.analytic {
        for &m in plan.metrics {
            let start = Instant::now();
            let values = analytic_values(point, m, plan.opts)?;
            let wall = plan.timing.then(|| start.elapsed().as_secs_f64());
            rows.extend(values.into_iter().map(|v| row("analytic", v, wall)));
        }
    }
    if plan.montecarlo {
        let start = Instant::now();
        let snaps = simulate(point, plan.mc)?;
        let shared = start.elapsed().as_secs_f64();
        for &m in plan.metrics {
            let start = Instant::now();
            let values = montecarlo_values(point, m, &snaps)?;
            let wall = plan.timing.then(|| shared + start.elapsed().as_secs_f64());
            rows.extend(values.into_iter().map(|v| row("montecarlo", v, wall)));
        }
    }
    Ok(rows)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `#` header lines followed by the CSV table.
pub fn write_csv<W: Write>(out: W, header: &[String], rows: &[Row], with_series: bool) -> std::io::Result<()> {
    let mut out = out;
    for line in header {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut columns = vec!["sweep_param", "sweep_value", "metric", "engine", "value", "ci_half_width", "n_samples", "wall_time_s"];
    if with_series {
        columns.insert(0, "series");
    }
    w.write_record(&columns)?;
    for r in rows {
        let mut rec = vec![
            r.sweep_param.clone().unwrap_or_default(),
            opt(r.sweep_value),
            r.metric.clone(),
            r.engine.to_owned(),
            r.value.to_string(),
            opt(r.ci_half_width),
            opt(r.n_samples),
            opt(r.wall_time_s),
        ];
        if with_series {
            rec.insert(0, r.series.clone().unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()
}
