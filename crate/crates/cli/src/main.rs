//! `isac`: analytic and Monte Carlo coverage analysis from the command line.

mod config;
mod eval;
mod presets;
mod selftest;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac_core::analytic::EvalOptions;
use isac_core::montecarlo::McConfig;

use config::{usage, CliError, Engine, MetricKind, RunConfig};
use eval::{evaluate_point, write_csv, Plan, Row};

#[derive(Parser)]
#[command(name = "isac", version, about = "Coverage, error-rate and ergodic analysis of ISAC cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured metrics over the configured sweep and write CSV.
    Run {
        config: PathBuf,
        /// Output file; overrides `run.output`. Standard output when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run both engines on the configured grid and compare them.
    Validate {
        config: PathBuf,
        /// Also write the compared rows as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate a named reference figure as CSV.
    Reproduce {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(presets::PRESETS))]
        preset: String,
        /// Output directory; the file is named after the preset.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "analytic", value_parser = ["analytic", "montecarlo", "both"])]
        engine: String,
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Fill the wall_time_s column.
        #[arg(long)]
        timing: bool,
    },
    /// Check the special functions against quadrature of their definitions.
    SpecfunSelftest,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ISAC_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("ISAC_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Engine(format!("thread pool: {e}")))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            let f = File::create(p).map_err(|e| usage(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn io_error(e: io::Error) -> CliError {
    CliError::Engine(format!("writing output: {e}"))
}

fn table(cfg: &RunConfig, engine: Engine) -> Result<Vec<Row>, CliError> {
    let plan = Plan {
        metrics: &cfg.metrics,
        analytic: engine.analytic(),
        montecarlo: engine.montecarlo(),
        opts: &cfg.opts,
        mc: &cfg.mc,
        timing: cfg.timing,
    };
    let param = cfg.sweep.as_ref().map(|s| s.0.as_str());
    let mut rows = Vec::new();
    for (value, point) in cfg.points()? {
        log::info!("evaluating {}={}", param.unwrap_or("-"), value.map_or("-".into(), |v| v.to_string()));
        let sweep = param.zip(value);
        rows.extend(evaluate_point(&plan, &point, None, sweep)?);
    }
    Ok(rows)
}

fn header(command: &str, cfg: &RunConfig) -> Vec<String> {
    let mut h = vec![format!("isac {} {command}", env!("CARGO_PKG_VERSION"))];
    h.extend(cfg.header_lines());
    h
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let rows = table(&cfg, cfg.engine)?;
    let out = out.or_else(|| cfg.output.clone());
    write_csv(open_output(out.as_deref())?, &header("run", &cfg), &rows, false).map_err(io_error)
}

/// Agreement tolerance between the engines for one row.
fn tolerance(metric: &str, half_width: f64) -> f64 {
    let floor: f64 = if metric.starts_with("ergodic_") { 0.05 } else { 0.02 };
    floor.max(3.0 * half_width)
}

struct Comparison {
    metric: String,
    worst_gap: f64,
    worst_at: String,
    worst_tol: f64,
    pass: bool,
}

fn compare(rows: &[Row]) -> Vec<Comparison> {
    let mut out: Vec<Comparison> = Vec::new();
    for a in rows.iter().filter(|r| r.engine == "analytic") {
        let Some(m) = rows.iter().find(|r| {
            r.engine == "montecarlo" && r.metric == a.metric && r.sweep_value == a.sweep_value && r.series == a.series
        }) else {
            continue;
        };
        let gap = (a.value - m.value).abs();
        let tol = tolerance(&a.metric, m.ci_half_width.unwrap_or(0.0));
        let at = match (&a.sweep_param, a.sweep_value) {
            (Some(p), Some(v)) => format!("{p}={v}"),
            _ => "base point".into(),
        };
        let ok = gap <= tol;
        match out.iter_mut().find(|c| c.metric == a.metric) {
            Some(c) => {
                c.pass &= ok;
                if gap - tol > c.worst_gap - c.worst_tol {
                    c.worst_gap = gap;
                    c.worst_tol = tol;
                    c.worst_at = at;
                }
            }
            None => out.push(Comparison { metric: a.metric.clone(), worst_gap: gap, worst_at: at, worst_tol: tol, pass: ok }),
        }
    }
    out
}

/// Returns whether every metric passed.
fn validate(config: &Path, out: Option<PathBuf>) -> Result<bool, CliError> {
    let cfg = RunConfig::load(config)?;
    if cfg.engine != Engine::Both {
        log::info!("validate runs both engines; ignoring run.engine = {}", cfg.engine.as_str());
    }
    let rows = table(&cfg, Engine::Both)?;
    if let Some(path) = out {
        write_csv(open_output(Some(&path))?, &header("validate", &cfg), &rows, false).map_err(io_error)?;
    }
    let mut all = true;
    let mut stdout = io::stdout().lock();
    for c in compare(&rows) {
        all &= c.pass;
        writeln!(
            stdout,
            "{} {}: max |analytic - montecarlo| = {:.4e} at {} (tolerance {:.4e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.metric,
            c.worst_gap,
            c.worst_at,
            c.worst_tol
        )
        .map_err(io_error)?;
    }
    Ok(all)
}

fn reproduce(
    name: &str,
    dir: &Path,
    engine: Engine,
    trials: usize,
    seed: u64,
    timing: bool,
) -> Result<PathBuf, CliError> {
    let series = presets::preset(name)?;
    let mc = McConfig::new(trials, seed);
    mc.validate().map_err(|e| usage(e.to_string()))?;
    let opts = EvalOptions::default();
    let mut rows = Vec::new();
    let mut header = vec![format!("isac {} reproduce --preset {name}", env!("CARGO_PKG_VERSION"))];
    header.push(format!("engine = {}", engine.as_str()));
    if engine.montecarlo() {
        header.push(format!("n_trials = {trials}"));
        header.push(format!("seed = {seed}"));
    }
    for s in &series {
        let metrics: Vec<MetricKind> = s.metrics.clone();
        for (_, p) in s.points()? {
            config::check_point(&p, &metrics)?;
        }
        header.push(format!("series {} sweeps {}", s.label, s.parameter));
        header.extend(config::point_header(&s.base).into_iter().map(|l| format!("  {l}")));
    }
    for s in &series {
        let plan = Plan {
            metrics: &s.metrics,
            analytic: engine.analytic(),
            montecarlo: engine.montecarlo(),
            opts: &opts,
            mc: &mc,
            timing,
        };
        for (v, p) in s.points()? {
            log::info!("{name}: {} {}={v}", s.label, s.parameter);
            rows.extend(evaluate_point(&plan, &p, Some(&s.label), Some((s.parameter, v)))?);
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(format!("{name}.csv"));
    write_csv(open_output(Some(&path))?, &header, &rows, true).map_err(io_error)?;
    Ok(path)
}

fn selftest() -> bool {
    let mut all = true;
    for c in selftest::run() {
        all &= c.pass();
        println!("{} {}: worst {:.3e} (tolerance {:.1e})", if c.pass() { "PASS" } else { "FAIL" }, c.name, c.worst, c.tol);
    }
    all
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run { config, out } => run(&config, out).map(|()| ExitCode::SUCCESS),
        Command::Validate { config, out } => {
            validate(&config, out).map(|ok| if ok { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
        Command::Reproduce { preset, out, engine, trials, seed, timing } => {
            reproduce(&preset, &out, Engine::parse(&engine)?, trials, seed, timing).map(|path| {
                eprintln!("wrote {}", path.display());
                ExitCode::SUCCESS
            })
        }
        Command::SpecfunSelftest => Ok(if selftest() { ExitCode::SUCCESS } else { ExitCode::from(3) }),
    });
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code())
    })
}
