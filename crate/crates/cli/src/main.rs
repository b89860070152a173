use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sysrisk::crisis_events::{CrisisEventSpec, EventKind};
use sysrisk::harness::{
    compare, elliptical_oracle, run, tune_only, write_comparison_csv, write_outputs, ComparisonRow, Engine,
    ModelSource, RunConfig, RunOutput,
};
use sysrisk::loss_models::presets::PRESETS;
use sysrisk::risk_measures::MarginalRiskMeasure;
use sysrisk::{Error, Execution, Result};

const COMPARISON_FILE: &str = "comparison.csv";
const TUNED_FILE: &str = "tuned.json";

#[derive(Parser)]
#[command(
    name = "sysrisk",
    version,
    about = "Systemic risk allocations by MC, HMC and Gibbs sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one allocation and print its report.
    Allocate(RunArgs),
    /// Tune the MCMC engine and print its parameters.
    Tune(RunArgs),
    /// Run several engines on the same model and event and tabulate bias, SE and time-adjusted MSE.
    Compare(CompareArgs),
    /// List the named models.
    Presets,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name (M1, M2, M3, t6eq-<d>).
    #[arg(long)]
    model: Option<String>,
    /// Crisis event kind: var, rvar or es.
    #[arg(long)]
    event: Option<String>,
    /// Event levels, comma separated (two for rvar).
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
    /// Half-width of the VaR band.
    #[arg(long)]
    delta: Option<f64>,
    /// mc, hmc or gibbs.
    #[arg(long)]
    engine: Option<String>,
    /// MCMC sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo presample size.
    #[arg(long = "n-mc")]
    n_mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-coordinate risk measure: mean, var:b, es:b or rvar:b1:b2. Repeat per coordinate or give once.
    #[arg(long)]
    measure: Vec<String>,
    /// Directory for report, timing, samples and diagnostics files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disable the thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Engines to compare when a single configuration is given.
    #[arg(long, value_delimiter = ',', default_value = "mc,hmc,gibbs")]
    engines: Vec<String>,
    /// Additional complete configurations; when present, `--engines` is ignored.
    #[arg(long = "with")]
    with: Vec<PathBuf>,
}

fn parse_measure(s: &str) -> Result<MarginalRiskMeasure> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad level {t:?} in measure {s:?}")))
    };
    let m = match parts.as_slice() {
        ["mean"] => MarginalRiskMeasure::Mean,
        ["var", b] => MarginalRiskMeasure::Var { beta: num(b)? },
        ["es", b] => MarginalRiskMeasure::Es { beta: num(b)? },
        ["rvar", b1, b2] => MarginalRiskMeasure::Rvar {
            beta1: num(b1)?,
            beta2: num(b2)?,
        },
        _ => {
            return Err(Error::Config(format!(
                "cannot parse measure {s:?}; expected mean, var:b, es:b or rvar:b1:b2"
            )))
        }
    };
    m.validated()
}

fn parse_event_kind(s: &str) -> Result<EventKind> {
    match s.to_ascii_lowercase().as_str() {
        "var" => Ok(EventKind::Var),
        "rvar" => Ok(EventKind::Rvar),
        "es" => Ok(EventKind::Es),
        _ => Err(Error::Config(format!("unknown event {s:?}; expected var, rvar or es"))),
    }
}

fn build_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => Some(RunConfig::from_file(path)?),
        None => None,
    };
    let engine = a.engine.as_deref().map(str::parse::<Engine>).transpose()?;
    let event = match &a.event {
        Some(kind) => {
            let kind = parse_event_kind(kind)?;
            let levels = if a.levels.is_empty() {
                match kind {
                    EventKind::Rvar => vec![0.975, 0.99],
                    _ => vec![0.99],
                }
            } else {
                a.levels.clone()
            };
            Some(
                CrisisEventSpec {
                    kind,
                    levels,
                    delta: a.delta.unwrap_or(0.0),
                }
                .validated()?,
            )
        }
        None => None,
    };
    if let Some(c) = cfg.as_mut() {
        if let Some(m) = &a.model {
            c.model = ModelSource::Preset(m.clone());
        }
        if let Some(e) = event {
            c.event = e;
        } else {
            if !a.levels.is_empty() {
                c.event.levels = a.levels.clone();
            }
            if let Some(d) = a.delta {
                c.event.delta = d;
            }
        }
        if let Some(e) = engine {
            c.engine = e;
        }
    } else {
        let model = a
            .model
            .clone()
            .ok_or_else(|| Error::Config("--model is required without --config".into()))?;
        let event = event.ok_or_else(|| Error::Config("--event is required without --config".into()))?;
        let engine = engine.ok_or_else(|| Error::Config("--engine is required without --config".into()))?;
        cfg = Some(RunConfig::preset(&model, event, engine));
    }
    let mut cfg = cfg.expect("set above");
    cfg.event = cfg.event.clone().validated()?;
    if let Some(n) = a.n {
        cfg.n_mcmc = n;
    }
    if let Some(n) = a.n_mc {
        cfg.n_mc = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if !a.measure.is_empty() {
        cfg.measures = a.measure.iter().map(|m| parse_measure(m)).collect::<Result<_>>()?;
    }
    if let Some(out) = &a.out {
        cfg.output_dir = Some(out.clone());
    }
    if a.sequential {
        cfg.execution = Execution::Sequential;
    }
    Ok(cfg)
}

fn print_json(v: serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

fn allocate(a: &RunArgs) -> Result<()> {
    let cfg = build_config(a)?;
    let out = run(&cfg)?;
    if let Some(dir) = &cfg.output_dir {
        write_outputs(&out, dir)?;
    }
    print_json(serde_json::to_value(&out.report)?)
}

fn tune(a: &RunArgs) -> Result<()> {
    let cfg = build_config(a)?;
    let tuned = tune_only(&cfg)?;
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(TUNED_FILE), serde_json::to_string_pretty(&tuned)? + "\n")?;
    }
    print_json(serde_json::to_value(&tuned)?)
}

fn comparison_configs(a: &CompareArgs) -> Result<Vec<RunConfig>> {
    let mut args = RunArgs {
        out: None,
        ..a.run.clone()
    };
    if args.engine.is_none() && args.config.is_none() {
        args.engine = a.engines.first().cloned();
    }
    let base = build_config(&args)?;
    if !a.with.is_empty() {
        let mut cfgs = vec![base];
        for p in &a.with {
            cfgs.push(RunConfig::from_file(p)?);
        }
        return Ok(cfgs);
    }
    a.engines
        .iter()
        .map(|e| {
            let mut c = base.clone();
            c.engine = e.parse()?;
            Ok(c)
        })
        .collect()
}

/// Closed-form allocation when every run shares one elliptical model, one event and mean measures.
fn oracle_for(cfgs: &[RunConfig], runs: &[RunOutput]) -> Option<Vec<f64>> {
    let first = cfgs.first()?;
    let shared = cfgs.iter().all(|c| c.model == first.model && c.event == first.event);
    let means = runs.iter().all(|r| {
        r.report
            .estimates
            .iter()
            .all(|e| e.measure == MarginalRiskMeasure::Mean)
    });
    if !shared || !means {
        return None;
    }
    let model = first.model.resolve().ok()?;
    elliptical_oracle(&model, &first.event).ok()
}

fn print_rows(rows: &[ComparisonRow]) {
    println!(
        "{:<6} {:>5} {:>12} {:>12} {:>12} {:>14} {:>10}",
        "engine", "coord", "estimate", "bias", "se", "mse_adj", "runtime"
    );
    for r in rows {
        let bias = r.bias.map_or_else(|| "-".to_string(), |b| format!("{b:.5}"));
        println!(
            "{:<6} {:>5} {:>12.5} {:>12} {:>12.5} {:>14.6e} {:>10.3}",
            r.engine.to_string(),
            r.coordinate + 1,
            r.estimate,
            bias,
            r.se,
            r.time_adjusted_mse,
            r.runtime
        );
    }
}

fn run_compare(a: &CompareArgs) -> Result<()> {
    let cfgs = comparison_configs(a)?;
    // Sequential so that recorded runtimes are not distorted by sibling runs.
    let runs = cfgs.iter().map(run).collect::<Result<Vec<_>>>()?;
    let oracle = oracle_for(&cfgs, &runs);
    let rows = compare(&runs, oracle.as_deref())?;
    if let Some(dir) = &a.run.out {
        std::fs::create_dir_all(dir)?;
        for (i, r) in runs.iter().enumerate() {
            write_outputs(r, &dir.join(format!("run{}_{}", i + 1, r.report.engine)))?;
        }
        write_comparison_csv(&rows, &dir.join(COMPARISON_FILE))?;
    }
    print_rows(&rows);
    Ok(())
}

fn presets() {
    for (name, description) in PRESETS {
        println!("{name:<10} {description}");
    }
}

fn report_dir_hint(dir: &Path) -> String {
    format!("outputs written to {}", dir.display())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Allocate(a) => allocate(a).map(|_| a.out.as_deref().map(report_dir_hint)),
        Command::Tune(a) => tune(a).map(|_| None),
        Command::Compare(a) => run_compare(a).map(|_| a.run.out.as_deref().map(report_dir_hint)),
        Command::Presets => {
            presets();
            Ok(None)
        }
    };
    match res {
        Ok(hint) => {
            if let Some(h) = hint {
                eprintln!("{h}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Capability(_) => 2,
                _ => 1,
            })
        }
    }
}
