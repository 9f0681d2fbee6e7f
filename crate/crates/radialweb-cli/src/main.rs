//! Experiment runner: parses a config, dispatches one experiment on a fixed
//! worker pool, and writes CSV data, a JSON summary and a metadata sidecar
//! into the output directory.
//!
//! Exit codes: 0 success, 1 acceptance-threshold failure in --check mode,
//! 2 invalid parameters, 3 I/O failure.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::ConfigMap;
use output::RunWriter;
use radialweb_core::coalescence::{self, TauConfig};
use radialweb_core::convergence;
use radialweb_core::level::{self, LevelParams, LevelSystem};
use radialweb_core::radial;
use radialweb_core::transforms;
use radialweb_core::{Error as CoreError, ModelParams};

#[derive(Parser)]
#[command(name = "radialweb", version, about = "Coalescing radial web simulator and verification suite")]
struct Cli {
    /// key=value config file; explicit flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (RADIALWEB_THREADS overrides; default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for data, summary and metadata files.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Which data stream to echo on stdout.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Exit with status 1 when the run's acceptance thresholds fail.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other}")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build one radial-web realization and export it as JSON.
    Simulate(SimulateArgs),
    /// Coalescence-time survival curve and power-law tail fit.
    Tail(TailArgs),
    /// Single-path normality and variance profile at fixed times.
    Clt(CltArgs),
    /// P[η ≥ 2] across interval widths (crossing-pair statistic).
    B1(SweepArgs),
    /// P[η ≥ 3] across interval widths (crossing-triple statistic).
    B2(SweepArgs),
    /// Mean crossing count against the limiting-web formula.
    Eta(EtaArgs),
    /// Joint path diagnostics from several starts.
    Multipath(MultipathArgs),
    /// Microscopic level-time spacings and their bounds.
    Spacing(SpacingArgs),
    /// Per-level mark-count concentration violations.
    Cansado(CansadoArgs),
    /// Grid discretization: pitch halvings until exact agreement.
    Discretize(DiscretizeArgs),
    /// Hausdorff distance between the rescaled web and its polar unrolling.
    Hausdorff(HausdorffArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args)]
struct TailArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Initial separation of the two paths (microscopic units).
    #[arg(long)]
    sep: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Time grid: "log:LO:HI:POINTS" or a comma list.
    #[arg(long)]
    t_grid: Option<String>,
    /// Start level of both paths.
    #[arg(long)]
    start_level: Option<u64>,
    /// Fit window for the power-law tail.
    #[arg(long)]
    fit_lo: Option<f64>,
    #[arg(long)]
    fit_hi: Option<f64>,
}

#[derive(Args)]
struct CltArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma list of evaluation times in (0, 1−α].
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    /// Also check the covariance at (s, t) = first two times of the list.
    #[arg(long)]
    covariance: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Comma list of interval widths.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args)]
struct EtaArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args)]
struct MultipathArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Starts as "y:s,y:s,..." ordered by time then position.
    #[arg(long)]
    starts: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args)]
struct SpacingArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct CansadoArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Independent realizations to scan.
    #[arg(long)]
    seeds: Option<u64>,
}

#[derive(Args)]
struct DiscretizeArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Start position of the compared paths.
    #[arg(long)]
    start: Option<f64>,
    /// Initial grid pitch.
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    max_halvings: Option<u32>,
    /// Levels to compare.
    #[arg(long)]
    levels: Option<u64>,
    #[arg(long)]
    realizations: Option<u64>,
    /// Spatial window half-width (microscopic units).
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Args)]
struct HausdorffArgs {
    /// Comma list of outer radii.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    seeds: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn param_err(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

fn io_err(message: impl Into<String>) -> CliError {
    CliError { code: 3, message: message.into() }
}

fn core_err(e: CoreError) -> CliError {
    match e {
        CoreError::Io(_) | CoreError::Json(_) => io_err(e.to_string()),
        _ => param_err(e.to_string()),
    }
}

struct Ctx {
    seed: u64,
    output_dir: PathBuf,
    format: OutputFormat,
    check: bool,
    config: Vec<(String, String)>,
}

impl Ctx {
    fn writer(&self, command: &str) -> RunWriter {
        RunWriter::new(&self.output_dir, command, &self.config)
    }

    fn emit(
        &self,
        writer: &RunWriter,
        header: &[&str],
        rows: &[Vec<f64>],
        summary: &impl serde::Serialize,
        extra_meta: serde_json::Value,
    ) -> Result<(), CliError> {
        let csv = writer.write_csv(header, rows).map_err(|e| io_err(e.to_string()))?;
        let json_path = writer.write_summary(summary).map_err(|e| io_err(e.to_string()))?;
        writer.write_meta(extra_meta).map_err(|e| io_err(e.to_string()))?;
        match self.format {
            OutputFormat::Csv => {
                let text = std::fs::read_to_string(&csv).map_err(|e| io_err(e.to_string()))?;
                print!("{text}");
            }
            OutputFormat::Json => {
                let text = std::fs::read_to_string(&json_path).map_err(|e| io_err(e.to_string()))?;
                println!("{text}");
            }
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let cfg = match &cli.config {
        Some(path) => ConfigMap::load(path).map_err(param_err)?,
        None => ConfigMap::empty(),
    };
    let seed = cfg.resolve(&cli.seed, "seed", 0u64).map_err(param_err)?;
    let output_dir = cfg
        .resolve(&cli.output_dir.clone().map(path_str), "output_dir", "out".to_string())
        .map_err(param_err)?;
    let format = cfg.resolve(&cli.format, "format", OutputFormat::Csv).map_err(param_err)?;
    let workers = match std::env::var("RADIALWEB_THREADS") {
        Ok(v) => Some(v.parse::<usize>().map_err(|e| param_err(format!("RADIALWEB_THREADS: {e}")))?),
        Err(_) => cfg.resolve_opt(&cli.workers, "workers").map_err(param_err)?,
    };

    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = workers {
            if w == 0 {
                return Err(param_err("workers must be >= 1"));
            }
            builder = builder.num_threads(w);
        }
        builder.build().map_err(|e| param_err(e.to_string()))?
    };

    let ctx = Ctx {
        seed,
        output_dir: PathBuf::from(output_dir),
        format,
        check: cli.check,
        config: Vec::new(),
    };
    pool.install(|| dispatch(cli.command, ctx, cfg))
}

fn path_str(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}

fn parse_f64_list(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| param_err(format!("bad number {s}: {e}"))))
        .collect()
}

fn parse_grid(raw: &str) -> Result<Vec<f64>, CliError> {
    if let Some(rest) = raw.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(param_err("grid spec must be log:LO:HI:POINTS"));
        }
        let lo: f64 = parts[0].parse().map_err(|e| param_err(format!("grid lo: {e}")))?;
        let hi: f64 = parts[1].parse().map_err(|e| param_err(format!("grid hi: {e}")))?;
        let pts: usize = parts[2].parse().map_err(|e| param_err(format!("grid points: {e}")))?;
        if !(lo > 0.0 && hi > lo && pts >= 2) {
            return Err(param_err("grid needs 0 < lo < hi and at least 2 points"));
        }
        Ok(coalescence::log_grid(lo, hi, pts))
    } else {
        let grid = parse_f64_list(raw)?;
        if grid.is_empty() {
            return Err(param_err("empty time grid"));
        }
        Ok(grid)
    }
}

fn parse_starts(raw: &str) -> Result<Vec<(f64, f64)>, CliError> {
    raw.split(',')
        .map(|pair| {
            let (y, s) = pair
                .split_once(':')
                .ok_or_else(|| param_err(format!("start {pair} must be y:s")))?;
            let y: f64 = y.trim().parse().map_err(|e| param_err(format!("start y: {e}")))?;
            let s: f64 = s.trim().parse().map_err(|e| param_err(format!("start s: {e}")))?;
            Ok((y, s))
        })
        .collect()
}

fn dispatch(command: Command, mut ctx: Ctx, cfg: ConfigMap) -> Result<bool, CliError> {
    match command {
        Command::Simulate(a) => run_simulate(a, &mut ctx, &cfg),
        Command::Tail(a) => run_tail(a, &mut ctx, &cfg),
        Command::Clt(a) => run_clt(a, &mut ctx, &cfg),
        Command::B1(a) => run_sweep(a, &mut ctx, &cfg, 2),
        Command::B2(a) => run_sweep(a, &mut ctx, &cfg, 3),
        Command::Eta(a) => run_eta(a, &mut ctx, &cfg),
        Command::Multipath(a) => run_multipath(a, &mut ctx, &cfg),
        Command::Spacing(a) => run_spacing(a, &mut ctx, &cfg),
        Command::Cansado(a) => run_cansado(a, &mut ctx, &cfg),
        Command::Discretize(a) => run_discretize(a, &mut ctx, &cfg),
        Command::Hausdorff(a) => run_hausdorff(a, &mut ctx, &cfg),
    }
}

fn set_config(ctx: &mut Ctx, entries: Vec<(&str, String)>) {
    ctx.config = entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    ctx.config.push(("seed".to_string(), ctx.seed.to_string()));
}

fn run_simulate(a: SimulateArgs, ctx: &mut Ctx, cfg: &ConfigMap) -> Result<bool, CliError> {
    let n = cfg.resolve(&a.n, "n", 100).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    let delta = cfg.resolve(&a.delta, "delta", 0.3).map_err(param_err)?;
    let kappa = cfg.resolve(&a.kappa, "kappa", 0.15).map_err(param_err)?;
    let params = ModelParams::new(n, alpha, delta, kappa).map_err(core_err)?;
    set_config(
        ctx,
        vec![
            ("n", n.to_string()),
            ("alpha", alpha.to_string()),
            ("delta", delta.to_string()),
            ("kappa", kappa.to_string()),
        ],
    );
    let writer = ctx.writer("simulate");
    let mut fam = radial::build_drpw(&params, ctx.seed, 0).map_err(core_err)?;
    let export = radial::export_realization(&mut fam);
    let text = radialweb_core::io::to_json_string(&export).map_err(core_err)?;
    let path = ctx.output_dir.join("simulate.json");
    radialweb_core::io::atomic_write(&path, text.as_bytes()).map_err(core_err)?;
    writer
        .write_meta(json!({
            "starts": fam.starts.len(),
            "rule_events": serde_json::to_value(&fam.rule_events).map_err(|e| io_err(e.to_string()))?,
        }))
        .map_err(|e| io_err(e.to_string()))?;
    println!(
        "simulate: n={n} starts={} jump_fraction={:.3e} -> {}",
        fam.starts.len(),
        fam.rule_events.jump_fraction(),
        path.display()
    );
    Ok(true)
}

fn run_tail(a: TailArgs, ctx: &mut Ctx, cfg: &ConfigMap) -> Result<bool, CliError> {
    let n = cfg.resolve(&a.n, "n", 10_000).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    let sep = cfg.resolve(&a.sep, "sep", 1.0).map_err(param_err)?;
    let trials = cfg.resolve(&a.trials, "trials", 100_000).map_err(param_err)?;
    let start_level = cfg.resolve(&a.start_level, "start_level", 0).map_err(param_err)?;
    let grid_raw =
        cfg.resolve(&a.t_grid, "t_grid", "log:1:2000:25".to_string()).map_err(param_err)?;
    let fit_lo = cfg.resolve(&a.fit_lo, "fit_lo", 10.0).map_err(param_err)?;
    let fit_hi = cfg.resolve(&a.fit_hi, "fit_hi", 1000.0).map_err(param_err)?;
    let t_grid = parse_grid(&grid_raw)?;
    set_config(
        ctx,
        vec![
            ("n", n.to_string()),
            ("alpha", alpha.to_string()),
            ("sep", sep.to_string()),
            ("trials", trials.to_string()),
            ("start_level", start_level.to_string()),
            ("t_grid", grid_raw.clone()),
            ("fit_lo", fit_lo.to_string()),
            ("fit_hi", fit_hi.to_string()),
        ],
    );
    let writer = ctx.writer("tail");
    let curve = coalescence::sample_tau(&TauConfig {
        n,
        alpha,
        separation: sep,
        start_level,
        t_grid,
        trials,
        seed: ctx.seed,
    })
    .map_err(core_err)?;
    let fit = coalescence::fit_tail(&curve, (fit_lo, fit_hi)).map_err(core_err)?;
    let rows: Vec<Vec<f64>> = curve
        .t_grid
        .iter()
        .zip(curve.survival.iter().zip(&curve.stderr))
        .map(|(t, (p, se))| vec![*t, *p, *se])
        .collect();
    let slope_ok = (-0.6..=-0.4).contains(&fit.slope);
    let plateau_ok = fit.plateau_ratio <= 2.0;
    let summary = json!({
        "curve": {
            "trials": curve.trials,
            "contamination_rate": curve.contamination_rate,
        },
        "fit": fit,
        "check": {"slope_ok": slope_ok, "plateau_ok": plateau_ok},
    });
    ctx.emit(
        &writer,
        &["t", "survival", "stderr"],
        &rows,
        &summary,
        json!({"contamination_rate": curve.contamination_rate}),
    )?;
    eprintln!(
        "tail: slope={:.4} (se {:.4}) c_hat={:.4} plateau={:.3} [{}]",
        fit.slope,
        fit.slope_se,
        fit.c_hat,
        fit.plateau_ratio,
        if slope_ok && plateau_ok { "ok" } else { "outside thresholds" }
    );
    Ok(!ctx.check || (slope_ok && plateau_ok))
}

fn run_clt(a: CltArgs, ctx: &mut Ctx, cfg: &ConfigMap) -> Result<bool, CliError> {
    let n = cfg.resolve(&a.n, "n", 10_000).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    let t_raw = cfg.resolve(&a.t, "t", "0.25,0.5".to_string()).map_err(param_err)?;
    let samples = cfg.resolve(&a.samples, "samples", 5000).map_err(param_err)?;
    let ts = parse_f64_list(&t_raw)?;
    set_config(
        ctx,
        vec![
            ("n", n.to_string()),
            ("alpha", alpha.to_string()),
            ("t", t_raw.clone()),
            ("samples", samples.to_string()),
        ],
    );
    let writer = ctx.writer("clt");
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut all_ok = true;
    for &t in &ts {
        let rep = convergence::clt_test(n, alpha, t, samples, ctx.seed).map_err(core_err)?;
        rows.push(vec![
            t,
            samples as f64,
            rep.empirical_var,
            rep.predicted_var,
            rep.variance_ratio,
            rep.ks_stat,
            rep.ks_p,
        ]);
        all_ok &= rep.ks_p > 0.01 && (0.95..=1.05).contains(&rep.variance_ratio);
        eprintln!(
            "clt t={t}: var_ratio={:.4} ks_p={:.4} matched={}",
            rep.variance_ratio, rep.ks_p, rep.matched_candidate
        );
        reports.push(rep);
    }
    let cov = if a.covariance && ts.len() >= 2 {
        let rep = convergence::covariance_check(n, alpha, ts[0], ts[1], samples, ctx.seed)
            .map_err(core_err)?;
        all_ok &= rep.relative_deviation < 0.05;
        Some(rep)
    } else {
        None
    };
    let summary = json!({"reports": reports, "covariance": cov});
    ctx.emit(
        &writer,
        &["t", "samples", "empirical_var", "predicted_var", "variance_ratio", "ks_stat", "ks_p"],
        &rows,
        &summary,
        json!({}),
    )?;
    Ok(!ctx.check || all_ok)
}

/// Adjacent-width ratios p(ε_i)/p(ε_{i+1}) for a sorted sweep.
fn sweep_ratios(rows: &[convergence::EpsEstimate]) -> Vec<serde_json::Value> {
    rows.windows(2)
        .map(|w| {
            let ratio = if w[1].p > 0.0 { w[0].p / w[1].p } else { f64::NAN };
            json!({
                "eps_small": w[0].eps,
                "eps_large": w[1].eps,
                "ratio": ratio,
                "hits_small": w[0].hits,
                "hits_large": w[1].hits,
            })
        })
        .collect()
}

fn run_sweep(a: SweepArgs, ctx: &mut Ctx, cfg: &ConfigMap, threshold: usize) -> Result<bool, CliError> {
    let n = cfg.resolve(&a.n, "n", 10_000).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    let t = cfg.resolve(&a.t, "t", 0.5).map_err(param_err)?;
    let eps_raw = cfg.resolve(&a.eps, "eps", "0.1,0.2,0.4".to_string()).map_err(param_err)?;
    let trials = cfg.resolve(&a.trials, "trials", 10_000).map_err(param_err)?;
    let eps = parse_f64_list(&eps_raw)?;
    let name = if threshold == 2 { "b1" } else { "b2" };
    set_config(
        ctx,
        vec![
            ("n", n.to_string()),
            ("alpha", alpha.to_string()),
            ("t", t.to_string()),
            ("eps", eps_raw.clone()),
            ("trials", trials.to_string()),
        ],
    );
    let writer = ctx.writer(name);
    let sweep =
        convergence::crossing_sweep(n, alpha, t, &eps, trials, threshold, ctx.seed).map_err(core_err)?;
    let rows: Vec<Vec<f64>> = sweep
        .rows
        .iter()
        .map(|r| vec![r.eps, r.trials as f64, r.hits as f64, r.p, r.stderr])
        .collect();
    let ratios = sweep_ratios(&sweep.rows);
    let (lo, hi) = if threshold == 2 { (0.3, 0.7) } else { (0.15, 0.4) };
    let mut all_ok = true;
    for r in &ratios {
        let ratio = r["ratio"].as_f64().unwrap_or(f64::NAN);
        if threshold == 3 {
            let enough = r["hits_small"].as_u64().unwrap_or(0) >= 50
                && r["hits_large"].as_u64().unwrap_or(0) >= 50;
            if enough {
                all_ok &= (lo..=hi).contains(&ratio);
            }
        } else {
            all_ok &= (lo..=hi).contains(&ratio);
        }
        eprintln!("{name}: ratio p({})/p({}) = {:.3}", r["eps_small"], r["eps_large"], ratio);
    }
    let summary = json!({
        "sweep": sweep,
        "ratios": ratios,
        "thresholds": {"lo": lo, "hi": hi},
    });
    ctx.emit(
        &writer,
        &["eps", "trials", "hits", "p", "stderr"],
        &rows,
        &summary,
        json!({"contamination_rate": sweep.contamination_rate}),
    )?;
    Ok(!ctx.check || all_ok)
}

fn run_eta(a: EtaArgs, ctx: &mut Ctx, cfg: &ConfigMap) -> Result<bool, CliError> {
    let n = cfg.resolve(&a.n, "n", 10_000).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    let t0 = cfg.resolve(&a.t0, "t0", 0.0).map_err(param_err)?;
    let t = cfg.resolve(&a.t, "t", 0.5).map_err(param_err)?;
    let a_lo = cfg.resolve(&a.a, "a", 0.0).map_err(param_err)?;
    let b_hi = cfg.resolve(&a.b, "b", 0.2).map_err(param_err)?;
    let trials = cfg.resolve(&a.trials, "trials", 2000).map_err(param_err)?;
    set_config(
        ctx,
        vec![
            ("n", n.to_string()),
            ("alpha", alpha.to_string()),
            ("t0", t0.to_string()),
            ("t", t.to_string()),
            ("a", a_lo.to_string()),
            ("b", b_hi.to_string()),
            ("trials", trials.to_string()),
        ],
    );
    let writer = ctx.writer("eta");
    let rep = convergence::eta_mean(n, alpha, t0, t, a_lo, b_hi, trials, ctx.seed).map_err(core_err)?;
    let rel = (rep.mean - rep.limit_value).abs() / rep.limit_value;
    let ok = rel <= 0.15;
    let rows = vec![vec![t0, t, a_lo, b_hi, rep.mean, rep.stderr, rep.limit_value, rel]];
    ctx.emit(
        &writer,
        &["t0", "t", "a", "b", "mean", "stderr", "limit", "relative_deviation"],
        &rows,
        &rep,
        json!({"contamination_rate": rep.contamination_rate}),
    )?;
    eprintln!("eta: mean={:.4} limit={:.4} rel_dev={rel:.3} ok={ok}", rep.mean, rep.limit_value);
    Ok(!ctx.check || ok)
}

fn run_multipath(a: MultipathArgs, ctx: &mut Ctx, cfg: &ConfigMap) -> Result<bool, CliError> {
    let n = cfg.resolve(&a.n, "n", 10_000).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    let starts_raw =
        cfg.resolve(&a.starts, "starts", "0:0,1.5:0".to_string()).map_err(param_err)?;
    let trials = cfg.resolve(&a.trials, "trials", 5000).map_err(param_err)?;
    let starts = parse_starts(&starts_raw)?;
    set_config(
        ctx,
        vec![
            ("n", n.to_string()),
            ("alpha", alpha.to_string()),
            ("starts", starts_raw.clone()),
            ("trials", trials.to_string()),
        ],
    );
    let writer = ctx.writer("multipath");
    let rep = convergence::multipath_test(n, alpha, &starts, trials, ctx.seed).map_err(core_err)?;
    let rows: Vec<Vec<f64>> = starts
        .iter()
        .zip(&rep.marginals)
        .map(|(&(y, s), ks)| vec![y, s, ks.statistic, ks.p_value])
        .collect();
    let marginals_ok = rep.marginals.iter().all(|k| k.p_value > 0.01);
    let slope_ok = (1.8..=2.2).contains(&rep.pair_slope_ratio);
    let ok = marginals_ok && slope_ok && rep.identical_after_meeting;
    ctx.emit(
        &writer,
        &["start_y", "start_s", "ks_stat", "ks_p"],
        &rows,
        &rep,
        json!({"contamination_rate": rep.contamination_rate}),
    )?;
    eprintln!(
        "multipath: slope_ratio={:.3} marginals_ok={marginals_ok} merged_ok={}",
        rep.pair_slope_ratio, rep.identical_after_meeting
    );
    Ok(!ctx.check || ok)
}

fn run_spacing(a: SpacingArgs, ctx: &mut Ctx, cfg: &ConfigMap) -> Result<bool, CliError> {
    let n = cfg.resolve(&a.n, "n", 10_000).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    set_config(ctx, vec![("n", n.to_string()), ("alpha", alpha.to_string())]);
    let writer = ctx.writer("spacing");
    let rep = level::level_spacing(n, alpha).map_err(core_err)?;
    let params = LevelParams::new(n, alpha).map_err(core_err)?;
    let rows: Vec<Vec<f64>> = rep
        .spacings
        .iter()
        .enumerate()
        .map(|(j, s)| vec![j as f64, params.time_micro(j as u64), *s])
        .collect();
    let ok = rep.min >= 1.0 && (0.8..=1.0).contains(&(rep.max / rep.analytic_max));
    let summary = json!({
        "n": rep.n, "alpha": rep.alpha, "k_n": rep.k_n,
        "min": rep.min, "max": rep.max,
        "analytic_max": rep.analytic_max,
        "inverse_alpha_sq": rep.inverse_alpha_sq,
    });
    ctx.emit(&writer, &["j", "time_micro", "spacing"], &rows, &summary, json!({}))?;
    eprintln!("spacing: min={:.6} max={:.6} analytic_max={:.6}", rep.min, rep.max, rep.analytic_max);
    Ok(!ctx.check || ok)
}

fn run_cansado(a: CansadoArgs, ctx: &mut Ctx, cfg: &ConfigMap) -> Result<bool, CliError> {
    let n = cfg.resolve(&a.n, "n", 10_000).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    let eps = cfg.resolve(&a.eps, "eps", 1.0).map_err(param_err)?;
    let seeds = cfg.resolve(&a.seeds, "seeds", 100).map_err(param_err)?;
    set_config(
        ctx,
        vec![
            ("n", n.to_string()),
            ("alpha", alpha.to_string()),
            ("eps", eps.to_string()),
            ("seeds", seeds.to_string()),
        ],
    );
    let writer = ctx.writer("cansado");
    let params = LevelParams::new(n, alpha).map_err(core_err)?;
    let span = eps * (n as f64).sqrt();
    let window = span + 128.0;
    let master = ctx.seed;
    use rayon::prelude::*;
    let fractions: Vec<Result<f64, CoreError>> = (0..seeds)
        .into_par_iter()
        .map(|trial| {
            let mut sys = LevelSystem::new(params, window, 1, master, trial)?;
            let mut violations = 0u64;
            let k_n = params.k_n();
            for k in 0..=k_n {
                if !level::cansado_check(&mut sys, eps, k)? {
                    violations += 1;
                }
            }
            Ok(violations as f64 / (k_n + 1) as f64)
        })
        .collect();
    let fractions = fractions.into_iter().collect::<Result<Vec<f64>, CoreError>>().map_err(core_err)?;
    let rows: Vec<Vec<f64>> =
        fractions.iter().enumerate().map(|(i, f)| vec![i as f64, *f]).collect();
    let median = radialweb_core::stats::median(&fractions);
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let ok = median < 0.01;
    let summary = json!({
        "n": n, "alpha": alpha, "eps": eps, "seeds": seeds,
        "median_violation_fraction": median,
        "mean_violation_fraction": mean,
    });
    ctx.emit(&writer, &["seed_index", "violation_fraction"], &rows, &summary, json!({}))?;
    eprintln!("cansado: median violation fraction {median:.5} over {seeds} seeds");
    Ok(!ctx.check || ok)
}

fn run_discretize(a: DiscretizeArgs, ctx: &mut Ctx, cfg: &ConfigMap) -> Result<bool, CliError> {
    let n = cfg.resolve(&a.n, "n", 60).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    let start = cfg.resolve(&a.start, "start", 0.3).map_err(param_err)?;
    let r0 = cfg.resolve(&a.r0, "r0", 1.0).map_err(param_err)?;
    let max_halvings = cfg.resolve(&a.max_halvings, "max_halvings", 40).map_err(param_err)?;
    let params = LevelParams::new(n, alpha).map_err(core_err)?;
    let levels = cfg.resolve(&a.levels, "levels", params.k_n()).map_err(param_err)?;
    let realizations = cfg.resolve(&a.realizations, "realizations", 20).map_err(param_err)?;
    let horizon = params.time_micro(levels.min(params.k_n() + 1)) + 1.0;
    let window = cfg
        .resolve(&a.window, "window", level::default_window(horizon, start.abs() + r0))
        .map_err(param_err)?;
    set_config(
        ctx,
        vec![
            ("n", n.to_string()),
            ("alpha", alpha.to_string()),
            ("start", start.to_string()),
            ("r0", r0.to_string()),
            ("max_halvings", max_halvings.to_string()),
            ("levels", levels.to_string()),
            ("realizations", realizations.to_string()),
            ("window", window.to_string()),
        ],
    );
    let writer = ctx.writer("discretize");
    let master = ctx.seed;
    use rayon::prelude::*;
    let halvings: Vec<Result<Option<u32>, CoreError>> = (0..realizations)
        .into_par_iter()
        .map(|trial| {
            let mut sys = LevelSystem::new(params, window, 2, master, trial)?;
            level::halvings_to_agreement(&mut sys, r0, start, levels, max_halvings)
        })
        .collect();
    let halvings =
        halvings.into_iter().collect::<Result<Vec<Option<u32>>, CoreError>>().map_err(core_err)?;
    let rows: Vec<Vec<f64>> = halvings
        .iter()
        .enumerate()
        .map(|(i, h)| vec![i as f64, h.map(|x| x as f64).unwrap_or(f64::NAN)])
        .collect();
    let all_converged = halvings.iter().all(|h| h.is_some());
    let max_used = halvings.iter().flatten().max().copied();
    let summary = json!({
        "n": n, "alpha": alpha, "levels": levels,
        "realizations": realizations,
        "all_converged": all_converged,
        "max_halvings_used": max_used,
    });
    ctx.emit(&writer, &["realization", "halvings"], &rows, &summary, json!({}))?;
    eprintln!(
        "discretize: converged {}/{} realizations, max halvings {max_used:?}",
        halvings.iter().flatten().count(),
        realizations
    );
    Ok(!ctx.check || all_converged)
}

fn run_hausdorff(a: HausdorffArgs, ctx: &mut Ctx, cfg: &ConfigMap) -> Result<bool, CliError> {
    let n_raw = cfg.resolve(&a.n, "n", "100,1000,10000".to_string()).map_err(param_err)?;
    let alpha = cfg.resolve(&a.alpha, "alpha", 0.5).map_err(param_err)?;
    let delta = cfg.resolve(&a.delta, "delta", 0.3).map_err(param_err)?;
    let kappa = cfg.resolve(&a.kappa, "kappa", 0.15).map_err(param_err)?;
    let seeds = cfg.resolve(&a.seeds, "seeds", 30).map_err(param_err)?;
    let ns: Vec<u64> = n_raw
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|e| param_err(format!("bad n {s}: {e}"))))
        .collect::<Result<_, _>>()?;
    set_config(
        ctx,
        vec![
            ("n", n_raw.clone()),
            ("alpha", alpha.to_string()),
            ("delta", delta.to_string()),
            ("kappa", kappa.to_string()),
            ("seeds", seeds.to_string()),
        ],
    );
    let writer = ctx.writer("hausdorff");
    let master = ctx.seed;
    use rayon::prelude::*;
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for &n in &ns {
        let params = ModelParams::new(n, alpha, delta, kappa).map_err(core_err)?;
        let dists: Vec<Result<f64, CoreError>> = (0..seeds)
            .into_par_iter()
            .map(|trial| {
                let mut fam = radial::build_drpw(&params, master, trial)?;
                let restricted = radial::restrict_family(&mut fam);
                let step = 1.0 / (n as f64).sqrt();
                let phi = transforms::scaled_cloud(&restricted, step);
                let xi = transforms::lambda_cloud(&restricted, step)?;
                transforms::planar_hausdorff(&xi, &phi)
            })
            .collect();
        let dists = dists.into_iter().collect::<Result<Vec<f64>, CoreError>>().map_err(core_err)?;
        for (i, d) in dists.iter().enumerate() {
            rows.push(vec![n as f64, i as f64, *d]);
        }
        medians.push((n, radialweb_core::stats::median(&dists)));
    }
    let decreasing = medians.windows(2).all(|w| w[1].1 < w[0].1);
    let summary = json!({
        "medians": medians.iter().map(|(n, m)| json!({"n": n, "median": m})).collect::<Vec<_>>(),
        "strictly_decreasing": decreasing,
    });
    ctx.emit(&writer, &["n", "seed_index", "hausdorff"], &rows, &summary, json!({}))?;
    for (n, m) in &medians {
        eprintln!("hausdorff: n={n} median={m:.6}");
    }
    Ok(!ctx.check || decreasing)
}
