//! Monte Carlo estimation of the meeting-time tail of two coalescing paths:
//! survival curves on a microscopic time grid, power-law tail fits, scaling
//! in the initial separation and martingale diagnostics of the difference
//! process.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::{default_window, LevelParams, LevelSystem};
use crate::stats;

/// Estimated P[τ > t] on a fixed time grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub t_grid: Vec<f64>,
    pub survival: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Trials that completed without boundary contamination.
    pub trials: u64,
    pub contamination_rate: f64,
}

/// Power-law fit of a survival curve over a window.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailFit {
    /// max over the window of √t · p̂(t).
    pub c_hat: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub fit_window: (f64, f64),
    /// max(√t·p̂) / median(√t·p̂) over the window; near 1 when the tail is
    /// genuinely ~ C/√t.
    pub plateau_ratio: f64,
}

/// The per-level gap between two coalescing paths started `separation`
/// apart. Gaps are nonnegative and absorb at zero by shared-successor
/// construction.
#[derive(Clone, Debug)]
pub struct DiffTrace {
    pub start_level: u64,
    pub z: Vec<f64>,
    pub absorbed_level: Option<u64>,
}

/// Run the difference process from positions `u` and `u + separation` at
/// `start_level` for `levels` steps (or until absorption).
pub fn difference_process(
    sys: &mut LevelSystem,
    start_level: u64,
    u: f64,
    separation: f64,
    levels: u64,
) -> Result<DiffTrace> {
    if separation < 0.0 {
        return Err(Error::InvalidParameter("separation must be nonnegative".into()));
    }
    let mut z = Vec::with_capacity(levels as usize + 1);
    z.push(separation);
    if separation == 0.0 {
        return Ok(DiffTrace { start_level, z, absorbed_level: Some(start_level) });
    }
    let mut left = sys.successor_of_position(start_level, u)?;
    let mut right = sys.successor_of_position(start_level, u + separation)?;
    for step in 1..=levels {
        let level = start_level + step;
        if left == right {
            z.push(0.0);
            return Ok(DiffTrace { start_level, z, absorbed_level: Some(level) });
        }
        let gap = sys.position(right) - sys.position(left);
        debug_assert!(gap >= 0.0, "noncrossing violated: gap {gap}");
        z.push(gap);
        if step == levels {
            break;
        }
        left = sys.successor(left)?;
        right = sys.successor(right)?;
    }
    Ok(DiffTrace { start_level, z, absorbed_level: None })
}

/// Smallest step count whose elapsed microscopic time from `start_level`
/// covers `horizon`.
fn steps_for_horizon(params: &LevelParams, start_level: u64, horizon: f64) -> Result<u64> {
    let base = params.time_micro(start_level);
    let mut k = start_level;
    loop {
        k += 1;
        if k as f64 >= 0.9 * params.n as f64 {
            return Err(Error::InvalidParameter(format!(
                "horizon {horizon} needs levels beyond 0.9·n for n = {}",
                params.n
            )));
        }
        if params.time_micro(k) - base > horizon {
            return Ok(k - start_level);
        }
    }
}

/// One meeting-time draw: Some(τ) in microscopic time when the paths meet
/// within the horizon, None when they survive past it.
fn tau_trial(
    params: LevelParams,
    window: f64,
    levels_beyond: u64,
    start_level: u64,
    separation: f64,
    horizon: f64,
    seed: u64,
    trial: u64,
) -> Result<Option<f64>> {
    if separation == 0.0 {
        return Ok(Some(0.0));
    }
    let mut sys = LevelSystem::new(params, window, levels_beyond, seed, trial)?;
    let base = params.time_micro(start_level);
    let mut left = sys.successor_of_position(start_level, 0.0)?;
    let mut right = sys.successor_of_position(start_level, separation)?;
    let mut level = start_level + 1;
    loop {
        if left == right {
            return Ok(Some(params.time_micro(level) - base));
        }
        if params.time_micro(level) - base > horizon {
            return Ok(None);
        }
        left = sys.successor(left)?;
        right = sys.successor(right)?;
        level += 1;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TauConfig {
    pub n: u64,
    pub alpha: f64,
    pub separation: f64,
    pub start_level: u64,
    pub t_grid: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

/// Log-spaced grid helper for tail runs.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Estimate the survival curve P[τ > t] over independent trials, each on a
/// fresh realization. Contaminated trials are discarded and counted.
pub fn sample_tau(cfg: &TauConfig) -> Result<SurvivalCurve> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if cfg.t_grid.is_empty() {
        return Err(Error::InvalidParameter("t_grid must be nonempty".into()));
    }
    let params = LevelParams::new(cfg.n, cfg.alpha)?;
    let horizon = cfg.t_grid.iter().copied().fold(0.0f64, f64::max);
    let steps = steps_for_horizon(&params, cfg.start_level, horizon)?;
    let needed = cfg.start_level + steps + 2;
    let levels_beyond = needed.saturating_sub(params.k_n() + 1);
    let window = default_window(horizon, cfg.separation);

    let outcomes: Vec<Result<Option<f64>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            tau_trial(
                params,
                window,
                levels_beyond,
                cfg.start_level,
                cfg.separation,
                horizon,
                cfg.seed,
                trial,
            )
        })
        .collect();

    let mut taus = Vec::with_capacity(outcomes.len());
    let mut contaminated = 0u64;
    for o in outcomes {
        match o {
            Ok(v) => taus.push(v),
            Err(Error::BoundaryContamination) => contaminated += 1,
            Err(e) => return Err(e),
        }
    }
    let valid = taus.len() as u64;
    if valid == 0 {
        return Err(Error::DegenerateFit("all trials contaminated".into()));
    }
    let mut survival = Vec::with_capacity(cfg.t_grid.len());
    let mut stderr = Vec::with_capacity(cfg.t_grid.len());
    for &t in &cfg.t_grid {
        let alive = taus.iter().filter(|tau| tau.map_or(true, |v| v > t)).count();
        let p = alive as f64 / valid as f64;
        survival.push(p);
        stderr.push(stats::binomial_stderr(p, valid));
    }
    Ok(SurvivalCurve {
        t_grid: cfg.t_grid.clone(),
        survival,
        stderr,
        trials: valid,
        contamination_rate: contaminated as f64 / cfg.trials as f64,
    })
}

/// Fit C/√t behaviour on a window of the survival curve.
pub fn fit_tail(curve: &SurvivalCurve, window: (f64, f64)) -> Result<TailFit> {
    let pts: Vec<(f64, f64)> = curve
        .t_grid
        .iter()
        .zip(&curve.survival)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, p)| (*t, *p))
        .collect();
    if pts.is_empty() {
        return Err(Error::InvalidParameter("fit window misses the time grid".into()));
    }
    let positive: Vec<(f64, f64)> = pts.iter().copied().filter(|(_, p)| *p > 0.0).collect();
    if positive.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "only {} positive survival points in the window",
            positive.len()
        )));
    }
    let scaled: Vec<f64> = positive.iter().map(|(t, p)| t.sqrt() * p).collect();
    let c_hat = scaled.iter().copied().fold(0.0f64, f64::max);
    let plateau_ratio = c_hat / stats::median(&scaled);
    let logpts: Vec<(f64, f64)> = positive.iter().map(|(t, p)| (t.ln(), p.ln())).collect();
    let fit = stats::ols(&logpts);
    Ok(TailFit {
        c_hat,
        slope: fit.slope,
        slope_se: fit.slope_se,
        fit_window: window,
        plateau_ratio,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparationRow {
    pub separation: f64,
    pub survival: f64,
    pub stderr: f64,
    pub trials: u64,
    pub contamination_rate: f64,
}

/// Survival P[Z_t > 0] at a fixed time for each separation.
pub fn separation_scan(
    n: u64,
    alpha: f64,
    separations: &[f64],
    t_fixed: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<SeparationRow>> {
    let mut rows = Vec::with_capacity(separations.len());
    for (i, &d) in separations.iter().enumerate() {
        let cfg = TauConfig {
            n,
            alpha,
            separation: d,
            start_level: 0,
            t_grid: vec![t_fixed],
            trials,
            seed: seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9),
        };
        let curve = sample_tau(&cfg)?;
        rows.push(SeparationRow {
            separation: d,
            survival: curve.survival[0],
            stderr: curve.stderr[0],
            trials: curve.trials,
            contamination_rate: curve.contamination_rate,
        });
    }
    Ok(rows)
}

/// Transitions (z, Δz) of the difference process pooled over trials.
pub fn drift_transitions(
    n: u64,
    alpha: f64,
    start_level: u64,
    separation: f64,
    levels: u64,
    trials: u64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let params = LevelParams::new(n, alpha)?;
    let horizon = params.time_micro(start_level + levels) - params.time_micro(start_level);
    let window = default_window(horizon, separation);
    let needed = start_level + levels + 2;
    let levels_beyond = needed.saturating_sub(params.k_n() + 1);
    let traces: Vec<Result<Vec<(f64, f64)>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut sys = LevelSystem::new(params, window, levels_beyond, seed, trial)?;
            let trace = difference_process(&mut sys, start_level, 0.0, separation, levels)?;
            Ok(trace
                .z
                .windows(2)
                .filter(|w| w[0] > 0.0)
                .map(|w| (w[0], w[1] - w[0]))
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    let mut contaminated = 0u64;
    for t in traces {
        match t {
            Ok(mut v) => out.append(&mut v),
            Err(Error::BoundaryContamination) => contaminated += 1,
            Err(e) => return Err(e),
        }
    }
    let _ = contaminated;
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DriftBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    /// |mean| < 3·stderr for bins with enough samples.
    pub ok: bool,
}

/// Bin transitions by gap size and test the zero-drift (martingale)
/// property per bin.
pub fn binned_drift(transitions: &[(f64, f64)], bins: usize, min_samples: usize) -> Vec<DriftBin> {
    if transitions.is_empty() {
        return Vec::new();
    }
    let max_z = transitions.iter().map(|t| t.0).fold(0.0f64, f64::max);
    let edges: Vec<f64> = (0..=bins)
        .map(|i| (max_z + 1.0).powf(i as f64 / bins as f64) - 1.0 + 1e-9)
        .collect();
    let mut out = Vec::new();
    for w in edges.windows(2) {
        let in_bin: Vec<f64> = transitions
            .iter()
            .filter(|(z, _)| *z >= w[0] && *z < w[1])
            .map(|(_, dz)| *dz)
            .collect();
        if in_bin.is_empty() {
            continue;
        }
        let (mean, var) = if in_bin.len() > 1 {
            stats::mean_var(&in_bin)
        } else {
            (in_bin[0], 0.0)
        };
        let stderr = (var / in_bin.len() as f64).sqrt();
        let ok = in_bin.len() < min_samples || mean.abs() < 3.0 * stderr;
        out.push(DriftBin { lo: w[0], hi: w[1], count: in_bin.len(), mean, stderr, ok });
    }
    out
}
