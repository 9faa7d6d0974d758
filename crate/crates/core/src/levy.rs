//! The inverse-local-time view of the exit problem. Watching X only when B
//! visits zero turns (tau_l, X_{tau_l}) into a two-dimensional Levy process:
//! tau is a 1/2-stable subordinator and Y_l = X_{tau_l} a 1/(alpha+2)-stable
//! process. The exit level Theta = inf{ l : Y_l outside the window } obeys
//! T >= tau_{Theta-}, which this module checks pathwise on the grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exit::{first_exit_scan, Window};
use crate::kernel::{local_time_zero, BrownianStream, Kernel, PathSpec, SamplePath};
use crate::stats;

/// Discretized (level, tau, Y) triples from one path. Levels not attained
/// before the path horizon are omitted, so the trace may be shorter than the
/// requested grid, or empty when no local time accrues.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevyTrace {
    pub levels: Vec<f64>,
    pub tau: Vec<f64>,
    pub y: Vec<f64>,
}

impl LevyTrace {
    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }
}

fn validate_levels(level_grid: &[f64], dt: f64, band: f64) -> Result<()> {
    if !(band > 0.0) || !band.is_finite() {
        return Err(Error::InvalidParameter(format!("band must be positive, got {band}")));
    }
    if level_grid.is_empty() || level_grid[0] <= 0.0 {
        return Err(Error::InvalidParameter("level grid must be nonempty and positive".into()));
    }
    if !level_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter("level grid must be strictly increasing".into()));
    }
    // The local-time estimator moves in jumps of dt / (2 band); levels packed
    // tighter than one jump would share a tau and break strict monotonicity.
    let jump = dt / (2.0 * band);
    let min_gap = level_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(level_grid[0], f64::min);
    if min_gap <= jump {
        return Err(Error::InvalidParameter(format!(
            "level spacing {min_gap} must exceed the local-time increment {jump}"
        )));
    }
    Ok(())
}

/// Build the (level, tau, Y) trace of a materialized path:
/// tau_l is the first grid time where the banded local-time estimate exceeds
/// l, and Y_l the value of X there.
pub fn build_levy_trace(path: &SamplePath, level_grid: &[f64], band: f64) -> Result<LevyTrace> {
    validate_levels(level_grid, path.spec.dt, band)?;
    let lt = local_time_zero(&path.b_values, path.spec.dt, band);
    let mut trace =
        LevyTrace { levels: Vec::new(), tau: Vec::new(), y: Vec::new() };
    let mut next = 0usize;
    for k in 0..lt.len() {
        while next < level_grid.len() && lt[k] > level_grid[next] {
            trace.levels.push(level_grid[next]);
            trace.tau.push(path.times[k]);
            trace.y.push(path.x_values[k]);
            next += 1;
        }
        if next == level_grid.len() {
            break;
        }
    }
    Ok(trace)
}

/// Generate `n` independent paths from the origin and return their traces.
/// Streams each path and stops as soon as the last level is attained, which
/// is equivalent to materializing the full path and calling
/// `build_levy_trace` (the trace only ever extends at level crossings).
pub fn sample_levy_traces(
    kernel: &Kernel,
    spec: &PathSpec,
    level_grid: &[f64],
    band: f64,
    n: u64,
) -> Result<Vec<LevyTrace>> {
    spec.validate()?;
    validate_levels(level_grid, spec.dt, band)?;
    let base = spec.replicate_id;
    Ok((0..n)
        .into_par_iter()
        .map(|r| stream_levy_trace(kernel, &spec.with_replicate(base + r), level_grid, band))
        .collect())
}

fn stream_levy_trace(
    kernel: &Kernel,
    spec: &PathSpec,
    level_grid: &[f64],
    band: f64,
) -> LevyTrace {
    let dt = spec.dt;
    let lt_scale = dt / (2.0 * band);
    let mut stream = BrownianStream::new(spec, 0.0);
    let mut b = 0.0f64;
    let mut v_prev = kernel.eval(b);
    let mut x = 0.0f64;
    let mut in_band = 1u64; // |B_0| = 0 < band
    let mut next = 0usize;
    let mut trace = LevyTrace { levels: Vec::new(), tau: Vec::new(), y: Vec::new() };

    // Grid point k = 0.
    while next < level_grid.len() && in_band as f64 * lt_scale > level_grid[next] {
        trace.levels.push(level_grid[next]);
        trace.tau.push(0.0);
        trace.y.push(x);
        next += 1;
    }
    for k in 1..=spec.n_steps() {
        if next == level_grid.len() {
            break;
        }
        b = stream.step();
        let v = kernel.eval(b);
        x += 0.5 * dt * (v_prev + v);
        v_prev = v;
        if b.abs() < band {
            in_band += 1;
        }
        let lt = in_band as f64 * lt_scale;
        while next < level_grid.len() && lt > level_grid[next] {
            trace.levels.push(level_grid[next]);
            trace.tau.push(k as f64 * dt);
            trace.y.push(x);
            next += 1;
        }
    }
    trace
}

/// Per-level summary across an ensemble of traces.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: f64,
    pub attained: u64,
    pub total: u64,
    /// Median of tau_l treating unattained levels as right-censored; None
    /// when fewer than half the paths attain the level.
    pub tau_median: Option<f64>,
    /// Median of |Y_l| over the attaining paths.
    pub y_abs_median: Option<f64>,
}

/// Self-similarity diagnostics of the time-changed pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub per_level: Vec<LevelStats>,
    /// Fitted log-median slope of tau against level; 2 for a 1/2-stable
    /// subordinator.
    pub tau_slope: Option<f64>,
    /// Fitted log-median slope of |Y| against level; alpha + 2 for the
    /// 1/(alpha+2)-stable time-changed process.
    pub y_slope: Option<f64>,
    /// Two-sample KS p-value between level-rescaled Y samples at the first
    /// and last admissible levels.
    pub ks_p: Option<f64>,
    pub ks_levels: Option<(f64, f64)>,
    pub sufficient: bool,
}

/// Median with right-censoring: values beyond the observation window are
/// only known to exceed it. Defined when more than half the sample is
/// observed.
fn censored_median(mut observed: Vec<f64>, total: usize) -> Option<f64> {
    let idx = total / 2;
    if observed.len() <= idx {
        return None;
    }
    observed.sort_unstable_by(|a, b| a.total_cmp(b));
    Some(observed[idx])
}

/// Check the stability indices of the time change: tau_l should scale like
/// l^2 and Y_l like l^(alpha+2) in law. Slopes are fitted to log-medians
/// over the level grid; the KS check compares l^-(alpha+2)-rescaled Y
/// samples across the extreme levels.
pub fn stability_checks(
    traces: &[LevyTrace],
    alpha: f64,
    level_grid: &[f64],
) -> StabilityReport {
    let total = traces.len() as u64;
    let mut per_level = Vec::with_capacity(level_grid.len());
    let mut tau_pts = Vec::new();
    let mut y_pts = Vec::new();
    let mut scaled_samples: Vec<(f64, Vec<f64>)> = Vec::new();

    for (i, &level) in level_grid.iter().enumerate() {
        let mut taus = Vec::new();
        let mut ys = Vec::new();
        for tr in traces {
            if tr.len() > i {
                debug_assert_eq!(tr.levels[i], level, "traces must share the level grid");
                taus.push(tr.tau[i]);
                ys.push(tr.y[i]);
            }
        }
        let attained = taus.len() as u64;
        let tau_median = censored_median(taus, traces.len());
        let y_abs_median = if ys.is_empty() {
            None
        } else {
            Some(stats::median(&ys.iter().map(|v| v.abs()).collect::<Vec<_>>()))
        };
        if let Some(m) = tau_median {
            if m > 0.0 {
                tau_pts.push((level.ln(), m.ln()));
            }
        }
        if let Some(m) = y_abs_median {
            if m > 0.0 {
                y_pts.push((level.ln(), m.ln()));
            }
        }
        if attained >= 10 {
            let scale = level.powf(-(alpha + 2.0));
            scaled_samples.push((level, ys.iter().map(|v| v * scale).collect()));
        }
        per_level.push(LevelStats { level, attained, total, tau_median, y_abs_median });
    }

    let tau_slope = stats::linear_fit(&tau_pts).map(|f| f.slope);
    let y_slope = stats::linear_fit(&y_pts).map(|f| f.slope);
    let (ks_p, ks_levels) = if scaled_samples.len() >= 2 {
        let first = &scaled_samples[0];
        let last = &scaled_samples[scaled_samples.len() - 1];
        let ks = stats::ks_two_sample(&first.1, &last.1);
        (Some(ks.p_value), Some((first.0, last.0)))
    } else {
        (None, None)
    };
    let sufficient = tau_slope.is_some() && y_slope.is_some() && ks_p.is_some();
    StabilityReport { per_level, tau_slope, y_slope, ks_p, ks_levels, sufficient }
}

/// Sign frequency of the time-changed process at one level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LevelPositivity {
    pub level: f64,
    pub n: u64,
    pub positives: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Estimate of P[Y > 0], the asymmetry of the time-changed stable process.
/// Level-independent in law by self-similarity, so per-level estimates are
/// reported alongside the pooled one, with a mutual-consistency statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityReport {
    pub per_level: Vec<LevelPositivity>,
    pub pooled_p: f64,
    pub pooled_ci: (f64, f64),
    /// Largest pairwise |p_i - p_j| in units of its standard error.
    pub max_gap_sigma: f64,
    /// True when every pairwise gap stays below 3 standard errors.
    pub consistent: bool,
}

pub fn positivity_estimate(
    traces: &[LevyTrace],
    level_grid: &[f64],
    ci_level: f64,
) -> Result<PositivityReport> {
    let z = stats::z_for_level(ci_level);
    let mut per_level = Vec::new();
    let (mut pooled_pos, mut pooled_n) = (0u64, 0u64);
    for (i, &level) in level_grid.iter().enumerate() {
        let (mut n, mut positives) = (0u64, 0u64);
        for tr in traces {
            if tr.len() > i {
                n += 1;
                positives += (tr.y[i] > 0.0) as u64;
            }
        }
        if n == 0 {
            continue;
        }
        let (ci_low, ci_high) = stats::wilson_interval(positives, n, z);
        per_level.push(LevelPositivity {
            level,
            n,
            positives,
            p_hat: positives as f64 / n as f64,
            ci_low,
            ci_high,
        });
        pooled_pos += positives;
        pooled_n += n;
    }
    if pooled_n == 0 {
        return Err(Error::InsufficientData(
            "no trace attained any level; positivity undefined".into(),
        ));
    }
    let pooled_p = pooled_pos as f64 / pooled_n as f64;
    let pooled_ci = stats::wilson_interval(pooled_pos, pooled_n, z);

    let mut max_gap_sigma = 0.0f64;
    for i in 0..per_level.len() {
        for j in i + 1..per_level.len() {
            let (a, b) = (&per_level[i], &per_level[j]);
            let var = a.p_hat * (1.0 - a.p_hat) / a.n as f64
                + b.p_hat * (1.0 - b.p_hat) / b.n as f64;
            if var > 0.0 {
                max_gap_sigma = max_gap_sigma.max((a.p_hat - b.p_hat).abs() / var.sqrt());
            }
        }
    }
    Ok(PositivityReport {
        per_level,
        pooled_p,
        pooled_ci,
        max_gap_sigma,
        consistent: max_gap_sigma < 3.0,
    })
}

/// Pathwise verdict of the exit-level inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeyInequality {
    Holds,
    Fails,
    /// The trace never left the window before the horizon, so the left limit
    /// tau_{Theta-} has no grid stand-in.
    Unresolved,
}

/// Evidence backing one verdict.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KeyInequalityOutcome {
    pub verdict: KeyInequality,
    /// Interpolated exit time of X, when it exits before the horizon.
    pub exit_time: Option<f64>,
    /// First trace level with Y outside the window.
    pub theta_level: Option<f64>,
    /// tau at the last in-window trace point strictly before theta: the grid
    /// stand-in for the left limit tau_{Theta-}. Zero when theta is the very
    /// first level. Sits below the true left limit, which is the conservative
    /// direction for the inequality.
    pub tau_before: Option<f64>,
}

/// Check T >= tau_{Theta-} on one path. The trace is built on an arithmetic
/// level grid of the given step; a censored T counts as larger than any tau
/// on the path, so the verdict is still determined whenever Theta resolves.
pub fn key_inequality_check(
    path: &SamplePath,
    window: &Window,
    band: f64,
    level_step: f64,
) -> Result<KeyInequalityOutcome> {
    if !(level_step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "level step must be positive, got {level_step}"
        )));
    }
    let jump = path.spec.dt / (2.0 * band);
    if level_step <= jump {
        return Err(Error::InvalidParameter(format!(
            "level step {level_step} must exceed the local-time increment {jump}"
        )));
    }

    let exit =
        first_exit_scan(&path.x_values, &path.b_values, path.spec.dt, window).map(|(t, _, _)| t);

    let lt = local_time_zero(&path.b_values, path.spec.dt, band);
    let mut next_level = level_step;
    let mut tau_prev: Option<f64> = None;
    let mut theta: Option<(f64, f64)> = None; // (level, tau at theta)
    'outer: for k in 0..lt.len() {
        while lt[k] > next_level {
            if !window.contains(path.x_values[k]) {
                theta = Some((next_level, path.times[k]));
                break 'outer;
            }
            tau_prev = Some(path.times[k]);
            next_level += level_step;
        }
    }

    let Some((theta_level, _)) = theta else {
        return Ok(KeyInequalityOutcome {
            verdict: KeyInequality::Unresolved,
            exit_time: exit,
            theta_level: None,
            tau_before: None,
        });
    };
    let tau_before = tau_prev.unwrap_or(0.0);
    let t_val = exit.unwrap_or(f64::INFINITY);
    let verdict = if t_val >= tau_before { KeyInequality::Holds } else { KeyInequality::Fails };
    Ok(KeyInequalityOutcome {
        verdict,
        exit_time: exit,
        theta_level: Some(theta_level),
        tau_before: Some(tau_before),
    })
}
