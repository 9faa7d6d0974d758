//! Turning exit records into survival curves and tail-rate fits, small-ball
//! probability estimation with its exact exit-time cross-check, and the
//! structural inequality checks (sup-over-starts submultiplicativity,
//! origin dominance in the Gaussian symmetric case, log-concavity probe).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exit::{sample_exit, ExitRecord, StartState, Window};
use crate::kernel::{BrownianStream, Kernel, PathSpec};
use crate::stats;

/// Empirical tail of the exit time on a fixed grid, with Wilson bands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub t_grid: Vec<f64>,
    pub survivors: Vec<u64>,
    pub n: u64,
    pub p_hat: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Records still alive at the generating horizon.
    pub censored_beyond: u64,
    pub ci_level: f64,
}

/// Count survivors past each grid point. All records must come from runs
/// with the common `horizon`, and the grid may not extend beyond it:
/// censoring would silently corrupt the tail there.
pub fn build_survival_curve(
    records: &[ExitRecord],
    t_grid: &[f64],
    horizon: f64,
    ci_level: f64,
) -> Result<SurvivalCurve> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no exit records".into()));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if !t_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    if t_grid[0] < 0.0 || *t_grid.last().unwrap() > horizon {
        return Err(Error::InvalidParameter(format!(
            "time grid must lie within [0, horizon={horizon}]"
        )));
    }
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::InvalidParameter(format!("ci_level must be in (0,1), got {ci_level}")));
    }
    let mut censored_beyond = 0u64;
    for rec in records {
        if let ExitRecord::Censored { horizon: h } = rec {
            if *h != horizon {
                return Err(Error::InvalidParameter(format!(
                    "record censored at {h} does not match the declared horizon {horizon}"
                )));
            }
            censored_beyond += 1;
        }
    }

    let n = records.len() as u64;
    let z = stats::z_for_level(ci_level);
    let mut survivors = Vec::with_capacity(t_grid.len());
    let mut p_hat = Vec::with_capacity(t_grid.len());
    let mut ci_low = Vec::with_capacity(t_grid.len());
    let mut ci_high = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let s = records.iter().filter(|r| r.survives_past(t)).count() as u64;
        let (lo, hi) = stats::wilson_interval(s, n, z);
        survivors.push(s);
        p_hat.push(s as f64 / n as f64);
        ci_low.push(lo);
        ci_high.push(hi);
    }

    Ok(SurvivalCurve {
        t_grid: t_grid.to_vec(),
        survivors,
        n,
        p_hat,
        ci_low,
        ci_high,
        censored_beyond,
        ci_level,
    })
}

/// Controls for the tail fit. The defaults implement the automatic window:
/// keep grid points with at least `min_survivors` survivors and with the
/// censored count below `max_censored_ratio` of the survivors there, so the
/// censored mass cannot distort the fitted tail.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitOptions {
    pub min_survivors: u64,
    pub max_censored_ratio: f64,
    /// Optional explicit (t_min, t_max) restriction on top of admissibility.
    pub window: Option<(f64, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { min_survivors: 50, max_censored_ratio: 1e-3, window: None }
    }
}

/// Fitted exponential tail rate of P[T > t].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateFit {
    /// Estimated decay rate (minus the slope of log p against t).
    pub k_hat: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub fit_window: (f64, f64),
    pub n_points: usize,
}

/// Weighted least squares of log p_hat against t over the admissible window;
/// weights come from the delta-method variance of log p_hat.
pub fn estimate_rate(curve: &SurvivalCurve, opts: &FitOptions) -> Result<RateFit> {
    let mut points = Vec::new();
    let mut window = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..curve.t_grid.len() {
        let t = curve.t_grid[i];
        let s = curve.survivors[i];
        if s < opts.min_survivors {
            continue;
        }
        if curve.censored_beyond as f64 >= opts.max_censored_ratio * s as f64 {
            continue;
        }
        if let Some((lo, hi)) = opts.window {
            if t < lo || t > hi {
                continue;
            }
        }
        let p = s as f64 / curve.n as f64;
        if p <= 0.0 {
            continue;
        }
        let w = 1.0 / stats::log_proportion_variance(s, curve.n);
        points.push((t, p.ln(), w));
        window.0 = window.0.min(t);
        window.1 = window.1.max(t);
    }
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} admissible grid points; the tail fit needs at least 4",
            points.len()
        )));
    }
    let fit = stats::weighted_linear_fit(&points)
        .ok_or_else(|| Error::InsufficientData("degenerate abscissae in tail fit".into()))?;
    let k_hat = -fit.slope;
    if !(k_hat > 0.0) {
        return Err(Error::Domain(format!(
            "fitted rate is nonpositive ({k_hat}); the tail is not decaying on this window"
        )));
    }
    Ok(RateFit {
        k_hat,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        fit_window: window,
        n_points: points.len(),
    })
}

/// One abscissa of the small-ball fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SmallBallPoint {
    pub eps: f64,
    /// eps^(-2/(alpha+2)); on this axis the log-probability is asymptotically
    /// linear, mirroring the exit-time tail.
    pub abscissa: f64,
    pub successes: u64,
    pub q_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Regression of log q(eps) on eps^(-2/(alpha+2)).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallBallFit {
    /// Estimated decay rate (minus the fitted slope).
    pub k_prime: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: u64,
    pub points: Vec<SmallBallPoint>,
    /// Epsilons dropped because no replicate stayed inside the band.
    pub dropped: Vec<f64>,
}

/// Supremum of |X| over the unit-horizon grid, from the origin.
fn sup_abs_functional(kernel: &Kernel, spec: &PathSpec) -> f64 {
    let dt = spec.dt;
    let mut stream = BrownianStream::new(spec, 0.0);
    let mut v_prev = kernel.eval(0.0);
    let mut x = 0.0f64;
    let mut sup = 0.0f64;
    for _ in 0..spec.n_steps() {
        let b = stream.step();
        let v = kernel.eval(b);
        x += 0.5 * dt * (v_prev + v);
        v_prev = v;
        let a = x.abs();
        if a > sup {
            sup = a;
        }
    }
    sup
}

/// Estimate q(eps) = P[ sup_[0,1] |X| < eps ] for a decreasing list of
/// epsilons on one common set of `n` paths (the events are nested, so the
/// estimates are monotone by construction), then fit
/// log q(eps) ~ intercept - k_prime * eps^(-2/(alpha+2)).
///
/// The spec's horizon must be exactly 1: the supremum norm is over [0, 1].
pub fn small_ball_fit(
    kernel: &Kernel,
    eps_list: &[f64],
    n: u64,
    spec: &PathSpec,
    ci_level: f64,
) -> Result<SmallBallFit> {
    spec.validate()?;
    if spec.horizon != 1.0 {
        return Err(Error::InvalidParameter(format!(
            "small-ball sampling runs on [0,1]; got horizon {}",
            spec.horizon
        )));
    }
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParameter("eps list must be nonempty and positive".into()));
    }
    if !eps_list.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("eps list must be strictly decreasing".into()));
    }
    if n == 0 {
        return Err(Error::InsufficientData("small-ball estimate needs n > 0".into()));
    }

    let base = spec.replicate_id;
    let sups: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|r| sup_abs_functional(kernel, &spec.with_replicate(base + r)))
        .collect();

    let z = stats::z_for_level(ci_level);
    let exponent = -2.0 / (kernel.alpha() + 2.0);
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    let mut fit_pts = Vec::new();
    for &eps in eps_list {
        let successes = sups.iter().filter(|&&s| s < eps).count() as u64;
        if successes == 0 {
            dropped.push(eps);
            continue;
        }
        let q_hat = successes as f64 / n as f64;
        let (ci_low, ci_high) = stats::wilson_interval(successes, n, z);
        let abscissa = eps.powf(exponent);
        points.push(SmallBallPoint { eps, abscissa, successes, q_hat, ci_low, ci_high });
        let w = 1.0 / stats::log_proportion_variance(successes, n);
        fit_pts.push((abscissa, q_hat.ln(), w));
    }
    if fit_pts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} usable epsilons after dropping empty estimates",
            fit_pts.len()
        )));
    }
    let fit = stats::weighted_linear_fit(&fit_pts)
        .ok_or_else(|| Error::InsufficientData("degenerate abscissae in small-ball fit".into()))?;
    Ok(SmallBallFit {
        k_prime: -fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        n,
        points,
        dropped,
    })
}

/// Survival count P_(start)[T > t] * n from `n` independent replicates with
/// replicate ids `base..base + n`.
fn survival_count(
    kernel: &Kernel,
    window: &Window,
    start: &StartState,
    t: f64,
    n: u64,
    spec: &PathSpec,
    base: u64,
) -> u64 {
    (0..n)
        .into_par_iter()
        .map(|r| {
            let rec = sample_exit(kernel, window, start, &spec.with_replicate(base + r))
                .expect("spec validated");
            rec.survives_past(t) as u64
        })
        .sum()
}

/// Monte Carlo estimate of the survival probability from one start state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StartEstimate {
    pub start: StartState,
    pub successes: u64,
    pub n: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl StartEstimate {
    /// Binomial variance of the estimate.
    pub fn variance(&self) -> f64 {
        self.p_hat * (1.0 - self.p_hat) / self.n as f64
    }
}

/// Estimates of P_(x,y)[T > t] over a start grid, with the maximizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiSupEstimate {
    pub t: f64,
    pub estimates: Vec<StartEstimate>,
    /// Index of the largest estimate (first one in case of ties).
    pub best: usize,
}

impl PhiSupEstimate {
    pub fn best_estimate(&self) -> &StartEstimate {
        &self.estimates[self.best]
    }
}

/// Estimate the sup-over-starts survival function
/// phi(t) = sup P_(x,y)[T > t] on a finite start grid. The true supremum
/// runs over all of R x (-a,b), but the maximizer's B-coordinate can be
/// confined to a compact box (starting B far from zero ramps |X| across the
/// window almost immediately), so a grid truncated at
/// K = 2 max(1, lambda^(-1/alpha)) (a+b)^(1/alpha) captures it.
pub fn phi_sup_estimate(
    kernel: &Kernel,
    window: &Window,
    start_grid: &[StartState],
    t: f64,
    n_per_start: u64,
    spec: &PathSpec,
    ci_level: f64,
) -> Result<PhiSupEstimate> {
    spec.validate()?;
    if start_grid.is_empty() {
        return Err(Error::InvalidParameter("start grid is empty".into()));
    }
    if let Some(bad) = start_grid.iter().find(|s| !window.contains(s.y)) {
        return Err(Error::InvalidParameter(format!(
            "start y={} lies outside the window (-{}, {})",
            bad.y,
            window.a(),
            window.b()
        )));
    }
    if t > spec.horizon {
        return Err(Error::InvalidParameter(format!(
            "t={t} exceeds the simulation horizon {}",
            spec.horizon
        )));
    }
    if n_per_start == 0 {
        return Err(Error::InsufficientData("phi estimate needs n per start > 0".into()));
    }

    let z = stats::z_for_level(ci_level);
    let base = spec.replicate_id;
    let estimates: Vec<StartEstimate> = start_grid
        .iter()
        .enumerate()
        .map(|(i, start)| {
            let successes = survival_count(
                kernel,
                window,
                start,
                t,
                n_per_start,
                spec,
                base + i as u64 * n_per_start,
            );
            let (ci_low, ci_high) = stats::wilson_interval(successes, n_per_start, z);
            StartEstimate {
                start: *start,
                successes,
                n: n_per_start,
                p_hat: successes as f64 / n_per_start as f64,
                ci_low,
                ci_high,
            }
        })
        .collect();

    let best = estimates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.p_hat.total_cmp(&b.1.p_hat).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    Ok(PhiSupEstimate { t, estimates, best })
}

/// Default B-coordinate truncation for phi grids.
pub fn phi_truncation_radius(kernel: &Kernel, window: &Window) -> f64 {
    2.0 * 1.0f64.max(kernel.lambda().powf(-1.0 / kernel.alpha()))
        * window.width().powf(1.0 / kernel.alpha())
}

/// Verdict of the submultiplicativity check
/// phi(s + t) <= phi(s) phi(t) + 3 sigma.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmultReport {
    pub s: f64,
    pub t: f64,
    pub phi_s: StartEstimate,
    pub phi_t: StartEstimate,
    pub phi_st: StartEstimate,
    /// phi(s) * phi(t).
    pub product: f64,
    /// Propagated standard error of phi(s+t) - phi(s) phi(t).
    pub sigma: f64,
    pub holds: bool,
}

/// Check submultiplicativity of the sup-over-starts survival function at
/// (s, t) with three independent estimates. The inequality is exact for the
/// true phi (conditioning at time s cannot beat restarting at the best
/// state), so a 3-sigma violation flags a bug.
#[allow(clippy::too_many_arguments)]
pub fn submultiplicativity_check(
    kernel: &Kernel,
    window: &Window,
    start_grid: &[StartState],
    s: f64,
    t: f64,
    n_per_start: u64,
    spec: &PathSpec,
    ci_level: f64,
) -> Result<SubmultReport> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::InvalidParameter(format!("need s, t > 0, got s={s}, t={t}")));
    }
    if s + t > spec.horizon {
        return Err(Error::InvalidParameter(format!(
            "s + t = {} exceeds the horizon {}",
            s + t,
            spec.horizon
        )));
    }
    let block = start_grid.len() as u64 * n_per_start;
    let phi = |deadline: f64, offset: u64| -> Result<PhiSupEstimate> {
        phi_sup_estimate(
            kernel,
            window,
            start_grid,
            deadline,
            n_per_start,
            &spec.with_replicate(spec.replicate_id + offset),
            ci_level,
        )
    };
    let phi_s = *phi(s, 0)?.best_estimate();
    let phi_t = *phi(t, block)?.best_estimate();
    let phi_st = *phi(s + t, 2 * block)?.best_estimate();

    let product = phi_s.p_hat * phi_t.p_hat;
    let var_product = phi_t.p_hat * phi_t.p_hat * phi_s.variance()
        + phi_s.p_hat * phi_s.p_hat * phi_t.variance()
        + phi_s.variance() * phi_t.variance();
    let sigma = (phi_st.variance() + var_product).sqrt();
    let holds = phi_st.p_hat <= product + 3.0 * sigma;
    Ok(SubmultReport { s, t, phi_s, phi_t, phi_st, product, sigma, holds })
}

/// One start of the origin-dominance check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DominanceCheck {
    pub estimate: StartEstimate,
    /// p_hat(start) - p_hat(origin); dominance means <= 3 sigma.
    pub excess: f64,
    pub sigma: f64,
    pub dominated: bool,
}

/// Origin-dominance report in the Gaussian symmetric case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AndersonReport {
    pub t: f64,
    pub origin: StartEstimate,
    pub checks: Vec<DominanceCheck>,
    pub all_dominated: bool,
}

/// In the Gaussian case alpha = lambda = 1 with a symmetric window, shifting
/// the start away from the origin can only lower the survival probability
/// (a convex-symmetric-body shift inequality for Gaussian measures). Verify
/// P_(x,y)[T > t] <= P_(0,0)[T > t] + 3 sigma for each listed start. The
/// argument is Gaussian-only, so other kernels or asymmetric windows are
/// rejected.
#[allow(clippy::too_many_arguments)]
pub fn anderson_check(
    kernel: &Kernel,
    window: &Window,
    starts: &[StartState],
    t: f64,
    n_per_start: u64,
    spec: &PathSpec,
    ci_level: f64,
) -> Result<AndersonReport> {
    if kernel.alpha() != 1.0 || kernel.lambda() != 1.0 {
        return Err(Error::Domain(format!(
            "origin dominance requires alpha = lambda = 1, got alpha={}, lambda={}",
            kernel.alpha(),
            kernel.lambda()
        )));
    }
    if window.a() != window.b() {
        return Err(Error::Domain(format!(
            "origin dominance requires a symmetric window, got a={}, b={}",
            window.a(),
            window.b()
        )));
    }
    if starts.is_empty() {
        return Err(Error::InvalidParameter("no start states to check".into()));
    }
    let origin_grid = [StartState::origin()];
    let origin = *phi_sup_estimate(kernel, window, &origin_grid, t, n_per_start, spec, ci_level)?
        .best_estimate();
    let others = phi_sup_estimate(
        kernel,
        window,
        starts,
        t,
        n_per_start,
        &spec.with_replicate(spec.replicate_id + n_per_start),
        ci_level,
    )?;

    let checks: Vec<DominanceCheck> = others
        .estimates
        .iter()
        .map(|est| {
            let sigma = (est.variance() + origin.variance()).sqrt();
            let excess = est.p_hat - origin.p_hat;
            DominanceCheck { estimate: *est, excess, sigma, dominated: excess <= 3.0 * sigma }
        })
        .collect();
    let all_dominated = checks.iter().all(|c| c.dominated);
    Ok(AndersonReport { t, origin, checks, all_dominated })
}

/// One midpoint-concavity triple.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TripleCheck {
    pub p: StartEstimate,
    pub mid: StartEstimate,
    pub q: StartEstimate,
    /// log p_mid - (log p_p + log p_q) / 2; concavity means >= -3 sigma.
    pub margin: f64,
    pub sigma: f64,
    /// None when a zero estimate made the logs undefined.
    pub holds: Option<bool>,
}

/// Midpoint log-concavity probe over start-state triples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogConcavityReport {
    pub t: f64,
    pub checks: Vec<TripleCheck>,
    pub violations: usize,
    /// True only for alpha = lambda = 1, where log-concavity of the survival
    /// probability in the start is known; elsewhere the probe is exploratory
    /// and `verdict` stays None.
    pub asserted: bool,
    pub verdict: Option<bool>,
}

/// For each pair (p, q), estimate survival from p, q and their midpoint and
/// check log p_mid >= (log p_p + log p_q)/2 - 3 sigma.
#[allow(clippy::too_many_arguments)]
pub fn logconcavity_probe(
    kernel: &Kernel,
    window: &Window,
    pairs: &[(StartState, StartState)],
    t: f64,
    n_per_start: u64,
    spec: &PathSpec,
    ci_level: f64,
) -> Result<LogConcavityReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no start pairs to probe".into()));
    }
    let asserted = kernel.alpha() == 1.0 && kernel.lambda() == 1.0;
    let mut checks = Vec::with_capacity(pairs.len());
    let mut violations = 0usize;
    for (i, (p, q)) in pairs.iter().enumerate() {
        let mid = StartState::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0);
        let grid = [*p, mid, *q];
        let est = phi_sup_estimate(
            kernel,
            window,
            &grid,
            t,
            n_per_start,
            &spec.with_replicate(spec.replicate_id + 3 * i as u64 * n_per_start),
            ci_level,
        )?;
        let [ep, em, eq] = [est.estimates[0], est.estimates[1], est.estimates[2]];
        let check = if ep.successes == 0 || em.successes == 0 || eq.successes == 0 {
            TripleCheck { p: ep, mid: em, q: eq, margin: f64::NAN, sigma: f64::NAN, holds: None }
        } else {
            let margin = em.p_hat.ln() - 0.5 * (ep.p_hat.ln() + eq.p_hat.ln());
            let sigma = (stats::log_proportion_variance(em.successes, em.n)
                + 0.25 * stats::log_proportion_variance(ep.successes, ep.n)
                + 0.25 * stats::log_proportion_variance(eq.successes, eq.n))
            .sqrt();
            let holds = margin >= -3.0 * sigma;
            if !holds {
                violations += 1;
            }
            TripleCheck { p: ep, mid: em, q: eq, margin, sigma, holds: Some(holds) }
        };
        checks.push(check);
    }
    let verdict = asserted.then(|| violations == 0);
    Ok(LogConcavityReport { t, checks, violations, asserted, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exited(t: f64) -> ExitRecord {
        ExitRecord::Exited { time: t, side: crate::exit::ExitSide::Upper, b_at_exit: 0.0 }
    }

    #[test]
    fn survival_curve_trivial_cases() {
        let grid = [0.5, 1.0, 2.0];
        let all_zero: Vec<ExitRecord> = (0..100).map(|_| exited(0.0)).collect();
        let c = build_survival_curve(&all_zero, &grid, 5.0, 0.95).unwrap();
        assert!(c.p_hat.iter().all(|&p| p == 0.0));
        assert_eq!(c.censored_beyond, 0);

        let all_censored: Vec<ExitRecord> =
            (0..100).map(|_| ExitRecord::Censored { horizon: 5.0 }).collect();
        let c = build_survival_curve(&all_censored, &grid, 5.0, 0.95).unwrap();
        assert!(c.p_hat.iter().all(|&p| p == 1.0));
        assert_eq!(c.censored_beyond, 100);
    }

    #[test]
    fn survival_curve_is_monotone_and_bracketed() {
        let recs: Vec<ExitRecord> = (0..1000).map(|i| exited(i as f64 * 0.01)).collect();
        let grid: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        let c = build_survival_curve(&recs, &grid, 10.0, 0.9).unwrap();
        for i in 1..c.p_hat.len() {
            assert!(c.p_hat[i] <= c.p_hat[i - 1]);
        }
        for i in 0..c.p_hat.len() {
            assert!(c.ci_low[i] <= c.p_hat[i] && c.p_hat[i] <= c.ci_high[i]);
            assert!(c.survivors[i] <= c.n);
        }
    }

    #[test]
    fn survival_curve_rejects_grid_past_horizon() {
        let recs = vec![exited(1.0)];
        assert!(build_survival_curve(&recs, &[0.5, 6.0], 5.0, 0.95).is_err());
        assert!(build_survival_curve(&recs, &[2.0, 1.0], 5.0, 0.95).is_err());
        assert!(build_survival_curve(&[], &[1.0], 5.0, 0.95).is_err());
    }

    #[test]
    fn survival_curve_is_permutation_invariant() {
        let mut recs: Vec<ExitRecord> = (0..500)
            .map(|i| {
                if i % 7 == 0 {
                    ExitRecord::Censored { horizon: 4.0 }
                } else {
                    exited((i % 40) as f64 * 0.1)
                }
            })
            .collect();
        let grid = [0.5, 1.5, 3.0];
        let c1 = build_survival_curve(&recs, &grid, 4.0, 0.95).unwrap();
        recs.reverse();
        recs.swap(0, 250);
        let c2 = build_survival_curve(&recs, &grid, 4.0, 0.95).unwrap();
        assert_eq!(c1.survivors, c2.survivors);
        assert_eq!(c1.p_hat, c2.p_hat);
    }

    #[test]
    fn rate_fit_recovers_exact_exponential_tail() {
        // Deterministic records matching an exact Exponential(2) tail:
        // quantile spacing reproduces survivors = n * exp(-2 t) precisely.
        let n = 200_000u64;
        let rate = 2.0;
        let recs: Vec<ExitRecord> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                exited(-u.ln() / rate)
            })
            .collect();
        let grid: Vec<f64> = (1..=10).map(|i| 0.3 * i as f64).collect();
        let curve = build_survival_curve(&recs, &grid, 10.0, 0.95).unwrap();
        let fit = estimate_rate(&curve, &FitOptions::default()).unwrap();
        assert!(
            (fit.k_hat - rate).abs() < 0.01,
            "k_hat = {} should be close to {rate}",
            fit.k_hat
        );
        assert!(fit.r_squared > 0.9999, "r^2 = {}", fit.r_squared);
    }

    #[test]
    fn rate_fit_requires_enough_points() {
        let recs: Vec<ExitRecord> = (0..100).map(|i| exited(0.01 * i as f64)).collect();
        let curve = build_survival_curve(&recs, &[0.2, 0.4], 2.0, 0.95).unwrap();
        assert!(matches!(
            estimate_rate(&curve, &FitOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn rate_fit_rejects_flat_tail() {
        let recs: Vec<ExitRecord> =
            (0..1000).map(|_| ExitRecord::Censored { horizon: 10.0 }).collect();
        let curve =
            build_survival_curve(&recs, &[1.0, 2.0, 3.0, 4.0, 5.0], 10.0, 0.95).unwrap();
        // All censored: the censoring guard empties the window.
        assert!(estimate_rate(&curve, &FitOptions::default()).is_err());
    }

    #[test]
    fn small_ball_estimates_are_nested() {
        let kernel = Kernel::new(1.0, 1.0).unwrap();
        let spec = PathSpec::new(1e-2, 1.0, 7, 0).unwrap();
        let fit = small_ball_fit(&kernel, &[0.9, 0.6, 0.4], 2000, &spec, 0.95).unwrap();
        for w in fit.points.windows(2) {
            assert!(
                w[1].q_hat <= w[0].q_hat,
                "shared-sample estimates must be monotone in eps"
            );
        }
        assert!(fit.k_prime > 0.0);
    }

    #[test]
    fn small_ball_rejects_bad_inputs() {
        let kernel = Kernel::new(1.0, 1.0).unwrap();
        let unit = PathSpec::new(1e-2, 1.0, 7, 0).unwrap();
        let long = PathSpec::new(1e-2, 2.0, 7, 0).unwrap();
        assert!(small_ball_fit(&kernel, &[0.5, 0.7], 100, &unit, 0.95).is_err());
        assert!(small_ball_fit(&kernel, &[0.7, 0.5], 100, &long, 0.95).is_err());
        assert!(small_ball_fit(&kernel, &[], 100, &unit, 0.95).is_err());
    }

    #[test]
    fn phi_sup_single_point_grid() {
        let kernel = Kernel::new(1.0, 1.0).unwrap();
        let window = Window::symmetric(1.0).unwrap();
        let spec = PathSpec::new(1e-2, 3.0, 5, 0).unwrap();
        let grid = [StartState::origin()];
        let est = phi_sup_estimate(&kernel, &window, &grid, 2.0, 500, &spec, 0.95).unwrap();
        assert_eq!(est.estimates.len(), 1);
        assert_eq!(est.best, 0);
        let e = est.best_estimate();
        assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
    }

    #[test]
    fn phi_sup_rejects_start_outside_window() {
        let kernel = Kernel::new(1.0, 1.0).unwrap();
        let window = Window::symmetric(1.0).unwrap();
        let spec = PathSpec::new(1e-2, 3.0, 5, 0).unwrap();
        let grid = [StartState::new(0.0, 1.5)];
        assert!(phi_sup_estimate(&kernel, &window, &grid, 2.0, 10, &spec, 0.95).is_err());
    }

    #[test]
    fn anderson_rejects_non_gaussian_configs() {
        let window = Window::symmetric(1.0).unwrap();
        let spec = PathSpec::new(1e-2, 3.0, 5, 0).unwrap();
        let starts = [StartState::new(1.0, 0.0)];
        let k2 = Kernel::new(2.0, 1.0).unwrap();
        assert!(anderson_check(&k2, &window, &starts, 2.0, 10, &spec, 0.95).is_err());
        let kl = Kernel::new(1.0, 2.0).unwrap();
        assert!(anderson_check(&kl, &window, &starts, 2.0, 10, &spec, 0.95).is_err());
        let k = Kernel::new(1.0, 1.0).unwrap();
        let asym = Window::new(1.0, 2.0).unwrap();
        assert!(anderson_check(&k, &asym, &starts, 2.0, 10, &spec, 0.95).is_err());
    }

    #[test]
    fn submult_trivial_when_survival_is_certain() {
        // Tiny deadlines and a wide window: all three estimates are 1 and
        // the inequality 1 <= 1 * 1 + 3 sigma holds with sigma = 0.
        let kernel = Kernel::new(1.0, 1.0).unwrap();
        let window = Window::symmetric(50.0).unwrap();
        let spec = PathSpec::new(1e-2, 1.0, 5, 0).unwrap();
        let grid = [StartState::origin()];
        let rep =
            submultiplicativity_check(&kernel, &window, &grid, 0.1, 0.1, 200, &spec, 0.95)
                .unwrap();
        assert_eq!(rep.phi_s.p_hat, 1.0);
        assert_eq!(rep.phi_st.p_hat, 1.0);
        assert!(rep.holds);
    }

    #[test]
    fn logconcavity_degenerate_triple_holds() {
        let kernel = Kernel::new(1.0, 1.0).unwrap();
        let window = Window::symmetric(1.0).unwrap();
        let spec = PathSpec::new(1e-2, 3.0, 5, 0).unwrap();
        let p = StartState::origin();
        let rep = logconcavity_probe(&kernel, &window, &[(p, p)], 2.0, 2000, &spec, 0.95)
            .unwrap();
        assert!(rep.asserted);
        assert_eq!(rep.verdict, Some(true), "p = q triple is equality in law");
    }
}
