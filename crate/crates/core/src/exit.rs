//! Bilateral and unilateral exit-time sampling for the Markov pair (B, X),
//! and the exact shrink/rescale map between exit problems on nested windows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{BrownianStream, Kernel, PathSpec};

/// The open interval (-a, b) that X must leave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    a: f64,
    b: f64,
}

impl Window {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 || !b.is_finite() || b <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "window barriers must be positive, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn symmetric(half_width: f64) -> Result<Self> {
        Self::new(half_width, half_width)
    }

    /// Lower barrier depth (the interval is (-a, b)).
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Upper barrier height.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.a + self.b
    }

    /// Midpoint (b - a) / 2 of the interval.
    pub fn center(&self) -> f64 {
        (self.b - self.a) / 2.0
    }

    /// Strict interior membership; hitting a barrier exactly counts as out.
    #[inline]
    pub fn contains(&self, y: f64) -> bool {
        y > -self.a && y < self.b
    }

    /// The window (-a + eps, b - eps). Errors when the result is empty.
    pub fn shrink(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || eps >= self.width() / 2.0 {
            return Err(Error::Domain(format!(
                "shrink by eps={eps} empties the window (-{}, {})",
                self.a, self.b
            )));
        }
        if eps == 0.0 {
            return Ok(*self);
        }
        Self::new(self.a - eps, self.b - eps)
    }
}

/// Initial state (B_0, X_0) of the Markov pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartState {
    pub x: f64,
    pub y: f64,
}

impl StartState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self { x: 0.0, y: 0.0 }
    }
}

/// Which barrier X left through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitSide {
    Lower,
    Upper,
}

/// Outcome of one exit simulation. Within-step crossings are located by
/// linear interpolation of X (X is C^1, so first order is adequate); a path
/// that has not exited by the horizon is censored, never discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExitRecord {
    Exited { time: f64, side: ExitSide, b_at_exit: f64 },
    Censored { horizon: f64 },
}

impl ExitRecord {
    pub fn exit_time(&self) -> Option<f64> {
        match self {
            ExitRecord::Exited { time, .. } => Some(*time),
            ExitRecord::Censored { .. } => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, ExitRecord::Censored { .. })
    }

    /// True when the exit time is known or censored beyond `t`. Callers must
    /// keep `t` at or below the generating horizon.
    #[inline]
    pub fn survives_past(&self, t: f64) -> bool {
        match self {
            ExitRecord::Exited { time, .. } => *time > t,
            ExitRecord::Censored { .. } => true,
        }
    }
}

/// Exit sampling against arbitrary bounds; `lower` may be -inf and `upper`
/// +inf for one-sided problems. Ties at a barrier count as exited, and a
/// start outside the bounds exits at time zero (Upper wins the tie).
fn sample_exit_bounds(
    kernel: &Kernel,
    lower: f64,
    upper: f64,
    start: &StartState,
    spec: &PathSpec,
) -> Result<ExitRecord> {
    spec.validate()?;
    if start.y >= upper {
        return Ok(ExitRecord::Exited { time: 0.0, side: ExitSide::Upper, b_at_exit: start.x });
    }
    if start.y <= lower {
        return Ok(ExitRecord::Exited { time: 0.0, side: ExitSide::Lower, b_at_exit: start.x });
    }

    let dt = spec.dt;
    let n = spec.n_steps();
    let mut stream = BrownianStream::new(spec, start.x);
    let mut b_prev = start.x;
    let mut v_prev = kernel.eval(b_prev);
    let mut x_prev = start.y;

    for k in 1..=n {
        let b_new = stream.step();
        let v_new = kernel.eval(b_new);
        let x_new = x_prev + 0.5 * dt * (v_prev + v_new);

        if x_new >= upper || x_new <= lower {
            let (level, side) =
                if x_new >= upper { (upper, ExitSide::Upper) } else { (lower, ExitSide::Lower) };
            let frac = (level - x_prev) / (x_new - x_prev);
            let time = (k - 1) as f64 * dt + frac * dt;
            if time > spec.horizon {
                // Crossing interpolated into the padding beyond the horizon
                // (last partial step): only censoring is observable.
                return Ok(ExitRecord::Censored { horizon: spec.horizon });
            }
            let b_at_exit = b_prev + frac * (b_new - b_prev);
            return Ok(ExitRecord::Exited { time, side, b_at_exit });
        }

        b_prev = b_new;
        v_prev = v_new;
        x_prev = x_new;
    }
    Ok(ExitRecord::Censored { horizon: spec.horizon })
}

/// Sample the bilateral exit time T = inf{ t : X_t not in (-a, b) } from the
/// given start state. Streams the path; memory use is O(1).
pub fn sample_exit(
    kernel: &Kernel,
    window: &Window,
    start: &StartState,
    spec: &PathSpec,
) -> Result<ExitRecord> {
    sample_exit_bounds(kernel, -window.a, window.b, start, spec)
}

/// Sample the unilateral exit time inf{ t : X_t <= -barrier }: the upper
/// barrier is removed, so censoring is common (the tail is polynomial, not
/// exponential). For the upper-sided problem, mirror the kernel and start.
pub fn sample_unilateral_exit(
    kernel: &Kernel,
    barrier: f64,
    start: &StartState,
    spec: &PathSpec,
) -> Result<ExitRecord> {
    if !barrier.is_finite() || barrier <= 0.0 {
        return Err(Error::InvalidParameter(format!("barrier must be positive, got {barrier}")));
    }
    sample_exit_bounds(kernel, -barrier, f64::INFINITY, start, spec)
}

/// Exit scan over a materialized (B, X) trajectory, with the same crossing
/// interpolation as `sample_exit`. Returns `(time, side, b_at_exit)`.
pub fn first_exit_scan(
    x_values: &[f64],
    b_values: &[f64],
    dt: f64,
    window: &Window,
) -> Option<(f64, ExitSide, f64)> {
    let first = *x_values.first()?;
    if first >= window.b {
        return Some((0.0, ExitSide::Upper, b_values[0]));
    }
    if first <= -window.a {
        return Some((0.0, ExitSide::Lower, b_values[0]));
    }
    for k in 1..x_values.len() {
        let (x_prev, x_new) = (x_values[k - 1], x_values[k]);
        if x_new >= window.b || x_new <= -window.a {
            let (level, side) = if x_new >= window.b {
                (window.b, ExitSide::Upper)
            } else {
                (-window.a, ExitSide::Lower)
            };
            let frac = (level - x_prev) / (x_new - x_prev);
            let time = (k - 1) as f64 * dt + frac * dt;
            let b_at_exit = b_values[k - 1] + frac * (b_values[k] - b_values[k - 1]);
            return Some((time, side, b_at_exit));
        }
    }
    None
}

/// Sample `n` independent exit records. Replicate ids run from
/// `spec.replicate_id` upward, so disjoint batches are obtained by offsetting
/// the base id; the result is ordered by replicate and independent of the
/// number of worker threads.
pub fn sample_exit_batch(
    kernel: &Kernel,
    window: &Window,
    start: &StartState,
    spec: &PathSpec,
    n: u64,
) -> Result<Vec<ExitRecord>> {
    spec.validate()?;
    (0..n)
        .into_par_iter()
        .map(|r| sample_exit(kernel, window, start, &spec.with_replicate(spec.replicate_id + r)))
        .collect()
}

/// Exact shrink/rescale map between exit problems: survival of the shrunk
/// window past t + 1 from (x, y) has the same probability as survival of the
/// full window past the rescaled deadline from the rescaled start,
///
///   P_(x,y)[ T_shrunk > t + 1 ] = P_(x_eps, y_eps)[ T > t_eps ],
///
/// with s = 1 - 2 eps / (a + b) and
///   x_eps = x / s^(1/(alpha+2)),
///   y_eps = (y - (b-a)/2) / s + (b-a)/2,
///   t_eps = (t + 1) / s^(2/(alpha+2)).
pub fn scaling_map(
    x: f64,
    y: f64,
    t: f64,
    eps: f64,
    window: &Window,
    alpha: f64,
) -> Result<(f64, f64, f64)> {
    if !(eps >= 0.0) || eps >= window.width() / 2.0 {
        return Err(Error::Domain(format!(
            "eps={eps} must lie in [0, (a+b)/2) = [0, {})",
            window.width() / 2.0
        )));
    }
    let s = 1.0 - 2.0 * eps / window.width();
    let shift = window.center();
    let x_eps = x / s.powf(1.0 / (alpha + 2.0));
    let y_eps = (y - shift) / s + shift;
    let t_eps = (t + 1.0) / s.powf(2.0 / (alpha + 2.0));
    Ok((x_eps, y_eps, t_eps))
}

/// Monte Carlo check of an identity in law: estimates of the two sides, the
/// pooled standard error, and the verdict at `z` standard errors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub p_left: f64,
    pub p_right: f64,
    pub n: u64,
    pub pooled_sigma: f64,
    pub z: f64,
    pub pass: bool,
}

impl IdentityCheck {
    pub fn from_counts(left: u64, right: u64, n: u64, z: f64) -> Self {
        let p_left = left as f64 / n as f64;
        let p_right = right as f64 / n as f64;
        let pooled_sigma =
            ((p_left * (1.0 - p_left) + p_right * (1.0 - p_right)) / n as f64).sqrt();
        let pass = if pooled_sigma > 0.0 {
            (p_left - p_right).abs() <= z * pooled_sigma
        } else {
            p_left == p_right
        };
        Self { p_left, p_right, n, pooled_sigma, z, pass }
    }
}

/// Two independent Monte Carlo estimates of the shrink/rescale identity:
/// the left side samples exits from the shrunk window past t + 1, the right
/// side samples exits from the full window past t_eps, started at the mapped
/// state. Exact in law, so agreement within `z` pooled standard errors is
/// the correctness oracle.
#[allow(clippy::too_many_arguments)]
pub fn scaling_identity_check(
    kernel: &Kernel,
    window: &Window,
    start: &StartState,
    eps: f64,
    t: f64,
    n: u64,
    spec: &PathSpec,
    z: f64,
) -> Result<IdentityCheck> {
    if n == 0 {
        return Err(Error::InsufficientData("identity check needs n > 0".into()));
    }
    let shrunk = window.shrink(eps)?;
    let (x_eps, y_eps, t_eps) = scaling_map(start.x, start.y, t, eps, window, kernel.alpha())?;
    if t + 1.0 > spec.horizon || t_eps > spec.horizon {
        return Err(Error::InvalidParameter(format!(
            "horizon {} too short for deadlines t+1={} and t_eps={}",
            spec.horizon,
            t + 1.0,
            t_eps
        )));
    }

    let base = spec.replicate_id;
    let deadline_left = t + 1.0;
    let left: u64 = (0..n)
        .into_par_iter()
        .map(|r| {
            let rec =
                sample_exit(kernel, &shrunk, start, &spec.with_replicate(base + r)).expect("spec validated");
            rec.survives_past(deadline_left) as u64
        })
        .sum();

    let mapped = StartState::new(x_eps, y_eps);
    let right: u64 = (0..n)
        .into_par_iter()
        .map(|r| {
            let rec = sample_exit(kernel, window, &mapped, &spec.with_replicate(base + n + r))
                .expect("spec validated");
            rec.survives_past(t_eps) as u64
        })
        .sum();

    Ok(IdentityCheck::from_counts(left, right, n, z))
}
