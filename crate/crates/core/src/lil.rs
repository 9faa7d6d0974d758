//! Liminf law-of-the-iterated-logarithm diagnostics: the running supremum
//! X*_t = sup_{s<=t} |X_s| normalized by f(t) = (t / loglog t)^((alpha+2)/2)
//! has a deterministic a.s. liminf equal to the unit-window tail rate raised
//! to (alpha+2)/2. Convergence is at loglog speed and far beyond desk scale;
//! what is tracked here is the running minimum of the ratio and how often it
//! dips below multiples of the rate-derived constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::RateFit;
use crate::kernel::{Kernel, PathSpec, SamplePath};
use crate::stats;

/// Chung normalization f(t) = (t / loglog t)^((alpha+2)/2), defined for t > e.
pub fn chung_normalizer(t: f64, alpha: f64) -> Result<f64> {
    if !(t > std::f64::consts::E) {
        return Err(Error::Domain(format!("f(t) requires t > e, got {t}")));
    }
    Ok((t / t.ln().ln()).powf((alpha + 2.0) / 2.0))
}

/// Running supremum, normalized ratio and prefix minimum of the ratio at a
/// set of checkpoints along one path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LilTrace {
    pub checkpoints: Vec<f64>,
    pub sup_values: Vec<f64>,
    pub ratios: Vec<f64>,
    pub running_min: Vec<f64>,
}

impl LilTrace {
    pub fn final_running_min(&self) -> f64 {
        *self.running_min.last().expect("trace has at least one checkpoint")
    }
}

/// Evaluate X*, f, their ratio and the prefix minimum at each checkpoint.
/// Checkpoints must be strictly increasing, inside (e, horizon].
pub fn lil_trace(path: &SamplePath, alpha: f64, checkpoints: &[f64]) -> Result<LilTrace> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidParameter("no checkpoints".into()));
    }
    if !checkpoints.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter("checkpoints must be strictly increasing".into()));
    }
    if checkpoints[0] <= std::f64::consts::E {
        return Err(Error::Domain(format!(
            "checkpoint {} is not above e; the normalization is undefined there",
            checkpoints[0]
        )));
    }
    let dt = path.spec.dt;
    let last_time = (path.len() - 1) as f64 * dt;
    if *checkpoints.last().unwrap() > last_time {
        return Err(Error::InvalidParameter(format!(
            "checkpoint {} beyond the path horizon {last_time}",
            checkpoints.last().unwrap()
        )));
    }

    let mut sup_values = Vec::with_capacity(checkpoints.len());
    let mut ratios = Vec::with_capacity(checkpoints.len());
    let mut running_min = Vec::with_capacity(checkpoints.len());
    let mut sup = 0.0f64;
    let mut k = 0usize;
    let mut current_min = f64::INFINITY;
    for &t in checkpoints {
        let k_end = ((t / dt).round() as usize).min(path.len() - 1);
        while k <= k_end {
            let a = path.x_values[k].abs();
            if a > sup {
                sup = a;
            }
            k += 1;
        }
        let f = chung_normalizer(t, alpha)?;
        let ratio = sup / f;
        current_min = current_min.min(ratio);
        sup_values.push(sup);
        ratios.push(ratio);
        running_min.push(current_min);
    }
    Ok(LilTrace { checkpoints: checkpoints.to_vec(), sup_values, ratios, running_min })
}

/// Normalization mode of the time-stretched functional X_{n t} on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StretchMode {
    /// Divide by (n / loglog n)^((alpha+2)/2): the liminf normalization.
    Chung,
    /// Divide by (n loglog n)^((alpha+2)/2): the functional-LIL normalization.
    Strassen,
}

/// Rescale the path restriction to [0, n] onto [0, 1] with the requested
/// normalization. Returns the normalized X values on the original grid;
/// n >= 3 keeps loglog n positive.
pub fn stretched_functional(
    path: &SamplePath,
    alpha: f64,
    n: u64,
    mode: StretchMode,
) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("stretch factor must be >= 3, got {n}")));
    }
    let dt = path.spec.dt;
    let last_time = (path.len() - 1) as f64 * dt;
    if (n as f64) > last_time {
        return Err(Error::InvalidParameter(format!(
            "stretch factor {n} exceeds the path horizon {last_time}"
        )));
    }
    let nf = n as f64;
    let loglog = nf.ln().ln();
    let norm = match mode {
        StretchMode::Chung => (nf / loglog).powf((alpha + 2.0) / 2.0),
        StretchMode::Strassen => (nf * loglog).powf((alpha + 2.0) / 2.0),
    };
    let k_end = ((nf / dt).round() as usize).min(path.len() - 1);
    Ok(path.x_values[..=k_end].iter().map(|x| x / norm).collect())
}

/// Ensemble summary of the bracketing diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LilComparison {
    /// Rate-derived liminf target k_hat^((alpha+2)/2).
    pub c_star: f64,
    /// Quantiles (level, value) of the final running minimum.
    pub final_min_quantiles: Vec<(f64, f64)>,
    /// For each delta, the fraction of paths whose running minimum dipped
    /// below (1 + delta) * c_star by the final checkpoint.
    pub dip_fractions: Vec<(f64, f64)>,
    pub n_paths: usize,
}

/// Compare an ensemble of LIL traces against the rate-derived constant. At
/// finite horizon only the bracketing fractions are meaningful; convergence
/// of the liminf itself is a loglog-scale statement.
pub fn lil_constant_comparison(
    ensemble: &[LilTrace],
    rate: &RateFit,
    alpha: f64,
    deltas: &[f64],
) -> Result<LilComparison> {
    if ensemble.is_empty() {
        return Err(Error::InsufficientData("empty LIL ensemble".into()));
    }
    let c_star = rate.k_hat.powf((alpha + 2.0) / 2.0);
    let finals: Vec<f64> = ensemble.iter().map(|t| t.final_running_min()).collect();
    let final_min_quantiles = [0.1, 0.25, 0.5, 0.75, 0.9]
        .iter()
        .map(|&q| (q, stats::quantile(&finals, q)))
        .collect();
    let dip_fractions = deltas
        .iter()
        .map(|&d| {
            let thresh = (1.0 + d) * c_star;
            let frac =
                finals.iter().filter(|&&m| m < thresh).count() as f64 / finals.len() as f64;
            (d, frac)
        })
        .collect();
    Ok(LilComparison { c_star, final_min_quantiles, dip_fractions, n_paths: ensemble.len() })
}

/// Generate `n` paths from the origin and compute their LIL traces.
pub fn sample_lil_ensemble(
    kernel: &Kernel,
    spec: &PathSpec,
    checkpoints: &[f64],
    n: u64,
) -> Result<Vec<LilTrace>> {
    spec.validate()?;
    let base = spec.replicate_id;
    (0..n)
        .into_par_iter()
        .map(|r| {
            let path = SamplePath::generate(kernel, &spec.with_replicate(base + r), 0.0, 0.0)?;
            lil_trace(&path, kernel.alpha(), checkpoints)
        })
        .collect()
}

/// Geometric checkpoint grid {start, start*ratio, ...} capped by the horizon.
pub fn geometric_checkpoints(start: f64, ratio: f64, horizon: f64) -> Vec<f64> {
    assert!(start > std::f64::consts::E && ratio > 1.0);
    let mut out = Vec::new();
    let mut t = start;
    while t <= horizon {
        out.push(t);
        t *= ratio;
    }
    out
}
