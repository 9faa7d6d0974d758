//! Small statistical toolbox shared by the estimators: binomial confidence
//! intervals, the standard-normal quantile, two-sample Kolmogorov-Smirnov,
//! weighted least squares and empirical quantiles.

/// Inverse CDF of the standard normal distribution (Acklam's rational
/// approximation, relative error below 1.2e-9 on (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile requires p in (0,1), got {p}");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |p: f64| -> f64 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    }
}

/// z-score for a central two-sided interval at the given confidence level,
/// e.g. 0.95 -> 1.96.
pub fn z_for_level(ci_level: f64) -> f64 {
    assert!(
        ci_level > 0.0 && ci_level < 1.0,
        "confidence level must lie in (0,1), got {ci_level}"
    );
    normal_quantile(0.5 + ci_level / 2.0)
}

/// Wilson score interval for a binomial proportion. Preferred over Wald in
/// the tails: it never collapses to a point at 0 or n successes.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Result of a two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    /// Supremum distance between the two empirical CDFs.
    pub statistic: f64,
    /// Asymptotic p-value (Stephens' small-sample correction applied).
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test. Both inputs must be nonempty and
/// free of NaN.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> KsTest {
    assert!(!xs.is_empty() && !ys.is_empty(), "ks_two_sample requires nonempty samples");
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_unstable_by(|u, v| u.total_cmp(v));
    b.sort_unstable_by(|u, v| u.total_cmp(v));

    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        if diff > d {
            d = diff;
        }
    }

    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    KsTest { statistic: d, p_value: kolmogorov_sf(lambda) }
}

/// Survival function of the Kolmogorov distribution,
/// Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Straight-line fit y = intercept + slope * x with per-point weights
/// w_i = 1 / Var(y_i).
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope under the known-variance model.
    pub slope_stderr: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
    pub n_points: usize,
}

/// Weighted least squares for (x, y, w) triples. Returns `None` when fewer
/// than two points are given or the abscissae are degenerate.
pub fn weighted_linear_fit(points: &[(f64, f64, f64)]) -> Option<LineFit> {
    if points.len() < 2 {
        return None;
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, w) in points {
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let delta = s * sxx - sx * sx;
    if !(delta > 0.0) || delta < 1e-12 * s * sxx.max(1.0) {
        return None;
    }
    let slope = (s * sxy - sx * sy) / delta;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let slope_stderr = (s / delta).sqrt();

    let y_bar = sy / s;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(x, y, w) in points {
        let fit = intercept + slope * x;
        ss_res += w * (y - fit) * (y - fit);
        ss_tot += w * (y - y_bar) * (y - y_bar);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Some(LineFit { slope, intercept, slope_stderr, r_squared, n_points: points.len() })
}

/// Ordinary least squares on (x, y) pairs.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LineFit> {
    let weighted: Vec<(f64, f64, f64)> = points.iter().map(|&(x, y)| (x, y, 1.0)).collect();
    weighted_linear_fit(&weighted)
}

/// Empirical quantile with linear interpolation between order statistics.
/// The input need not be sorted.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level must lie in [0,1]");
    let mut v = values.to_vec();
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    }
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Variance of log(p_hat) by the delta method, with a half-count smoothing
/// so the weight stays finite when every replicate survives.
pub fn log_proportion_variance(successes: u64, n: u64) -> f64 {
    let p = (successes as f64 + 0.5) / (n as f64 + 1.0);
    (1.0 - p) / (n as f64 * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantile_matches_reference_values() {
        // Reference values from the standard normal table.
        assert!((normal_quantile(0.5)).abs() < 1e-9);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-8);
        assert!((normal_quantile(0.995) - 2.5758293035489004).abs() < 1e-8);
        assert!((normal_quantile(0.025) + 1.959963984540054).abs() < 1e-8);
        assert!((normal_quantile(1e-6) + 4.753424308822899).abs() < 1e-7);
    }

    #[test]
    fn z_for_level_round_trip() {
        assert!((z_for_level(0.95) - 1.959963984540054).abs() < 1e-8);
        assert!((z_for_level(0.99) - 2.5758293035489004).abs() < 1e-8);
    }

    #[test]
    fn wilson_interval_brackets_p_hat() {
        for &(s, n) in &[(0u64, 100u64), (1, 100), (50, 100), (99, 100), (100, 100)] {
            let (lo, hi) = wilson_interval(s, n, 1.96);
            let p = s as f64 / n as f64;
            assert!(lo <= p + 1e-12 && p <= hi + 1e-12, "({s},{n}): {lo} {p} {hi}");
            assert!(lo >= 0.0 && hi <= 1.0);
            assert!(lo < hi);
        }
    }

    #[test]
    fn wilson_interval_narrows_with_n() {
        let (lo1, hi1) = wilson_interval(50, 100, 1.96);
        let (lo2, hi2) = wilson_interval(5000, 10000, 1.96);
        assert!(hi2 - lo2 < hi1 - lo1);
    }

    #[test]
    fn ks_statistic_known_cases() {
        // D = 0.25: CDFs split at 1 (3/4 vs 2/4) and stay 1/4 apart until 4.
        let t = ks_two_sample(&[1.0, 1.0, 4.0, 4.0], &[1.0, 1.0, 1.0, 4.0]);
        assert!((t.statistic - 0.25).abs() < 1e-12);

        let xs = [0.42, 0.24, 0.86, 0.85, 0.82, 0.82, 0.25, 0.78, 0.13, 0.27];
        let ys = [0.24, 0.27, 0.87, 0.29, 0.57, 0.44, 0.5, 0.00, 0.56, 0.03];
        let t = ks_two_sample(&xs, &ys);
        assert!((t.statistic - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ks_identical_samples_give_zero_statistic() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 1.0, 4.0, 3.0];
        let t = ks_two_sample(&xs, &ys);
        assert_eq!(t.statistic, 0.0);
        assert!(t.p_value > 0.999);
    }

    #[test]
    fn kolmogorov_sf_is_monotone_and_bounded() {
        let mut prev = 1.0;
        for i in 0..60 {
            let x = 0.05 * i as f64;
            let q = kolmogorov_sf(x);
            assert!((0.0..=1.0).contains(&q));
            assert!(q <= prev + 1e-15);
            prev = q;
        }
        // Far tail is essentially zero.
        assert!(kolmogorov_sf(3.0) < 1e-6);
    }

    #[test]
    fn weighted_fit_recovers_exact_line() {
        let pts: Vec<(f64, f64, f64)> =
            (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64, 1.0 + i as f64)).collect();
        let fit = weighted_linear_fit(&pts).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_fit_degenerate_inputs() {
        assert!(weighted_linear_fit(&[(1.0, 2.0, 1.0)]).is_none());
        assert!(weighted_linear_fit(&[(1.0, 2.0, 1.0), (1.0, 3.0, 1.0)]).is_none());
    }

    #[test]
    fn quantile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((median(&v) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn log_variance_finite_at_full_survival() {
        let v = log_proportion_variance(100, 100);
        assert!(v.is_finite() && v > 0.0);
    }
}
