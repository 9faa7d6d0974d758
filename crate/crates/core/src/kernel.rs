//! Brownian path generation, kernel evaluation, trapezoid integration of the
//! additive functional X_t = int_0^t V(B_s) ds, and a banded occupation
//! estimator for the local time of B at zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the number of simulation steps in a single path.
const MAX_STEPS: f64 = (1u64 << 42) as f64;

/// The two-sided power kernel V(x) = x^alpha for x >= 0 and
/// V(x) = -lambda * |x|^alpha for x < 0. Both branches vanish at 0, so V is
/// continuous; lambda weights the negative side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    alpha: f64,
    lambda: f64,
    m_const: f64,
}

impl Kernel {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        // Smallest M with |u+v|^alpha <= M (|u|^alpha + |v|^alpha):
        // 1 for concave powers, 2^(alpha-1) for convex ones.
        let m_const = 1.0f64.max(2.0f64.powf(alpha - 1.0));
        Ok(Self { alpha, lambda, m_const })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Constant M such that |u+v|^alpha <= M (|u|^alpha + |v|^alpha) for all u, v.
    pub fn m_const(&self) -> f64 {
        self.m_const
    }

    /// Evaluate V. The integer exponents 1 and 2 are by far the most common
    /// and dominate the simulation hot loop, so they skip `powf`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if self.alpha == 1.0 {
            if x >= 0.0 {
                x
            } else {
                self.lambda * x
            }
        } else if self.alpha == 2.0 {
            if x >= 0.0 {
                x * x
            } else {
                -self.lambda * x * x
            }
        } else if x >= 0.0 {
            x.powf(self.alpha)
        } else {
            -self.lambda * (-x).powf(self.alpha)
        }
    }
}

/// Discretization and random-stream identity of one simulated path.
///
/// Identical `(seed, replicate_id)` pairs reproduce the path bit for bit;
/// distinct pairs give independent streams, so replicates can be generated
/// in any order on any number of workers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub replicate_id: u64,
}

impl PathSpec {
    pub fn new(dt: f64, horizon: f64, seed: u64, replicate_id: u64) -> Result<Self> {
        let spec = Self { dt, horizon, seed, replicate_id };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.dt > self.horizon {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds horizon = {}",
                self.dt, self.horizon
            )));
        }
        if (self.horizon / self.dt).ceil() > MAX_STEPS {
            return Err(Error::InvalidParameter(format!(
                "step count ceil({}/{}) overflows the supported range",
                self.horizon, self.dt
            )));
        }
        Ok(())
    }

    /// Number of increments; the grid has `n_steps() + 1` points.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).ceil() as usize
    }

    /// Same discretization, different independent random stream.
    pub fn with_replicate(mut self, replicate_id: u64) -> Self {
        self.replicate_id = replicate_id;
        self
    }

    /// Deterministic generator keyed by `(seed, replicate_id)`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replicate_id.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// Streaming Brownian increments: yields B at successive grid times without
/// materializing the path. Exit sampling consumes this directly so that only
/// summaries, never whole trajectories, are held in memory.
pub struct BrownianStream {
    rng: ChaCha8Rng,
    sigma: f64,
    value: f64,
}

impl BrownianStream {
    pub fn new(spec: &PathSpec, x0: f64) -> Self {
        Self { rng: spec.rng(), sigma: spec.dt.sqrt(), value: x0 }
    }

    pub fn current(&self) -> f64 {
        self.value
    }

    /// Advance one grid step and return the new B value.
    #[inline]
    pub fn step(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.value += self.sigma * z;
        self.value
    }
}

/// Brownian path on the grid t_k = k * dt, starting at `x0`.
pub fn simulate_brownian(spec: &PathSpec, x0: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.n_steps();
    let mut out = Vec::with_capacity(n + 1);
    out.push(x0);
    let mut stream = BrownianStream::new(spec, x0);
    for _ in 0..n {
        out.push(stream.step());
    }
    Ok(out)
}

/// Cumulative trapezoid rule for X_t = y0 + int V(B_s) ds along a grid path.
/// Output has the same length as the input. The per-step update
/// `x += dt/2 * (V(b_prev) + V(b_new))` is the exact discrete model; other
/// components reproduce it bit for bit.
pub fn integrate_functional(b_path: &[f64], kernel: &Kernel, y0: f64, dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(b_path.len());
    let Some(&first) = b_path.first() else {
        return out;
    };
    out.push(y0);
    let mut x = y0;
    let mut v_prev = kernel.eval(first);
    for &b in &b_path[1..] {
        let v = kernel.eval(b);
        x += 0.5 * dt * (v_prev + v);
        out.push(x);
        v_prev = v;
    }
    out
}

/// Occupation-density estimate of the local time of B at zero:
/// L(0, t_k) ~= dt / (2 band) * #{ j <= k : |b_j| < band }.
///
/// The estimator carries an O(sqrt(dt)) bias; `band = sqrt(dt)` is the
/// recommended default.
pub fn local_time_zero(b_path: &[f64], dt: f64, band: f64) -> Vec<f64> {
    assert!(band > 0.0, "band must be positive");
    let scale = dt / (2.0 * band);
    let mut count = 0u64;
    b_path
        .iter()
        .map(|b| {
            if b.abs() < band {
                count += 1;
            }
            count as f64 * scale
        })
        .collect()
}

/// A materialized trajectory of the pair (B, X) with its grid.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub b_values: Vec<f64>,
    pub x_values: Vec<f64>,
    pub spec: PathSpec,
}

impl SamplePath {
    /// Simulate B from `x0` and integrate X from `y0` on the grid of `spec`.
    pub fn generate(kernel: &Kernel, spec: &PathSpec, x0: f64, y0: f64) -> Result<Self> {
        let b_values = simulate_brownian(spec, x0)?;
        let x_values = integrate_functional(&b_values, kernel, y0, spec.dt);
        let times = (0..b_values.len()).map(|k| k as f64 * spec.dt).collect();
        Ok(Self { times, b_values, x_values, spec: *spec })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn kernel_eval_examples() {
        let k = Kernel::new(1.0, 2.0).unwrap();
        assert_eq!(k.eval(0.0), 0.0);
        assert_eq!(k.eval(-3.0), -6.0);
        let k = Kernel::new(2.0, 1.0).unwrap();
        assert_eq!(k.eval(1.5), 2.25);
        let k = Kernel::new(0.5, 3.0).unwrap();
        assert_eq!(k.eval(4.0), 2.0);
        assert_eq!(k.eval(-4.0), -6.0);
    }

    #[test]
    fn kernel_rejects_bad_parameters() {
        assert!(Kernel::new(0.0, 1.0).is_err());
        assert!(Kernel::new(1.0, -1.0).is_err());
        assert!(Kernel::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn kernel_odd_when_lambda_one() {
        let k = Kernel::new(1.7, 1.0).unwrap();
        for i in 0..1000 {
            let x = -5.0 + 0.01 * i as f64;
            assert_eq!(k.eval(-x), -k.eval(x), "V must be odd at x = {x}");
        }
    }

    #[test]
    fn m_const_bound_on_random_pairs() {
        let mut rng = PathSpec::new(1.0, 1.0, 99, 0).unwrap().rng();
        for &(alpha, lambda) in &[(0.5, 1.0), (1.0, 2.0), (1.7, 0.3), (2.0, 1.0), (3.5, 1.0)] {
            let k = Kernel::new(alpha, lambda).unwrap();
            for _ in 0..100_000 {
                let u: f64 = rng.random_range(-10.0..10.0);
                let v: f64 = rng.random_range(-10.0..10.0);
                let lhs = (u + v).abs().powf(alpha);
                let rhs = k.m_const() * (u.abs().powf(alpha) + v.abs().powf(alpha));
                // Allow one ulp-scale slack for the powf round-off.
                assert!(
                    lhs <= rhs * (1.0 + 1e-12),
                    "bound violated: alpha={alpha} u={u} v={v} lhs={lhs} rhs={rhs}"
                );
            }
        }
    }

    #[test]
    fn path_spec_validation() {
        assert!(PathSpec::new(0.0, 1.0, 0, 0).is_err());
        assert!(PathSpec::new(2.0, 1.0, 0, 0).is_err());
        assert!(PathSpec::new(1e-12, 1e38, 0, 0).is_err(), "step-count overflow");
        let s = PathSpec::new(0.25, 1.1, 0, 0).unwrap();
        assert_eq!(s.n_steps(), 5);
    }

    #[test]
    fn brownian_length_and_start() {
        let spec = PathSpec::new(1.0, 1.0, 7, 0).unwrap();
        let b = simulate_brownian(&spec, 5.0).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0], 5.0);
    }

    #[test]
    fn brownian_is_deterministic() {
        let spec = PathSpec::new(0.01, 2.0, 1234, 56).unwrap();
        let b1 = simulate_brownian(&spec, -1.0).unwrap();
        let b2 = simulate_brownian(&spec, -1.0).unwrap();
        assert_eq!(b1, b2);
        // A different replicate id must give a different stream.
        let b3 = simulate_brownian(&spec.with_replicate(57), -1.0).unwrap();
        assert_ne!(b1[1..], b3[1..]);
    }

    #[test]
    fn integrate_zero_path_is_zero() {
        let k = Kernel::new(1.3, 0.7).unwrap();
        let x = integrate_functional(&[0.0; 100], &k, 0.0, 0.01);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trapezoid_recurrence_is_bit_exact() {
        let k = Kernel::new(1.0, 2.5).unwrap();
        let spec = PathSpec::new(0.001, 1.0, 42, 3).unwrap();
        let path = SamplePath::generate(&k, &spec, 0.3, -0.1).unwrap();
        assert_eq!(path.b_values[0], 0.3);
        assert_eq!(path.x_values[0], -0.1);
        assert_eq!(path.times.len(), path.b_values.len());
        assert_eq!(path.times.len(), path.x_values.len());
        for i in 1..path.len() {
            let inc = 0.5 * spec.dt * (k.eval(path.b_values[i - 1]) + k.eval(path.b_values[i]));
            let expect = path.x_values[i - 1] + inc;
            assert_eq!(path.x_values[i], expect, "trapezoid recurrence broken at step {i}");
        }
    }

    #[test]
    fn local_time_zero_counts_band_occupation() {
        // Path entirely above the band accrues no local time.
        let above: Vec<f64> = vec![1.0; 50];
        assert!(local_time_zero(&above, 0.01, 0.1).iter().all(|&l| l == 0.0));

        // Nondecreasing on an arbitrary path.
        let spec = PathSpec::new(0.01, 5.0, 11, 0).unwrap();
        let b = simulate_brownian(&spec, 0.0).unwrap();
        let lt = local_time_zero(&b, spec.dt, spec.dt.sqrt());
        for w in lt.windows(2) {
            assert!(w[1] >= w[0]);
        }
        // Every in-band point contributes exactly dt / (2 band).
        let expected_last = 0.01 / (2.0 * spec.dt.sqrt())
            * b.iter().filter(|v| v.abs() < spec.dt.sqrt()).count() as f64;
        assert_eq!(*lt.last().unwrap(), expected_last);
    }
}
