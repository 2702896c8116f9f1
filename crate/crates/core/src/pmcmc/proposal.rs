use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::{Error, Result};

/// Sampler coordinates of the parameters: `[√q, λ, σ]`.
pub type Coords = Vector3<f64>;
pub const PARAM_DIM: usize = 3;
pub const PARAM_NAMES: [&str; PARAM_DIM] = ["sqrt_q", "lambda", "sigma"];

pub fn to_coords(p: &ModelParams) -> Coords {
    Vector3::new(p.q.sqrt(), p.lambda, p.sigma)
}

/// `None` unless every coordinate is positive.
pub fn from_coords(c: &Coords) -> Option<ModelParams> {
    if c.iter().all(|&x| x > 0.0 && x.is_finite()) {
        Some(ModelParams { q: c[0] * c[0], lambda: c[1], sigma: c[2] })
    } else {
        None
    }
}

/// Independent Gamma priors with shape 2 on `√q`, `λ` and `σ`.
///
/// With shape 2 the scale equals the mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSpec {
    pub sqrt_q_mode: f64,
    pub lambda_mode: f64,
    pub sigma_mode: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { sqrt_q_mode: 15.0, lambda_mode: 1.0 / 3.0, sigma_mode: 0.75 }
    }
}

impl PriorSpec {
    pub const SHAPE: f64 = 2.0;

    pub fn modes(&self) -> Coords {
        Vector3::new(self.sqrt_q_mode, self.lambda_mode, self.sigma_mode)
    }

    pub fn mode_params(&self) -> ModelParams {
        from_coords(&self.modes()).expect("validated modes are positive")
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes().iter().all(|&m| m > 0.0 && m.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid(format!("prior modes must be positive: {self:?}")))
        }
    }
}

/// `log Gamma(x; shape 2, scale)`; `-∞` for `x ≤ 0`.
pub fn gamma2_logpdf(x: f64, scale: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    x.ln() - x / scale - 2.0 * scale.ln()
}

pub fn prior_logpdf_coords(c: &Coords, spec: &PriorSpec) -> f64 {
    c.iter().zip(spec.modes().iter()).map(|(&x, &s)| gamma2_logpdf(x, s)).sum()
}

/// Log prior density of the parameters, in sampler coordinates.
pub fn prior_logpdf(params: &ModelParams, spec: &PriorSpec) -> f64 {
    if !(params.q > 0.0) {
        return f64::NEG_INFINITY;
    }
    prior_logpdf_coords(&to_coords(params), spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationConfig {
    /// First iteration at which the proposal covariance is re-estimated.
    pub start: usize,
    /// Last such iteration; `None` means half the chain length.
    pub end: Option<usize>,
    pub epsilon: f64,
    /// Initial proposal standard deviations as a fraction of the prior modes.
    pub initial_scale: f64,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self { start: 100, end: None, epsilon: 1e-10, initial_scale: 0.1 }
    }
}

/// Gaussian random-walk proposal with covariance adapted from the chain
/// history inside a fixed window of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalState {
    pub cov: Matrix3<f64>,
    pub window: (usize, usize),
    pub epsilon: f64,
    count: usize,
    mean: Coords,
    /// Sum of outer products of deviations from the running mean.
    scatter: Matrix3<f64>,
}

impl ProposalState {
    pub fn new(cov: Matrix3<f64>, window: (usize, usize), epsilon: f64) -> Self {
        Self { cov, window, epsilon, count: 0, mean: Coords::zeros(), scatter: Matrix3::zeros() }
    }

    /// Initial covariance `diag((scale · mode)²)`, window resolved against `iterations`.
    pub fn from_config(cfg: &AdaptationConfig, spec: &PriorSpec, iterations: usize) -> Self {
        let sd = spec.modes() * cfg.initial_scale;
        let cov = Matrix3::from_diagonal(&sd.component_mul(&sd));
        let end = cfg.end.unwrap_or(iterations / 2);
        Self::new(cov, (cfg.start, end), cfg.epsilon)
    }

    /// `θ + L z` with `L Lᵀ = Σ` and `z` standard normal.
    pub fn propose<R: Rng + ?Sized>(&self, theta: &Coords, rng: &mut R) -> Coords {
        let z = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        theta + self.cholesky_factor() * z
    }

    fn cholesky_factor(&self) -> Matrix3<f64> {
        match self.cov.cholesky() {
            Some(c) => c.l(),
            // Fall back to the diagonal if adaptation produced a singular estimate.
            None => Matrix3::from_diagonal(&self.cov.diagonal().map(|v| v.max(self.epsilon).sqrt())),
        }
    }

    /// Log density of proposing `to` from `from`.
    pub fn log_density(&self, from: &Coords, to: &Coords) -> Result<f64> {
        crate::gauss::gaussian_logpdf(to, from, &self.cov)
    }

    /// Adds `theta` (the state after iteration `i`) to the running moments and,
    /// inside the window, sets `Σ = (2.4/d)² Cov + ε I`. Needs two samples.
    pub fn adapt(&mut self, theta: &Coords, i: usize) {
        self.count += 1;
        let delta = theta - self.mean;
        self.mean += delta / self.count as f64;
        self.scatter += delta * (theta - self.mean).transpose();
        if self.count >= 2 && self.in_window(i) {
            let scale = (2.4 / PARAM_DIM as f64).powi(2);
            self.cov = self.sample_cov() * scale + Matrix3::identity() * self.epsilon;
        }
    }

    pub fn in_window(&self, i: usize) -> bool {
        self.window.0 <= i && i <= self.window.1
    }

    pub fn samples_seen(&self) -> usize {
        self.count
    }

    pub fn sample_mean(&self) -> Coords {
        self.mean
    }

    /// Unbiased covariance of the samples seen so far (zero for fewer than two).
    pub fn sample_cov(&self) -> Matrix3<f64> {
        if self.count < 2 {
            return Matrix3::zeros();
        }
        let s = self.scatter / (self.count - 1) as f64;
        (s + s.transpose()) * 0.5
    }
}
