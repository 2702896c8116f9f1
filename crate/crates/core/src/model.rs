//! The 2-D Ornstein-Uhlenbeck target model.
//!
//! Each target has a constant mean location `μ` and an actual location `p`
//! that reverts towards it: `dp = λ (μ − p) dt + √q dW`. The state vector is
//! ordered `[μ₁, μ₂, p₁, p₂]` and the measurement is `p` plus isotropic
//! Gaussian noise of standard deviation `σ`.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4, U4};
use serde::{Deserialize, Serialize};

use crate::gauss::GaussianMoments;
use crate::{Error, Result};

pub const STATE_DIM: usize = 4;
pub const OBS_DIM: usize = 2;

pub type StateMoments = GaussianMoments<U4>;
pub type Measurement = Vector2<f64>;

/// Static model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Diffusion intensity (position² / time).
    pub q: f64,
    /// Mean-reversion rate (1 / time).
    pub lambda: f64,
    /// Measurement noise standard deviation (position).
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(q: f64, lambda: f64, sigma: f64) -> Result<Self> {
        let p = Self { q, lambda, sigma };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from `√q` rather than `q`.
    pub fn from_sqrt_q(sqrt_q: f64, lambda: f64, sigma: f64) -> Result<Self> {
        if !(sqrt_q > 0.0) {
            return Err(Error::invalid(format!("sqrt_q must be positive, got {sqrt_q}")));
        }
        Self::new(sqrt_q * sqrt_q, lambda, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("lambda", self.lambda), ("sigma", self.sigma)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn sqrt_q(&self) -> f64 {
        self.q.sqrt()
    }

    /// Stationary variance of each location coordinate around its mean.
    pub fn steady_state_var(&self) -> f64 {
        self.q / (2.0 * self.lambda)
    }
}

/// Sample moments of all observed positions; used to centre the birth density.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStats {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub count: usize,
}

impl ObservationStats {
    /// Sample mean and unbiased sample covariance.
    pub fn from_measurements<'a>(ys: impl IntoIterator<Item = &'a Measurement>) -> Result<Self> {
        let ys: Vec<&Measurement> = ys.into_iter().collect();
        let n = ys.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "observation statistics need at least 2 measurements, got {n}"
            )));
        }
        let mean = ys.iter().fold(Vector2::zeros(), |acc, y| acc + *y) / n as f64;
        let cov = ys.iter().fold(Matrix2::zeros(), |acc, y| {
            let d = *y - mean;
            acc + d * d.transpose()
        }) / (n - 1) as f64;
        Ok(Self { mean, cov, count: n })
    }
}

/// Exact discretization of the OU dynamics over a gap `dt`.
pub fn ou_discretize(params: &ModelParams, dt: f64) -> Result<(Matrix4<f64>, Matrix4<f64>)> {
    if !(dt >= 0.0) {
        return Err(Error::invalid(format!("time step must be nonnegative, got {dt}")));
    }
    let lambda = params.lambda;
    let b = (-lambda * dt).exp();
    let a = -(-lambda * dt).exp_m1();
    let s = -params.q / (2.0 * lambda) * (-2.0 * lambda * dt).exp_m1();

    let mut transition = Matrix4::identity();
    transition[(2, 0)] = a;
    transition[(3, 1)] = a;
    transition[(2, 2)] = b;
    transition[(3, 3)] = b;

    let mut noise = Matrix4::zeros();
    noise[(2, 2)] = s;
    noise[(3, 3)] = s;
    Ok((transition, noise))
}

/// Measurement matrix selecting the location and the noise covariance `σ² I`.
pub fn ou_measurement(params: &ModelParams) -> (Matrix2x4<f64>, Matrix2<f64>) {
    let mut h = Matrix2x4::zeros();
    h[(0, 2)] = 1.0;
    h[(1, 3)] = 1.0;
    (h, Matrix2::identity() * (params.sigma * params.sigma))
}

/// How the mean-location and location blocks of the birth density are coupled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirthCoupling {
    /// `μ ~ N(ȳ, Σ̂)` and `p | μ ~ N(μ, q/(2λ) I)`, so the blocks share `Σ̂`.
    #[default]
    Joint,
    /// Same block marginals with zero cross-covariance.
    BlockDiagonal,
}

/// Density of a target's state at its first observation.
pub fn ou_birth_density(
    params: &ModelParams,
    stats: &ObservationStats,
    coupling: BirthCoupling,
) -> StateMoments {
    let y = stats.mean;
    let mean = Vector4::new(y[0], y[1], y[0], y[1]);
    let sigma = stats.cov;
    let loc = sigma + Matrix2::identity() * params.steady_state_var();
    let cross = match coupling {
        BirthCoupling::Joint => sigma,
        BirthCoupling::BlockDiagonal => Matrix2::zeros(),
    };
    let mut cov = Matrix4::zeros();
    cov.fixed_view_mut::<2, 2>(0, 0).copy_from(&sigma);
    cov.fixed_view_mut::<2, 2>(0, 2).copy_from(&cross);
    cov.fixed_view_mut::<2, 2>(2, 0).copy_from(&cross.transpose());
    cov.fixed_view_mut::<2, 2>(2, 2).copy_from(&loc);
    GaussianMoments { mean, cov }
}

/// Everything the filter needs from the OU model for one parameter value.
#[derive(Debug, Clone)]
pub struct OuModel {
    pub params: ModelParams,
    pub obs_matrix: Matrix2x4<f64>,
    pub obs_noise: Matrix2<f64>,
    pub birth: StateMoments,
}

impl OuModel {
    pub fn new(params: ModelParams, stats: &ObservationStats, coupling: BirthCoupling) -> Result<Self> {
        params.validate()?;
        let (obs_matrix, obs_noise) = ou_measurement(&params);
        let birth = ou_birth_density(&params, stats, coupling);
        Ok(Self { params, obs_matrix, obs_noise, birth })
    }

    pub fn transition(&self, dt: f64) -> Result<(Matrix4<f64>, Matrix4<f64>)> {
        ou_discretize(&self.params, dt)
    }
}

/// Location block `[p₁, p₂]` of a state mean.
pub fn location(mean: &Vector4<f64>) -> [f64; 2] {
    [mean[2], mean[3]]
}
