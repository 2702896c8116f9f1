//! Linear-Gaussian inference primitives.
//!
//! All functions are generic over nalgebra dimensions so the same code serves
//! the fixed-size tracking model and dynamically sized test problems. Shapes
//! are checked at run time; for `Const` dimensions the checks are free.
//!
//! Every call to [`kf_predict`] and [`kf_update`] bumps a thread-local
//! [`KalmanCallCounter`], which is how sampler cost is measured.

use std::cell::Cell;
use std::f64::consts::PI;
use std::ops::{Add, AddAssign};

use nalgebra::allocator::Allocator;
use nalgebra::{Cholesky, DMatrix, DefaultAllocator, Dim, OMatrix, OVector};

use crate::{Error, Result};

/// Mean and covariance of a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments<D: Dim>
where
    DefaultAllocator: Allocator<D> + Allocator<D, D>,
{
    pub mean: OVector<f64, D>,
    pub cov: OMatrix<f64, D, D>,
}

impl<D: Dim> GaussianMoments<D>
where
    DefaultAllocator: Allocator<D> + Allocator<D, D>,
{
    pub fn new(mean: OVector<f64, D>, cov: OMatrix<f64, D, D>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::invalid(format!(
                "covariance is {}x{} but mean has length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Largest absolute asymmetry of the covariance relative to its largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.cov.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (&self.cov - self.cov.transpose()).amax() / scale
    }
}

/// One time step of a linear-Gaussian state-space model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianStep<D: Dim, O: Dim>
where
    DefaultAllocator: Allocator<D, D> + Allocator<O, D> + Allocator<O, O>,
{
    pub transition: OMatrix<f64, D, D>,
    pub process_noise: OMatrix<f64, D, D>,
    pub obs_matrix: OMatrix<f64, O, D>,
    pub obs_noise: OMatrix<f64, O, O>,
}

impl<D: Dim, O: Dim> LinearGaussianStep<D, O>
where
    DefaultAllocator: Allocator<D, D> + Allocator<O, D> + Allocator<O, O>,
{
    /// Checks that the four matrices have consistent shapes and that the
    /// measurement noise is positive definite.
    pub fn validate(&self) -> Result<()> {
        let n = self.transition.nrows();
        let m = self.obs_matrix.nrows();
        let square = |r: usize, c: usize, want: usize| r == want && c == want;
        if !square(self.transition.nrows(), self.transition.ncols(), n)
            || !square(self.process_noise.nrows(), self.process_noise.ncols(), n)
            || self.obs_matrix.ncols() != n
            || !square(self.obs_noise.nrows(), self.obs_noise.ncols(), m)
        {
            return Err(Error::invalid("inconsistent linear-Gaussian step dimensions"));
        }
        if self.obs_noise.clone().cholesky().is_none() {
            return Err(Error::SingularCovariance);
        }
        Ok(())
    }
}

/// Replaces `p` by `(p + pᵀ) / 2`.
pub fn symmetrize<D: Dim>(p: &mut OMatrix<f64, D, D>)
where
    DefaultAllocator: Allocator<D, D>,
{
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = avg;
            p[(j, i)] = avg;
        }
    }
}

/// Kalman prediction: `(A m, A P Aᵀ + Q)`.
pub fn kf_predict<D: Dim>(
    state: &GaussianMoments<D>,
    transition: &OMatrix<f64, D, D>,
    process_noise: &OMatrix<f64, D, D>,
) -> Result<GaussianMoments<D>>
where
    DefaultAllocator: Allocator<D> + Allocator<D, D>,
{
    let n = state.dim();
    if transition.shape() != (n, n) || process_noise.shape() != (n, n) || state.cov.shape() != (n, n)
    {
        return Err(Error::invalid(format!(
            "predict with state dim {n}, A {:?}, Q {:?}",
            transition.shape(),
            process_noise.shape()
        )));
    }
    COUNTER.with(|c| {
        let mut v = c.get();
        v.predicts += 1;
        c.set(v);
    });
    let mean = transition * &state.mean;
    let mut cov = transition * &state.cov * transition.transpose() + process_noise;
    symmetrize(&mut cov);
    Ok(GaussianMoments { mean, cov })
}

/// Kalman measurement update.
///
/// Returns the posterior moments and the log of the innovation likelihood
/// `N(y; H m⁻, H P⁻ Hᵀ + R)`.
pub fn kf_update<D: Dim, O: Dim>(
    prior: &GaussianMoments<D>,
    y: &OVector<f64, O>,
    obs_matrix: &OMatrix<f64, O, D>,
    obs_noise: &OMatrix<f64, O, O>,
) -> Result<(GaussianMoments<D>, f64)>
where
    DefaultAllocator: Allocator<D>
        + Allocator<O>
        + Allocator<D, D>
        + Allocator<O, D>
        + Allocator<D, O>
        + Allocator<O, O>,
{
    let n = prior.dim();
    let m = y.len();
    if obs_matrix.shape() != (m, n) || obs_noise.shape() != (m, m) {
        return Err(Error::invalid(format!(
            "update with state dim {n}, measurement dim {m}, H {:?}, R {:?}",
            obs_matrix.shape(),
            obs_noise.shape()
        )));
    }
    COUNTER.with(|c| {
        let mut v = c.get();
        v.updates += 1;
        c.set(v);
    });

    let innovation = y - obs_matrix * &prior.mean;
    // H P⁻, so that K = (S⁻¹ H P⁻)ᵀ.
    let hp = obs_matrix * &prior.cov;
    let mut s = &hp * obs_matrix.transpose() + obs_noise;
    symmetrize(&mut s);
    let chol = match Cholesky::new(s.clone()) {
        Some(c) => c,
        None => {
            return Err(Error::SingularInnovation {
                s: DMatrix::from_fn(m, m, |i, j| s[(i, j)]),
            })
        }
    };

    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let whitened = chol.solve(&innovation);
    let maha = innovation.dot(&whitened);
    let log_lik = -0.5 * (maha + log_det + m as f64 * (2.0 * PI).ln());

    let gain_t = chol.solve(&hp);
    let mean = &prior.mean + gain_t.tr_mul(&innovation);
    let mut cov = &prior.cov - gain_t.tr_mul(&hp);
    symmetrize(&mut cov);
    Ok((GaussianMoments { mean, cov }, log_lik))
}

/// `log N(x; mean, cov)`.
pub fn gaussian_logpdf<D: Dim>(
    x: &OVector<f64, D>,
    mean: &OVector<f64, D>,
    cov: &OMatrix<f64, D, D>,
) -> Result<f64>
where
    DefaultAllocator: Allocator<D> + Allocator<D, D>,
{
    let n = x.len();
    if mean.len() != n || cov.shape() != (n, n) {
        return Err(Error::invalid("gaussian_logpdf dimension mismatch"));
    }
    let chol = Cholesky::new(cov.clone()).ok_or(Error::SingularCovariance)?;
    let diff = x - mean;
    let maha = diff.dot(&chol.solve(&diff));
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(-0.5 * (maha + log_det + n as f64 * (2.0 * PI).ln()))
}

/// Number of Kalman predict and update calls.
///
/// The live counter is thread-local. A run on one thread measures its cost as
/// `KalmanCallCounter::current().since(start)`; runs on several threads are
/// combined by adding their deltas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct KalmanCallCounter {
    pub predicts: u64,
    pub updates: u64,
}

thread_local! {
    static COUNTER: Cell<KalmanCallCounter> = const {
        Cell::new(KalmanCallCounter { predicts: 0, updates: 0 })
    };
}

impl KalmanCallCounter {
    /// Totals issued on the calling thread since it started.
    pub fn current() -> Self {
        COUNTER.with(|c| c.get())
    }

    /// Calls issued between `earlier` and `self`.
    pub fn since(self, earlier: Self) -> Self {
        Self {
            predicts: self.predicts - earlier.predicts,
            updates: self.updates - earlier.updates,
        }
    }

    pub fn total(&self) -> u64 {
        self.predicts + self.updates
    }
}

impl Add for KalmanCallCounter {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            predicts: self.predicts + rhs.predicts,
            updates: self.updates + rhs.updates,
        }
    }
}

impl AddAssign for KalmanCallCounter {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for KalmanCallCounter {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}
