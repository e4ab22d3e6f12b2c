//! Gaussian displacement noise: sampling and log-density evaluation.
//!
//! Randomness is organized as counter-based streams: trial `t` of an
//! experiment seeded with `s` always draws from [`trial_stream`]`(s, t)`,
//! so results do not depend on how trials are scheduled across workers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, symmetrize};

/// Independent stream for one trial of an experiment.
pub fn trial_stream(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// i.i.d. N(0, σ²) displacement on every quadrature of `modes` modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
    modes: usize,
}

impl NoiseModel {
    pub fn new(sigma: f64, modes: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        if modes == 0 {
            return Err(Error::Domain("noise model needs at least one mode".into()));
        }
        Ok(Self { sigma, modes })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn sample_displacement<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(2 * self.modes, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            self.sigma * z
        })
    }
}

/// Centered multivariate normal density f_Σ with cached factorization.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

impl GaussianDensity {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let n = covariance.nrows();
        if n == 0 || covariance.ncols() != n {
            return Err(Error::dim("covariance (square)", n, covariance.ncols()));
        }
        if covariance.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("covariance has non-finite entries".into()));
        }
        let scale = max_abs(&covariance).max(1.0);
        let asym = max_abs(&(&covariance - covariance.transpose()));
        if asym > 1e-12 * scale {
            return Err(Error::Domain(format!("covariance not symmetric (|Σ−Σᵀ| = {asym:e})")));
        }
        let covariance = symmetrize(&covariance);
        let chol = covariance.clone().cholesky().ok_or_else(|| {
            Error::NumericalFailure("covariance is not positive definite (Cholesky failed)".into())
        })?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let inverse = symmetrize(&chol.inverse());
        let residual = max_abs(&(&covariance * &inverse - DMatrix::<f64>::identity(n, n)));
        if residual > 1e-8 {
            return Err(Error::NumericalFailure(format!(
                "covariance inverse inaccurate (|ΣΣ⁻¹−I| = {residual:e})"
            )));
        }
        Ok(Self {
            covariance,
            chol,
            inverse,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// xᵀΣ⁻¹x, evaluated with a triangular solve.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::dim("quadratic form", self.dim(), x.len()));
        }
        let v = DVector::from_row_slice(x);
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&v)
            .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))?;
        Ok(y.norm_squared())
    }

    /// ln f_Σ(x) = −(n/2)ln(2π) − ½ln det Σ − ½xᵀΣ⁻¹x.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let q = self.quadratic_form(x)?;
        let n = self.dim() as f64;
        Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * self.log_det - 0.5 * q)
    }

    /// Same density family with covariance c·Σ.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("scale must be positive, got {c}")));
        }
        Self::new(&self.covariance * c)
    }
}
