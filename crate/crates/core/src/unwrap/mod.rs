//! MAP estimation of a partially modulo-reduced Gaussian vector.
//!
//! Given u = (Π_B x) mod Δ for x ~ N(0, Σ), the estimate maximizes f_Σ over
//! all y with y_B ≡ u. Writing y = (h; u + Δb), the optimal h for fixed b is
//! Λ̂(u + Δb) with Λ̂ = −((Σ⁻¹)_AA)⁻¹(Σ⁻¹)_AB, and what remains is
//!
//!   min_b (u + Δb)ᵀ (Σ_BB)⁻¹ (u + Δb),
//!
//! because the Schur complement of (Σ⁻¹)_AA in Σ⁻¹ is (Σ_BB)⁻¹. With the
//! Cholesky factor G = (Σ_BB)⁻¹ = RᵀR this is a closest-vector problem for
//! the lattice ΔR·ℤ^{n−k} and target −Ru.

pub mod lattice;
mod oracle;

use nalgebra::{DMatrix, DVector};

pub use lattice::{ClosestVectors, Lattice, LatticePoint};
pub use oracle::{brute_force_estimate, BRUTE_FORCE_BUDGET};

use crate::code::centered_mod;
use crate::error::{Error, Result};
use crate::linalg::{blocks, max_abs, spd_inverse};
use crate::noise::GaussianDensity;

/// Maximum number of enumeration nodes per decode.
pub const SEARCH_BUDGET: u64 = 10_000_000;

/// Objectives within this distance count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// Exact-recovery tolerance used when k = 0.
pub const EXACT_RECOVERY_TOL: f64 = 1e-9;

/// Largest n − k accepted by the exact search.
pub const MAX_SEARCH_DIM: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    /// Sphere enumeration; the global optimum up to floating tolerance.
    #[default]
    Exact,
    /// Babai nearest-plane rounding only. Fast, not guaranteed optimal.
    Babai,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub x_hat: Vec<f64>,
    /// Integer shift with (Π_B x̂) = u + Δb.
    pub b: Vec<i64>,
    /// x̂ᵀΣ⁻¹x̂.
    pub objective: f64,
    /// Another b came within [`TIE_TOL`] of the optimum.
    pub tie: bool,
}

#[derive(Debug, Clone)]
pub struct UnwrapProblem {
    k: usize,
    delta: f64,
    density: GaussianDensity,
    lambda_hat: DMatrix<f64>,
    sigma_bb_inv: DMatrix<f64>,
    chol_r: DMatrix<f64>,
    lattice: Lattice,
}

impl UnwrapProblem {
    pub fn new(k: usize, delta: f64, density: GaussianDensity) -> Result<Self> {
        let n = density.dim();
        if k >= n {
            return Err(Error::Domain(format!("need 0 ≤ k < n, got k = {k}, n = {n}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        let m = n - k;
        if m > MAX_SEARCH_DIM {
            return Err(Error::Domain(format!(
                "exact search supports n − k ≤ {MAX_SEARCH_DIM}, got {m}"
            )));
        }
        let (p_aa, p_ab, _, _) = blocks(density.inverse(), k);
        let lambda_hat = if k == 0 {
            DMatrix::zeros(0, m)
        } else {
            -spd_inverse(&p_aa, "(Σ⁻¹)_AA")? * p_ab
        };
        let (_, _, _, s_bb) = blocks(density.covariance(), k);
        let sigma_bb_inv = spd_inverse(&s_bb, "Σ_BB")?;
        let chol = sigma_bb_inv
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("Cholesky factorization of (Σ_BB)⁻¹ failed".into()))?;
        let chol_r = chol.l().transpose();
        let lattice = Lattice::new(&chol_r * delta)?;
        Ok(Self {
            k,
            delta,
            density,
            lambda_hat,
            sigma_bb_inv,
            chol_r,
            lattice,
        })
    }

    pub fn n(&self) -> usize {
        self.density.dim()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn density(&self) -> &GaussianDensity {
        &self.density
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        self.density.covariance()
    }

    /// Λ̂ = −((Σ⁻¹)_AA)⁻¹(Σ⁻¹)_AB, k × (n − k).
    pub fn lambda_hat(&self) -> &DMatrix<f64> {
        &self.lambda_hat
    }

    /// (Σ_BB)⁻¹, the Gram matrix of the reduced integer search.
    pub fn sigma_bb_inverse(&self) -> &DMatrix<f64> {
        &self.sigma_bb_inv
    }

    /// max |(Σ⁻¹)_BB − (Σ⁻¹)_BA((Σ⁻¹)_AA)⁻¹(Σ⁻¹)_AB − (Σ_BB)⁻¹|.
    ///
    /// The decoder relies on this Schur identity; it is zero up to rounding.
    pub fn schur_identity_residual(&self) -> Result<f64> {
        let (p_aa, p_ab, p_ba, p_bb) = blocks(self.density.inverse(), self.k);
        let lhs = if self.k == 0 {
            p_bb
        } else {
            p_bb - p_ba * spd_inverse(&p_aa, "(Σ⁻¹)_AA")? * p_ab
        };
        Ok(max_abs(&(lhs - &self.sigma_bb_inv)))
    }

    fn check_syndrome(&self, u: &[f64]) -> Result<()> {
        let m = self.n() - self.k;
        if u.len() != m {
            return Err(Error::dim("syndrome", m, u.len()));
        }
        let half = 0.5 * self.delta;
        if let Some(v) = u.iter().find(|v| !(-half..half).contains(*v)) {
            return Err(Error::Domain(format!("syndrome entry {v} outside [−Δ/2, Δ/2)")));
        }
        Ok(())
    }

    /// (u + Δb)ᵀ(Σ_BB)⁻¹(u + Δb), the objective after optimizing h.
    pub fn reduced_objective(&self, u: &[f64], b: &[i64]) -> f64 {
        let y = self.shifted(u, b);
        y.dot(&(&self.sigma_bb_inv * &y))
    }

    fn shifted(&self, u: &[f64], b: &[i64]) -> DVector<f64> {
        DVector::from_iterator(u.len(), u.iter().zip(b).map(|(&ui, &bi)| ui + self.delta * bi as f64))
    }

    /// Full-space estimate (Λ̂y; y) for y = u + Δb.
    pub fn lift(&self, u: &[f64], b: &[i64]) -> Vec<f64> {
        let y = self.shifted(u, b);
        let h = &self.lambda_hat * &y;
        h.iter().chain(y.iter()).copied().collect()
    }

    fn result_for(&self, u: &[f64], b: Vec<i64>, tie: bool) -> Result<DecodeResult> {
        let x_hat = self.lift(u, &b);
        let objective = self.density.quadratic_form(&x_hat)?;
        Ok(DecodeResult {
            x_hat,
            b,
            objective,
            tie,
        })
    }

    pub fn map_estimate(&self, u: &[f64]) -> Result<DecodeResult> {
        self.map_estimate_with(u, SearchMode::Exact, SEARCH_BUDGET)
    }

    pub fn map_estimate_with(&self, u: &[f64], mode: SearchMode, budget: u64) -> Result<DecodeResult> {
        self.check_syndrome(u)?;
        let target: Vec<f64> = (-(&self.chol_r * DVector::from_row_slice(u))).iter().copied().collect();
        if mode == SearchMode::Babai {
            let p = self.lattice.babai(&target)?;
            return self.result_for(u, p.coeffs, false);
        }
        // scan slightly wider than the tie tolerance, then decide ties on
        // directly recomputed objectives
        let scale = self.reduced_objective(u, &vec![0; u.len()]).max(1.0);
        let found = self.lattice.closest(&target, 4.0 * TIE_TOL + 1e-12 * scale, budget)?;
        let scored: Vec<(f64, Vec<i64>)> = found
            .near
            .into_iter()
            .map(|p| (self.reduced_objective(u, &p.coeffs), p.coeffs))
            .collect();
        let best = scored.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
        let mut tied: Vec<&Vec<i64>> = scored
            .iter()
            .filter(|(v, _)| *v <= best + TIE_TOL)
            .map(|(_, b)| b)
            .collect();
        tied.sort();
        let tie = tied.len() > 1;
        self.result_for(u, tied[0].clone(), tie)
    }
}

/// Entrywise centered modulo into [−Δ/2, Δ/2).
pub fn modulo_reduce(x: &[f64], delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    Ok(x.iter().map(|&v| centered_mod(v, delta)).collect())
}

/// Success criterion ‖Π_A x_true − Π_A x̂‖ ≤ ε (closed ball).
///
/// For k = 0 the logical block is empty and success means exact recovery
/// of x within [`EXACT_RECOVERY_TOL`].
pub fn decode_success(p: &UnwrapProblem, x_true: &[f64], result: &DecodeResult, eps: f64) -> Result<bool> {
    let n = p.n();
    if x_true.len() != n {
        return Err(Error::dim("true vector", n, x_true.len()));
    }
    if result.x_hat.len() != n {
        return Err(Error::dim("estimate", n, result.x_hat.len()));
    }
    let diff = |range: std::ops::Range<usize>| {
        range
            .map(|i| (x_true[i] - result.x_hat[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    if p.k() == 0 {
        return Ok(diff(0..n) <= EXACT_RECOVERY_TOL);
    }
    Ok(diff(0..p.k()) <= eps)
}
