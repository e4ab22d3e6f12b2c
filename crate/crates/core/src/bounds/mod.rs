//! Analytic upper bounds on the decoding success probability.
//!
//! For a code with encoder S, the success probability at noise σ and
//! tolerance ε is at most the standard-normal mass of a 2K-dimensional ball
//! of radius ε·sq(S)/σ. The unwrapping form of the same statement uses
//! λ_min(Σ) in place of σ²/sq(S)², and a sharper variant uses the Schur
//! complement Σ* = Σ_AA − Σ_AB(Σ_BB)⁻¹Σ_BA, whose smallest eigenvalue is
//! never below λ_min(Σ).

pub mod geometry;
pub mod lemmas;

use nalgebra::DMatrix;
use libm::{erfc, lgamma};

use crate::code::OscillatorCode;
use crate::error::{Error, Result};
use crate::linalg::{blocks, lambda_min, spd_inverse, symmetrize};
use crate::unwrap::UnwrapProblem;

pub use geometry::{DegenerateVoronoiGeometry, Membership};

/// Pr(‖Z‖ ≤ r) for Z ~ N(0, I_dim), i.e. the regularized incomplete gamma P(dim/2, r²/2).
pub fn ball_mass(dim: usize, radius: f64) -> Result<f64> {
    if dim == 0 {
        return Err(Error::Domain("ball mass needs dim ≥ 1".into()));
    }
    if !(radius >= 0.0) {
        return Err(Error::Domain(format!("radius must be non-negative, got {radius}")));
    }
    if radius == 0.0 {
        return Ok(0.0);
    }
    if radius.is_infinite() {
        return Ok(1.0);
    }
    let x = 0.5 * radius * radius;
    let a = 0.5 * dim as f64;
    let p = if dim == 2 {
        -(-x).exp_m1()
    } else if x < a + 1.0 {
        lower_gamma_series(a, x)
    } else {
        1.0 - upper_gamma_half_integer(dim, x)
    };
    Ok(p.clamp(0.0, 1.0))
}

/// P(a, x) = x^a e^{−x}/Γ(a+1) · Σ_{n≥0} x^n/((a+1)⋯(a+n)); converges fast for x < a + 1.
fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut d = a;
    while term > 1e-17 * sum {
        d += 1.0;
        term *= x / d;
        sum += term;
    }
    (a * x.ln() - x - lgamma(a + 1.0)).exp() * sum
}

/// Q(dim/2, x) as a finite sum of positive terms.
///
/// Even dim: e^{−x} Σ_{m<a} x^m/m!. Odd dim: erfc(√x) + e^{−x} Σ_{j<a−½} x^{j+½}/Γ(j+3/2).
fn upper_gamma_half_integer(dim: usize, x: f64) -> f64 {
    let ex = (-x).exp();
    if dim % 2 == 0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..dim / 2 {
            term *= x / m as f64;
            sum += term;
        }
        ex * sum
    } else {
        let mut term = 2.0 * (x / std::f64::consts::PI).sqrt();
        let mut sum = 0.0;
        for j in 0..(dim - 1) / 2 {
            sum += term;
            term *= x / (j as f64 + 1.5);
        }
        erfc(x.sqrt()) + ex * sum
    }
}

/// ball_mass(2K, ε·sq(S)/σ).
pub fn theorem_bound(code: &OscillatorCode, sigma: f64, eps: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    check_positive("eps", eps)?;
    code.covariance(sigma)?;
    ball_mass(2 * code.k_logical(), eps * code.squeezing_measure() / sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollaryBounds {
    /// ball_mass(k, ε/√λ_min(Σ)).
    pub plain: f64,
    /// ball_mass(k, ε/√λ_min(Σ*)).
    pub schur: f64,
    pub lambda_min_sigma: f64,
    pub lambda_min_schur: f64,
}

/// Both forms of the unwrapping bound; undefined for k = 0.
pub fn corollary_bound(p: &UnwrapProblem, eps: f64) -> Result<CorollaryBounds> {
    check_positive("eps", eps)?;
    let k = p.k();
    if k == 0 {
        return Err(Error::Domain("the success-probability bound needs k ≥ 1".into()));
    }
    let lambda_min_sigma = lambda_min(p.covariance());
    let lambda_min_schur = lambda_min(&schur_complement(p.covariance(), k)?);
    Ok(CorollaryBounds {
        plain: ball_mass(k, eps / lambda_min_sigma.sqrt())?,
        schur: ball_mass(k, eps / lambda_min_schur.sqrt())?,
        lambda_min_sigma,
        lambda_min_schur,
    })
}

/// Σ* = Σ_AA − Σ_AB(Σ_BB)⁻¹Σ_BA.
pub fn schur_complement(sigma: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::dim("covariance (square)", n, sigma.ncols()));
    }
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("block split needs 0 < k < n, got k = {k}, n = {n}")));
    }
    let (aa, ab, ba, bb) = blocks(sigma, k);
    let bb_inv = spd_inverse(&bb, "Σ_BB")?;
    Ok(symmetrize(&(aa - ab * bb_inv * ba)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurEigenCheck {
    pub lambda_min_sigma: f64,
    pub lambda_min_schur: f64,
    pub holds: bool,
}

/// Checks λ_min(Σ*) ≥ λ_min(Σ) − 1e-9.
pub fn check_schur_eigen_bound(sigma: &DMatrix<f64>, k: usize) -> Result<SchurEigenCheck> {
    let lambda_min_sigma = lambda_min(sigma);
    let lambda_min_schur = lambda_min(&schur_complement(sigma, k)?);
    Ok(SchurEigenCheck {
        lambda_min_sigma,
        lambda_min_schur,
        holds: lambda_min_schur >= lambda_min_sigma - 1e-9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub eps: f64,
    pub theorem_bound: f64,
    pub corollary_bound: f64,
    pub schur_bound: f64,
    pub lambda_min_sigma: f64,
    pub lambda_min_schur: f64,
    pub sq_u: f64,
}

pub fn bound_report(code: &OscillatorCode, sigma: f64, eps: f64) -> Result<BoundReport> {
    let problem = code.unwrap_problem(sigma)?;
    let c = corollary_bound(&problem, eps)?;
    Ok(BoundReport {
        eps,
        theorem_bound: theorem_bound(code, sigma, eps)?,
        corollary_bound: c.plain,
        schur_bound: c.schur,
        lambda_min_sigma: c.lambda_min_sigma,
        lambda_min_schur: c.lambda_min_schur,
        sq_u: code.squeezing_measure(),
    })
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}
