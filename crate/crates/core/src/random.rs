//! Random test instances: orthogonal and symplectic matrices, SPD covariances.
//!
//! The orthogonal-symplectic generator maps a random unitary (from the QR
//! factorization of a complex Gaussian matrix) to its real phase-space form.
//! It always lands in the orthogonal symplectic group but makes no claim of
//! uniformity over it.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::symplectic::{SymplecticMatrix, DEFAULT_TOL_SYMP};

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix (Haar with the sign fix).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric positive definite matrix with eigenvalues log-uniform in `[lo, hi]`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.random_range(llo..=lhi).exp()
        } else {
            0.0
        }
    });
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<Complex<f64>> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        if norm > 0.0 {
            let phase = d / norm;
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Real 2N×2N phase-space image of a random N×N unitary, ordering (Q₁,P₁,…).
pub fn random_orthogonal_symplectic<R: Rng + ?Sized>(rng: &mut R, modes: usize) -> SymplecticMatrix {
    let u = random_unitary(rng, modes);
    let mut s = DMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        for k in 0..modes {
            let c = u[(j, k)];
            s[(2 * j, 2 * k)] = c.re;
            s[(2 * j, 2 * k + 1)] = -c.im;
            s[(2 * j + 1, 2 * k)] = c.im;
            s[(2 * j + 1, 2 * k + 1)] = c.re;
        }
    }
    SymplecticMatrix::new(s, DEFAULT_TOL_SYMP).expect("unitary image is symplectic")
}

/// Random symplectic matrix O₁·Z·O₂, returning it with the squeezing values z_j used.
///
/// Each z_j is log-uniform in `[1/z_max, z_max]`.
pub fn random_symplectic<R: Rng + ?Sized>(
    rng: &mut R,
    modes: usize,
    z_max: f64,
) -> (SymplecticMatrix, Vec<f64>) {
    let o1 = random_orthogonal_symplectic(rng, modes);
    let o2 = random_orthogonal_symplectic(rng, modes);
    let lz = z_max.ln();
    let z: Vec<f64> = (0..modes).map(|_| rng.random_range(-lz..=lz).exp()).collect();
    let zm = SymplecticMatrix::squeezer(&z).expect("positive squeezing values");
    let s = o1.matrix() * zm.matrix() * o2.matrix();
    (
        SymplecticMatrix::new(s, DEFAULT_TOL_SYMP).expect("product of symplectic matrices"),
        z,
    )
}
