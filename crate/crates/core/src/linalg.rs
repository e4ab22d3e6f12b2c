//! Small dense linear-algebra helpers shared by the numeric modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues in ascending order.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).0[0]
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    let (v, _) = sym_eigen(m);
    v[v.len() - 1]
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure(format!("Cholesky factorization of {what} failed")))?;
    Ok(symmetrize(&chol.inverse()))
}

/// f(Σ) = V diag(f(λ)) Vᵀ for symmetric positive definite Σ, refusing eigenvalues below `floor`.
pub fn spd_function(m: &DMatrix<f64>, floor: f64, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen(m);
    if vals[0] < floor {
        return Err(Error::NumericalFailure(format!(
            "eigenvalue {:e} below floor {floor:e}",
            vals[0]
        )));
    }
    let d = DMatrix::from_diagonal(&vals.map(f));
    Ok(symmetrize(&(&vecs * d * vecs.transpose())))
}

/// Splits an n×n matrix at index k into (AA, AB, BA, BB).
pub fn blocks(
    m: &DMatrix<f64>,
    k: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let r = n - k;
    (
        m.view((0, 0), (k, k)).into_owned(),
        m.view((0, k), (k, r)).into_owned(),
        m.view((k, 0), (r, k)).into_owned(),
        m.view((k, k), (r, r)).into_owned(),
    )
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_ascending() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (v, _) = sym_eigen(&m);
        assert!((v[0] - 1.0).abs() < 1e-14);
        assert!((v[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn spd_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = spd_function(&m, 1e-12, f64::sqrt).unwrap();
        assert!(max_abs(&(&s * &s - &m)) < 1e-12);
    }

    #[test]
    fn spd_inverse_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(spd_inverse(&m, "test").is_err());
    }
}
