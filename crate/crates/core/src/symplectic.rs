//! Real symplectic matrices in the quadrature ordering (Q₁,P₁,…,Q_N,P_N).
//!
//! A [`SymplecticMatrix`] is the phase-space action of a Gaussian unitary:
//! it satisfies SᵀJS = J where J is block diagonal with 2×2 blocks
//! `[[0, 1], [-1, 0]]`. The squeezing measure of the unitary is
//! √λ_max(SᵀS), which coincides with the largest single-mode squeezing
//! factor of the Euler decomposition S = O₁·Z·O₂.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, sym_eigen};

pub const DEFAULT_TOL_SYMP: f64 = 1e-9;
pub const DEFAULT_TOL_RECON: f64 = 1e-8;

/// The standard symplectic form J for `modes` modes.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * modes, 2 * modes);
    for m in 0..modes {
        j[(2 * m, 2 * m + 1)] = 1.0;
        j[(2 * m + 1, 2 * m)] = -1.0;
    }
    j
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    modes: usize,
    entries: DMatrix<f64>,
}

/// Checks that `m` is a 2N×2N symplectic matrix to within `tol`.
pub fn validate_symplectic(m: DMatrix<f64>, tol: f64) -> Result<SymplecticMatrix> {
    SymplecticMatrix::new(m, tol)
}

impl SymplecticMatrix {
    pub fn new(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
        }
        if m.nrows() != m.ncols() {
            return Err(Error::dim("symplectic matrix (square)", m.nrows(), m.ncols()));
        }
        let dim = m.nrows();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Domain(format!(
                "symplectic matrix needs positive even dimension, got {dim}"
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let modes = dim / 2;
        let j = symplectic_form(modes);
        let deviation = max_abs(&(m.transpose() * &j * &m - &j));
        if deviation > tol {
            return Err(Error::NotSymplectic { deviation, tol });
        }
        if (m.transpose() * &m).cholesky().is_none() {
            return Err(Error::NumericalFailure("SᵀS is not positive definite".into()));
        }
        Ok(Self { modes, entries: m })
    }

    pub fn identity(modes: usize) -> Self {
        Self {
            modes,
            entries: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    /// diag(z₁, 1/z₁, …, z_N, 1/z_N).
    pub fn squeezer(z: &[f64]) -> Result<Self> {
        if z.is_empty() || z.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::Domain("squeezing values must be positive and finite".into()));
        }
        let diag: Vec<f64> = z.iter().flat_map(|&x| [x, 1.0 / x]).collect();
        Ok(Self {
            modes: z.len(),
            entries: DMatrix::from_diagonal(&DVector::from_vec(diag)),
        })
    }

    /// Two-mode squeezer of gain g: √g·I₂ on the diagonal blocks and
    /// √(g−1)·diag(1, −1) on the off-diagonal blocks.
    pub fn two_mode_squeezer(gain: f64) -> Result<Self> {
        if !(gain >= 1.0) || !gain.is_finite() {
            return Err(Error::Domain(format!("gain must be >= 1, got {gain}")));
        }
        let c = gain.sqrt();
        let s = (gain - 1.0).sqrt();
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            c,   0.0, s,   0.0,
            0.0, c,   0.0, -s,
            s,   0.0, c,   0.0,
            0.0, -s,  0.0, c,
        ]);
        Self::new(m, DEFAULT_TOL_SYMP)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        2 * self.modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// S⁻¹ = −J Sᵀ J.
    pub fn inverse(&self) -> Self {
        let j = symplectic_form(self.modes);
        Self {
            modes: self.modes,
            entries: -(&j * self.entries.transpose() * &j),
        }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.modes != other.modes {
            return Err(Error::dim("compose", self.dim(), other.dim()));
        }
        Self::new(&self.entries * &other.entries, DEFAULT_TOL_SYMP)
    }

    /// sq(U_S) = √λ_max(SᵀS).
    pub fn squeezing_measure(&self) -> f64 {
        let (vals, _) = sym_eigen(&(self.entries.transpose() * &self.entries));
        vals[vals.len() - 1].sqrt()
    }

    pub fn euler_decompose(&self) -> Result<EulerDecomposition> {
        self.euler_decompose_with(DEFAULT_TOL_SYMP, DEFAULT_TOL_RECON)
    }

    /// Euler decomposition S = O₁·Z·O₂.
    ///
    /// Eigenvectors of SSᵀ are paired as (v, Jᵀv), which maps the eigenvalue
    /// z² to 1/z². Vectors are taken in descending eigenvalue order and
    /// orthogonalized against earlier pairs, which only has an effect inside
    /// degenerate clusters around 1. Then O₁ = W and O₂ = Z⁻¹WᵀS.
    pub fn euler_decompose_with(&self, tol_symp: f64, tol_recon: f64) -> Result<EulerDecomposition> {
        let n = self.modes;
        let dim = 2 * n;
        let s = &self.entries;
        let gram = s * s.transpose();
        let (_, vecs) = sym_eigen(&gram);
        let j = symplectic_form(n);
        let jt = j.transpose();

        let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(dim);
        let mut w = DMatrix::zeros(dim, dim);
        let mut z = Vec::with_capacity(n);
        for idx in (0..dim).rev() {
            if z.len() == n {
                break;
            }
            let mut v: DVector<f64> = vecs.column(idx).into_owned();
            // two passes of Gram-Schmidt for stability
            for _ in 0..2 {
                for c in &chosen {
                    let p = c.dot(&v);
                    v -= c * p;
                }
            }
            let nv = v.norm();
            if nv < 1e-6 {
                continue;
            }
            v /= nv;
            let partner = &jt * &v;
            let rayleigh = v.dot(&(&gram * &v));
            let zj = rayleigh.max(f64::MIN_POSITIVE).sqrt();
            let col = 2 * z.len();
            w.set_column(col, &v);
            w.set_column(col + 1, &partner);
            chosen.push(v);
            chosen.push(partner);
            z.push(zj);
        }
        if z.len() != n {
            return Err(Error::NumericalFailure(
                "could not build a symplectic eigenbasis of SSᵀ".into(),
            ));
        }
        let zinv: Vec<f64> = z.iter().flat_map(|&x| [1.0 / x, x]).collect();
        let zinv = DMatrix::from_diagonal(&DVector::from_vec(zinv));
        let o2 = zinv * w.transpose() * s;
        let dec = EulerDecomposition { o1: w, z, o2 };

        let id = DMatrix::<f64>::identity(dim, dim);
        let orth = max_abs(&(dec.o1.transpose() * &dec.o1 - &id))
            .max(max_abs(&(dec.o2.transpose() * &dec.o2 - &id)));
        let symp = max_abs(&(dec.o1.transpose() * &j * &dec.o1 - &j))
            .max(max_abs(&(dec.o2.transpose() * &j * &dec.o2 - &j)));
        let recon = max_abs(&(dec.recompose() - s));
        if orth > tol_symp || symp > tol_symp || recon > tol_recon {
            return Err(Error::NumericalFailure(format!(
                "Euler decomposition off tolerance: orthogonality {orth:e}, symplecticity {symp:e}, reconstruction {recon:e}"
            )));
        }
        Ok(dec)
    }

    /// Parses the plain-text matrix format: a line with N, then 2N rows of 2N floats.
    pub fn from_text(text: &str, tol: f64) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let modes: usize = header
            .parse()
            .map_err(|_| Error::Parse(format!("bad mode count line {header:?}")))?;
        if modes == 0 {
            return Err(Error::Parse("mode count must be positive".into()));
        }
        let dim = 2 * modes;
        let mut data = Vec::with_capacity(dim * dim);
        for row in 0..dim {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("expected {dim} rows, found {row}")))?;
            let vals: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
            if vals.len() != dim {
                return Err(Error::Parse(format!(
                    "row {} has {} entries, expected {dim}",
                    row + 1,
                    vals.len()
                )));
            }
            data.extend(vals);
        }
        if lines.next().is_some() {
            return Err(Error::Parse(format!("trailing content after {dim} rows")));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, &data), tol)
    }

    /// Writes the text format with 17 significant digits per entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.modes);
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|c| format!("{:.16e}", self.entries[(r, c)]))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn load(path: &Path, tol: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_text(&text, tol)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct EulerDecomposition {
    pub o1: DMatrix<f64>,
    /// One squeezing value per mode; Z = diag(z₁, 1/z₁, …).
    pub z: Vec<f64>,
    pub o2: DMatrix<f64>,
}

impl EulerDecomposition {
    pub fn z_matrix(&self) -> DMatrix<f64> {
        let diag: Vec<f64> = self.z.iter().flat_map(|&x| [x, 1.0 / x]).collect();
        DMatrix::from_diagonal(&DVector::from_vec(diag))
    }

    pub fn recompose(&self) -> DMatrix<f64> {
        &self.o1 * self.z_matrix() * &self.o2
    }

    /// max_j max(z_j, 1/z_j).
    pub fn max_squeezing(&self) -> f64 {
        self.z.iter().fold(1.0_f64, |acc, &x| acc.max(x).max(1.0 / x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_orthogonal_symplectic, random_symplectic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn validates_identity_and_squeezer() {
        let s = validate_symplectic(DMatrix::identity(4, 4), 1e-9).unwrap();
        assert_eq!(s.modes(), 2);
        let s = validate_symplectic(diag(&[3.0, 1.0 / 3.0]), 1e-9).unwrap();
        assert_eq!(s.modes(), 1);
    }

    #[test]
    fn rejects_non_symplectic_and_odd() {
        match validate_symplectic(diag(&[3.0, 3.0]), 1e-9) {
            Err(Error::NotSymplectic { deviation, .. }) => assert!((deviation - 8.0).abs() < 1e-12),
            other => panic!("expected NotSymplectic, got {other:?}"),
        }
        assert!(matches!(
            validate_symplectic(DMatrix::identity(3, 3), 1e-9),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn squeezing_measure_examples() {
        assert!((SymplecticMatrix::identity(3).squeezing_measure() - 1.0).abs() < 1e-12);
        let s = SymplecticMatrix::squeezer(&[3.0]).unwrap();
        assert!((s.squeezing_measure() - 3.0).abs() < 1e-12);
        let t = SymplecticMatrix::two_mode_squeezer(2.0).unwrap();
        assert!((t.squeezing_measure() - (2f64.sqrt() + 1.0)).abs() < 1e-12);
        let t = SymplecticMatrix::two_mode_squeezer(4.0).unwrap();
        assert!((t.squeezing_measure() - (2.0 + 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn two_mode_squeezer_entries() {
        assert_eq!(
            SymplecticMatrix::two_mode_squeezer(1.0).unwrap().matrix(),
            &DMatrix::<f64>::identity(4, 4)
        );
        let t = SymplecticMatrix::two_mode_squeezer(2.0).unwrap();
        let m = t.matrix();
        assert_eq!(m[(0, 0)], 2f64.sqrt());
        assert_eq!(m[(0, 2)], 1.0);
        assert_eq!(m[(1, 3)], -1.0);
        assert_eq!(m[(3, 1)], -1.0);
        let j = symplectic_form(2);
        assert!(max_abs(&(m.transpose() * &j * m - &j)) < 1e-12);
        assert!(SymplecticMatrix::two_mode_squeezer(0.5).is_err());
    }

    #[test]
    fn two_mode_squeezer_measure_formula() {
        for g in [1.0, 1.5, 2.0, 4.0, 10.0] {
            let t = SymplecticMatrix::two_mode_squeezer(g).unwrap();
            let expected = g.sqrt() + (g - 1.0).sqrt();
            assert!((t.squeezing_measure() - expected).abs() < 1e-9, "g={g}");
        }
    }

    #[test]
    fn compose_examples() {
        let a = SymplecticMatrix::squeezer(&[2.0]).unwrap();
        let b = SymplecticMatrix::squeezer(&[3.0]).unwrap();
        let c = a.compose(&b).unwrap();
        assert!(max_abs(&(c.matrix() - diag(&[6.0, 1.0 / 6.0]))) < 1e-15);
        let id = SymplecticMatrix::identity(1);
        assert_eq!(a.compose(&id).unwrap().matrix(), a.matrix());
        assert!(a.compose(&SymplecticMatrix::identity(2)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (s, _) = random_symplectic(&mut rng, 3, 5.0);
        let inv = s.matrix().clone().try_inverse().unwrap();
        let prod = s.compose(&SymplecticMatrix::new(inv, 1e-8).unwrap()).unwrap();
        assert!(max_abs(&(prod.matrix() - DMatrix::<f64>::identity(6, 6))) < 1e-9);
        assert!(max_abs(&(s.inverse().matrix() * s.matrix() - DMatrix::<f64>::identity(6, 6))) < 1e-9);
    }

    #[test]
    fn euler_identity_and_squeezer() {
        let d = SymplecticMatrix::identity(2).euler_decompose().unwrap();
        assert!(d.z.iter().all(|&z| (z - 1.0).abs() < 1e-12));
        assert!(max_abs(&(&d.o1 * &d.o2 - DMatrix::<f64>::identity(4, 4))) < 1e-12);

        let d = SymplecticMatrix::squeezer(&[5.0]).unwrap().euler_decompose().unwrap();
        assert!((d.max_squeezing() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn euler_handles_degenerate_clusters() {
        // one squeezed mode, one unsqueezed, mixed by orthogonal symplectics
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let o1 = random_orthogonal_symplectic(&mut rng, 3);
        let o2 = random_orthogonal_symplectic(&mut rng, 3);
        let z = SymplecticMatrix::squeezer(&[1.0, 2.5, 1.0]).unwrap();
        let s = SymplecticMatrix::new(o1.matrix() * z.matrix() * o2.matrix(), 1e-9).unwrap();
        let d = s.euler_decompose().unwrap();
        assert!(max_abs(&(d.recompose() - s.matrix())) < 1e-10);
        assert!((d.max_squeezing() - 2.5).abs() < 1e-10);
    }

    #[test]
    fn euler_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..1000 {
            let modes = 1 + i % 6;
            let (s, z) = random_symplectic(&mut rng, modes, 10.0);
            let d = s.euler_decompose().unwrap();
            assert!(max_abs(&(d.recompose() - s.matrix())) <= DEFAULT_TOL_RECON);
            let truth = z.iter().fold(1.0_f64, |a, &x| a.max(x).max(1.0 / x));
            assert!((d.max_squeezing() - truth).abs() < 1e-8);
            assert!((d.max_squeezing() - s.squeezing_measure()).abs() < 1e-8);
        }
    }

    #[test]
    fn squeezing_invariant_under_orthogonal_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let (s, _) = random_symplectic(&mut rng, 3, 4.0);
            let o = random_orthogonal_symplectic(&mut rng, 3);
            let os = o.compose(&s).unwrap();
            assert!((os.squeezing_measure() - s.squeezing_measure()).abs() < 1e-9);
        }
    }

    #[test]
    fn squeezing_is_one_iff_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let o = random_orthogonal_symplectic(&mut rng, 4);
        assert!((o.squeezing_measure() - 1.0).abs() < 1e-9);
        let (s, _) = random_symplectic(&mut rng, 4, 3.0);
        assert!(s.squeezing_measure() > 1.0 + 1e-9);
    }

    #[test]
    fn text_format_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (s, _) = random_symplectic(&mut rng, 2, 3.0);
        let text = s.to_text();
        assert!(text.starts_with("2\n"));
        let back = SymplecticMatrix::from_text(&text, DEFAULT_TOL_SYMP).unwrap();
        assert_eq!(back.matrix(), s.matrix());
    }

    #[test]
    fn text_format_errors() {
        assert!(matches!(SymplecticMatrix::from_text("", 1e-9), Err(Error::Parse(_))));
        assert!(matches!(
            SymplecticMatrix::from_text("1\n1 0\n", 1e-9),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            SymplecticMatrix::from_text("1\n1 0\n0 x\n", 1e-9),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            SymplecticMatrix::from_text("1\n3 0\n0 3\n", 1e-9),
            Err(Error::NotSymplectic { .. })
        ));
    }
}
