//! Closest-vector search on real lattices.
//!
//! The basis is LLL-reduced once (δ = 0.99) and factored as Q·R. Queries
//! run Schnorr–Euchner enumeration seeded with the Babai nearest-plane
//! point, and report every lattice point within a caller-chosen slack of
//! the optimum so that near-ties can be resolved deterministically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const LLL_DELTA: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct Lattice {
    basis: DMatrix<f64>,
    reduced: DMatrix<f64>,
    /// reduced = basis · transform
    transform: Vec<Vec<i64>>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

/// A lattice point in coefficients of the original basis, with its squared distance to the target.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePoint {
    pub coeffs: Vec<i64>,
    pub dist2: f64,
}

#[derive(Debug, Clone)]
pub struct ClosestVectors {
    pub best: LatticePoint,
    /// All points within the requested slack of the optimum (including `best`).
    pub near: Vec<LatticePoint>,
    pub nodes: u64,
}

impl Lattice {
    /// Lattice spanned by the columns of `basis` (n×m, rank m).
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (n, m) = basis.shape();
        if m == 0 || m > n {
            return Err(Error::Domain(format!("lattice basis must be n×m with 1 ≤ m ≤ n, got {n}×{m}")));
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("lattice basis has non-finite entries".into()));
        }
        let (reduced, transform) = lll_reduce(&basis)?;
        let qr = reduced.clone().qr();
        let mut q = qr.q();
        let mut r = qr.r();
        for i in 0..m {
            if r[(i, i)] < 0.0 {
                q.column_mut(i).neg_mut();
                r.row_mut(i).neg_mut();
            }
        }
        let scale = r.diagonal().iter().fold(0.0_f64, |a, &x| a.max(x));
        if r.diagonal().iter().any(|&d| !(d > 1e-13 * scale)) {
            return Err(Error::NumericalFailure("lattice basis is rank deficient".into()));
        }
        Ok(Self {
            basis,
            reduced,
            transform,
            q,
            r,
        })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn reduced_basis(&self) -> &DMatrix<f64> {
        &self.reduced
    }

    /// Lattice point for coefficients in the original basis.
    pub fn point(&self, coeffs: &[i64]) -> DVector<f64> {
        let c = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|&x| x as f64));
        &self.basis * c
    }

    fn to_original(&self, c: &[i64]) -> Vec<i64> {
        let m = c.len();
        (0..m)
            .map(|i| (0..m).map(|j| self.transform[i][j] * c[j]).sum())
            .collect()
    }

    fn project(&self, target: &[f64]) -> Result<(DVector<f64>, f64)> {
        if target.len() != self.ambient_dim() {
            return Err(Error::dim("lattice target", self.ambient_dim(), target.len()));
        }
        let t = DVector::from_row_slice(target);
        let y = self.q.transpose() * &t;
        let residual = (&t - &self.q * &y).norm_squared();
        Ok((y, residual))
    }

    fn babai_reduced(&self, y: &DVector<f64>) -> (Vec<i64>, f64) {
        let m = self.rank();
        let mut c = vec![0i64; m];
        let mut dist = 0.0;
        for l in (0..m).rev() {
            let mut s = y[l];
            for j in l + 1..m {
                s -= self.r[(l, j)] * c[j] as f64;
            }
            let center = s / self.r[(l, l)];
            c[l] = center.round() as i64;
            let e = self.r[(l, l)] * (c[l] as f64 - center);
            dist += e * e;
        }
        (c, dist)
    }

    /// Babai nearest-plane approximation (on the reduced basis).
    pub fn babai(&self, target: &[f64]) -> Result<LatticePoint> {
        let (y, residual) = self.project(target)?;
        let (c, dist) = self.babai_reduced(&y);
        Ok(LatticePoint {
            coeffs: self.to_original(&c),
            dist2: dist + residual,
        })
    }

    /// Exact closest lattice point to `target`, plus every point within `slack` of it.
    ///
    /// Fails with [`Error::SearchBudgetExceeded`] once more than `budget`
    /// enumeration nodes have been visited.
    pub fn closest(&self, target: &[f64], slack: f64, budget: u64) -> Result<ClosestVectors> {
        let (y, residual) = self.project(target)?;
        let (_, babai_dist) = self.babai_reduced(&y);
        let mut search = Search {
            r: &self.r,
            y: &y,
            slack: slack.max(0.0),
            budget,
            nodes: 0,
            best: babai_dist * (1.0 + 1e-12) + 1e-300,
            found: false,
            coeffs: vec![0; self.rank()],
            near: Vec::new(),
        };
        search.descend(self.rank() - 1, 0.0)?;
        if !search.found {
            return Err(Error::NumericalFailure("enumeration missed the Babai point".into()));
        }
        let best_dist = search.best;
        let mut near: Vec<LatticePoint> = search
            .near
            .into_iter()
            .map(|(c, d)| LatticePoint {
                coeffs: self.to_original(&c),
                dist2: d + residual,
            })
            .collect();
        near.sort_by(|a, b| a.dist2.total_cmp(&b.dist2).then_with(|| a.coeffs.cmp(&b.coeffs)));
        let best = near
            .iter()
            .find(|p| p.dist2 <= best_dist + residual)
            .cloned()
            .unwrap_or_else(|| near[0].clone());
        Ok(ClosestVectors {
            best,
            near,
            nodes: search.nodes,
        })
    }

    /// Squared distance from `target` to the lattice.
    pub fn distance2(&self, target: &[f64], budget: u64) -> Result<f64> {
        Ok(self.closest(target, 0.0, budget)?.best.dist2)
    }
}

struct Search<'a> {
    r: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    slack: f64,
    budget: u64,
    nodes: u64,
    best: f64,
    found: bool,
    coeffs: Vec<i64>,
    near: Vec<(Vec<i64>, f64)>,
}

impl Search<'_> {
    fn bound(&self) -> f64 {
        self.best + self.slack
    }

    fn descend(&mut self, level: usize, partial: f64) -> Result<()> {
        let m = self.coeffs.len();
        let mut s = self.y[level];
        for j in level + 1..m {
            s -= self.r[(level, j)] * self.coeffs[j] as f64;
        }
        let rll = self.r[(level, level)];
        let center = s / rll;
        let c0 = center.round();
        let dir = if center >= c0 { 1.0 } else { -1.0 };
        // zigzag: two monotone cursors moving away from the center
        let mut up = c0;
        let mut down = c0 - dir;
        loop {
            let du = partial + (rll * (up - center)).powi(2);
            let dd = partial + (rll * (down - center)).powi(2);
            let (c, d, take_up) = if du <= dd { (up, du, true) } else { (down, dd, false) };
            if d > self.bound() {
                break;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::SearchBudgetExceeded { budget: self.budget });
            }
            self.coeffs[level] = c as i64;
            if level == 0 {
                self.leaf(d);
            } else {
                self.descend(level - 1, d)?;
            }
            if take_up {
                up += dir;
            } else {
                down -= dir;
            }
        }
        Ok(())
    }

    fn leaf(&mut self, d: f64) {
        if !self.found || d < self.best {
            self.best = d;
            self.found = true;
            let bound = self.bound();
            self.near.retain(|(_, v)| *v <= bound);
        }
        if d <= self.bound() {
            self.near.push((self.coeffs.clone(), d));
        }
    }
}

/// LLL reduction of the columns of `basis`; returns (reduced, U) with reduced = basis·U.
fn lll_reduce(basis: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<Vec<i64>>)> {
    let m = basis.ncols();
    let mut b = basis.clone();
    let mut u: Vec<Vec<i64>> = (0..m)
        .map(|i| (0..m).map(|j| i64::from(i == j)).collect())
        .collect();
    let (mut bstar, mut mu) = gram_schmidt(&b);
    let mut k = 1;
    let mut iterations = 0usize;
    while k < m {
        iterations += 1;
        if iterations > 100_000 {
            return Err(Error::NumericalFailure("LLL reduction did not converge".into()));
        }
        for j in (0..k).rev() {
            let q = mu[(k, j)].round();
            if q != 0.0 {
                let col_j = b.column(j).into_owned();
                let mut col_k = b.column_mut(k);
                col_k -= col_j * q;
                let qi = q as i64;
                for row in u.iter_mut() {
                    row[k] -= qi * row[j];
                }
                for i in 0..j {
                    mu[(k, i)] -= q * mu[(j, i)];
                }
                mu[(k, j)] -= q;
            }
        }
        if bstar[k] >= (LLL_DELTA - mu[(k, k - 1)].powi(2)) * bstar[k - 1] {
            k += 1;
        } else {
            b.swap_columns(k, k - 1);
            for row in u.iter_mut() {
                row.swap(k, k - 1);
            }
            (bstar, mu) = gram_schmidt(&b);
            k = (k - 1).max(1);
        }
    }
    Ok((b, u))
}

/// Squared Gram–Schmidt norms and μ coefficients of the columns.
fn gram_schmidt(b: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = b.ncols();
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut norms = Vec::with_capacity(m);
    let mut mu = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut v = b.column(i).into_owned();
        for j in 0..i {
            let coef = b.column(i).dot(&ortho[j]) / norms[j];
            mu[(i, j)] = coef;
            v -= &ortho[j] * coef;
        }
        mu[(i, i)] = 1.0;
        norms.push(v.norm_squared());
        ortho.push(v);
    }
    (norms, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::gaussian_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_closest(basis: &DMatrix<f64>, t: &[f64], range: i64) -> f64 {
        let m = basis.ncols();
        let t = DVector::from_row_slice(t);
        let mut best = f64::INFINITY;
        let count = (2 * range + 1).pow(m as u32);
        for idx in 0..count {
            let mut rem = idx;
            let c = DVector::from_fn(m, |_, _| {
                let v = rem % (2 * range + 1) - range;
                rem /= 2 * range + 1;
                v as f64
            });
            best = best.min((basis * c - &t).norm_squared());
        }
        best
    }

    #[test]
    fn lll_keeps_the_lattice() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let b = gaussian_matrix(&mut rng, 4, 4);
            let lat = Lattice::new(b.clone()).unwrap();
            let u = DMatrix::from_fn(4, 4, |i, j| lat.transform[i][j] as f64);
            assert!((&b * &u - lat.reduced_basis()).abs().max() < 1e-9);
            assert!((u.determinant().abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn closest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for trial in 0..200 {
            let m = 1 + trial % 3;
            let b = gaussian_matrix(&mut rng, m, m) + DMatrix::<f64>::identity(m, m) * 2.0;
            let lat = Lattice::new(b.clone()).unwrap();
            let t: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
            let got = lat.closest(&t, 0.0, 1_000_000).unwrap();
            let p = lat.point(&got.best.coeffs);
            let d = (p - DVector::from_row_slice(&t)).norm_squared();
            assert!((d - got.best.dist2).abs() < 1e-9);
            let want = brute_closest(&b, &t, 8);
            assert!(got.best.dist2 <= want + 1e-9, "trial {trial}: {} vs {want}", got.best.dist2);
            if got.best.coeffs.iter().all(|c| c.abs() <= 8) {
                assert!((got.best.dist2 - want).abs() < 1e-9, "trial {trial}");
            }
        }
    }

    #[test]
    fn reports_exact_ties() {
        // integer lattice, target halfway between two points
        let lat = Lattice::new(DMatrix::<f64>::identity(2, 2)).unwrap();
        let got = lat.closest(&[0.5, 0.0], 1e-9, 1000).unwrap();
        let mut coeffs: Vec<Vec<i64>> = got.near.iter().map(|p| p.coeffs.clone()).collect();
        coeffs.sort();
        assert_eq!(coeffs, vec![vec![0, 0], vec![1, 0]]);
    }

    #[test]
    fn non_square_basis_includes_residual() {
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let lat = Lattice::new(b).unwrap();
        let got = lat.closest(&[2.2, 1.0, 0.0], 0.0, 1000).unwrap();
        assert_eq!(got.best.coeffs, vec![2]);
        assert!((got.best.dist2 - (0.04 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let lat = Lattice::new(DMatrix::<f64>::identity(3, 3)).unwrap();
        assert!(matches!(
            lat.closest(&[0.5, 0.5, 0.5], 10.0, 50),
            Err(Error::SearchBudgetExceeded { budget: 50 })
        ));
    }

    #[test]
    fn rank_deficient_rejected() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(Lattice::new(b).is_err());
    }
}
