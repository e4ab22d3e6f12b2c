//! Degenerate Voronoi cell of Λ(ℝ^k × Δℤ^{n−k}) with Λ = Σ^{−1/2}, and the
//! polytope P_Λ that contains it.
//!
//! z lies in the degenerate cell V_Λ iff ‖z‖ ≤ ‖z − Λ(h; Δb)‖ for every real
//! h and integer b. Taking b = 0 forces ⟨Λe_j, z⟩ = 0 for j ≤ k. For such z,
//! minimizing over h projects away span{Λe_1..Λe_k}, so with P⊥ the
//! orthogonal projector onto the complement,
//!
//!   min_h ‖z − Λ(h; Δb)‖² = ‖z − ΔP⊥Λ_{:,B} b‖²,
//!
//! and membership becomes "z is a closest point of the lattice ΔP⊥Λ_{:,B}ℤ^{n−k}
//! to itself". Only lattice vectors of length ≤ 2‖z‖ can beat the origin, so
//! the relevant shifts satisfy ‖b‖₂ ≤ 2‖z‖/(Δ·s_min(P⊥Λ_{:,B})) (see
//! [`DegenerateVoronoiGeometry::certification_radius`]); the sphere search
//! visits exactly that finite set.

use nalgebra::{DMatrix, DVector};

use super::schur_complement;
use crate::error::{Error, Result};
use crate::linalg::{blocks, max_abs, spd_function, spd_inverse, symmetrize};
use crate::unwrap::{Lattice, SEARCH_BUDGET};

/// Tolerance of the linear conditions ⟨Λe_j, z⟩ = 0, relative to max(1, ‖z‖).
pub const LINEAR_TOL: f64 = 1e-9;

/// Default ‖b‖_∞ radius of the quadratic-form probes.
pub const DEFAULT_PROBE_BUDGET: i64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    In,
    Out,
    Undecided,
}

#[derive(Debug, Clone)]
pub struct DegenerateVoronoiGeometry {
    k: usize,
    delta: f64,
    sigma: DMatrix<f64>,
    lambda: DMatrix<f64>,
    lambda_inv: DMatrix<f64>,
    lambda_sq: DMatrix<f64>,
    lambda_hat: DMatrix<f64>,
    lattice_basis: DMatrix<f64>,
    lattice: Lattice,
    schur: DMatrix<f64>,
    gamma1: DMatrix<f64>,
    gamma2: DMatrix<f64>,
    omega_inv: DMatrix<f64>,
    /// Orthonormal basis of span{Λe_1, …, Λe_k} (n × k).
    span_a: DMatrix<f64>,
    projected: Lattice,
    projected_smin: f64,
}

impl DegenerateVoronoiGeometry {
    pub fn new(sigma: &DMatrix<f64>, k: usize, delta: f64) -> Result<Self> {
        let n = sigma.nrows();
        if sigma.ncols() != n {
            return Err(Error::dim("covariance (square)", n, sigma.ncols()));
        }
        if k == 0 || k >= n {
            return Err(Error::Domain(format!("geometry needs 0 < k < n, got k = {k}, n = {n}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        let sigma = symmetrize(sigma);
        let lambda = spd_function(&sigma, 1e-12, |x| 1.0 / x.sqrt())?;
        let lambda_inv = spd_function(&sigma, 1e-12, f64::sqrt)?;
        let lambda_sq = symmetrize(&(&lambda * &lambda));
        let sigma_inv = spd_inverse(&sigma, "Σ")?;
        let err = max_abs(&(&lambda_sq - &sigma_inv));
        if err > 1e-8 * max_abs(&sigma_inv).max(1.0) {
            return Err(Error::NumericalFailure(format!("Λ² differs from Σ⁻¹ by {err:e}")));
        }
        let (l2_aa, l2_ab, _, _) = blocks(&lambda_sq, k);
        let l2_aa_inv = spd_inverse(&l2_aa, "(Λ²)_AA")?;
        let lambda_hat = -&l2_aa_inv * &l2_ab;

        let (s_aa_inv, s_ab_inv, _, _) = blocks(&sigma_inv, k);
        let (_, s_ab, _, s_bb) = blocks(&sigma, k);
        let p_aa_inv = spd_inverse(&s_aa_inv, "(Σ⁻¹)_AA")?;
        let gamma2 = &p_aa_inv * &s_ab_inv;
        let gamma1 = -&gamma2 - s_ab * spd_inverse(&s_bb, "Σ_BB")?;
        let schur = schur_complement(&sigma, k)?;

        let (l_aa, l_ab, l_ba, _) = blocks(&lambda, k);
        let omega = &l_aa * &l_aa + &l_ab * &l_ba;
        let omega_inv = spd_inverse(&omega, "Ω")?;

        let span_a = lambda.columns(0, k).into_owned().qr().q();
        let m = n - k;
        let lam_b = lambda.columns(k, m).into_owned();
        let proj_b = (&lam_b - &span_a * (span_a.transpose() * &lam_b)) * delta;
        let projected_smin = proj_b.clone().svd(false, false).singular_values.min();
        let projected = Lattice::new(proj_b)?;

        let mut geom = Self {
            k,
            delta,
            sigma,
            lambda,
            lambda_inv,
            lambda_sq,
            lambda_hat,
            lattice_basis: DMatrix::zeros(0, 0),
            lattice: projected.clone(),
            schur,
            gamma1,
            gamma2,
            omega_inv,
            span_a,
            projected,
            projected_smin,
        };
        geom.rebuild_lattice()?;
        Ok(geom)
    }

    fn rebuild_lattice(&mut self) -> Result<()> {
        let n = self.n();
        let k = self.k;
        let mut t = DMatrix::<f64>::identity(n, n);
        t.view_mut((0, k), (k, n - k)).copy_from(&(&self.lambda_hat * self.delta));
        for i in k..n {
            t[(i, i)] = self.delta;
        }
        self.lattice_basis = &self.lambda * t;
        if self.lattice_basis.determinant().abs() == 0.0 {
            return Err(Error::NumericalFailure("lattice basis L is singular".into()));
        }
        self.lattice = Lattice::new(self.lattice_basis.clone())?;
        Ok(())
    }

    /// Copy with Λ̂ negated (and L rebuilt from it); a deliberate fault for mutation tests.
    pub fn with_flipped_lambda_hat(&self) -> Result<Self> {
        let mut g = self.clone();
        g.lambda_hat = -&g.lambda_hat;
        g.rebuild_lattice()?;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    /// Λ⁻¹ = Σ^{1/2}.
    pub fn lambda_inverse(&self) -> &DMatrix<f64> {
        &self.lambda_inv
    }

    pub fn lambda_hat(&self) -> &DMatrix<f64> {
        &self.lambda_hat
    }

    /// L = Λ·[[I, ΔΛ̂], [0, ΔI]].
    pub fn lattice_basis(&self) -> &DMatrix<f64> {
        &self.lattice_basis
    }

    /// Σ* = Σ_AA − Σ_AB(Σ_BB)⁻¹Σ_BA.
    pub fn schur(&self) -> &DMatrix<f64> {
        &self.schur
    }

    pub fn gamma1(&self) -> &DMatrix<f64> {
        &self.gamma1
    }

    pub fn gamma2(&self) -> &DMatrix<f64> {
        &self.gamma2
    }

    /// Ball center c(ξ, Δb) = Γ₁ξ + Γ₂Δb.
    pub fn ball_center(&self, xi: &[f64], b: &[i64]) -> Result<DVector<f64>> {
        let m = self.n() - self.k;
        if xi.len() != m || b.len() != m {
            return Err(Error::dim("ball center argument", m, xi.len().max(b.len())));
        }
        let db = DVector::from_iterator(m, b.iter().map(|&v| self.delta * v as f64));
        Ok(&self.gamma1 * DVector::from_row_slice(xi) + &self.gamma2 * db)
    }

    /// max |Λ̂ − (−((Σ⁻¹)_AA)⁻¹(Σ⁻¹)_AB)|.
    pub fn lambda_hat_residual(&self) -> Result<f64> {
        let sigma_inv = spd_inverse(&self.sigma, "Σ")?;
        let (aa, ab, _, _) = blocks(&sigma_inv, self.k);
        Ok(max_abs(&(&self.lambda_hat + spd_inverse(&aa, "(Σ⁻¹)_AA")? * ab)))
    }

    /// φ(z) = (Λ̂z; z).
    pub fn lift(&self, z: &[f64]) -> Result<DVector<f64>> {
        let m = self.n() - self.k;
        if z.len() != m {
            return Err(Error::dim("lift argument", m, z.len()));
        }
        let zv = DVector::from_row_slice(z);
        let h = &self.lambda_hat * &zv;
        Ok(DVector::from_iterator(self.n(), h.iter().chain(zv.iter()).copied()))
    }

    /// Λ(0; Δb).
    pub fn shift_vector(&self, b: &[i64]) -> DVector<f64> {
        let m = self.n() - self.k;
        self.lambda.columns(self.k, m) * DVector::from_iterator(m, b.iter().map(|&v| self.delta * v as f64))
    }

    fn check_len(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.n() {
            return Err(Error::dim("point", self.n(), z.len()));
        }
        Ok(())
    }

    /// max_j |⟨Λe_j, z⟩| over j ≤ k.
    pub fn linear_residual(&self, z: &[f64]) -> Result<f64> {
        self.check_len(z)?;
        let lz = &self.lambda * DVector::from_row_slice(z);
        Ok(lz.rows(0, self.k).amax())
    }

    pub fn satisfies_linear(&self, z: &[f64]) -> Result<bool> {
        let scale = crate::linalg::norm(z).max(1.0);
        Ok(self.linear_residual(z)? <= LINEAR_TOL * scale)
    }

    /// w_b(z) = (Λ²)_AB Δb − Π_A Λz.
    pub fn w_b(&self, z: &[f64], b: &[i64]) -> DVector<f64> {
        let m = self.n() - self.k;
        let db = DVector::from_iterator(m, b.iter().map(|&v| self.delta * v as f64));
        let lz = &self.lambda * DVector::from_row_slice(z);
        self.lambda_sq.view((0, self.k), (self.k, m)) * db - lz.rows(0, self.k)
    }

    /// γ_b(z) = ‖Λ(0; Δb)‖² − 2⟨z, Λ(0; Δb)⟩.
    pub fn gamma_b(&self, z: &[f64], b: &[i64]) -> f64 {
        let s = self.shift_vector(b);
        s.norm_squared() - 2.0 * s.dot(&DVector::from_row_slice(z))
    }

    /// q_b(z) = γ_b(z) − ⟨Ω⁻¹w_b(z), w_b(z)⟩ = min_h ‖z − Λ(h; Δb)‖² − ‖z‖².
    pub fn q_b(&self, z: &[f64], b: &[i64]) -> Result<f64> {
        self.check_len(z)?;
        if b.len() != self.n() - self.k {
            return Err(Error::dim("shift", self.n() - self.k, b.len()));
        }
        let w = self.w_b(z, b);
        Ok(self.gamma_b(z, b) - (&self.omega_inv * &w).dot(&w))
    }

    /// Minimizer h* = −Ω⁻¹w_b(z) of ‖z − Λ(h; Δb)‖².
    pub fn inner_minimizer(&self, z: &[f64], b: &[i64]) -> DVector<f64> {
        -(&self.omega_inv * self.w_b(z, b))
    }

    /// Upper bound on ‖b‖₂ for shifts that can compete with b = 0 at z.
    pub fn certification_radius(&self, z: &[f64]) -> f64 {
        2.0 * crate::linalg::norm(z) / self.projected_smin
    }

    /// Tri-state membership in the degenerate Voronoi cell V_Λ.
    ///
    /// `Out` as soon as a linear condition or a probe q_b < 0 with
    /// ‖b‖_∞ ≤ `probe_budget` fails; otherwise `In` iff the exact search on
    /// the projected lattice certifies that no shift beats b = 0.
    pub fn in_degenerate_voronoi(&self, z: &[f64], probe_budget: i64) -> Result<Membership> {
        self.check_len(z)?;
        if !self.satisfies_linear(z)? {
            return Ok(Membership::Out);
        }
        let z2: f64 = z.iter().map(|v| v * v).sum();
        let tol = 1e-9 * z2.max(1.0);
        let m = self.n() - self.k;
        let r = probe_budget.max(0);
        if r > 0 {
            let mut b = vec![-r; m];
            loop {
                if b.iter().any(|&v| v != 0) && self.q_b(z, &b)? < -tol {
                    return Ok(Membership::Out);
                }
                if !odometer(&mut b, -r, r) {
                    break;
                }
            }
        }
        // project z onto the complement of span{Λe_j}; the linear check made this a no-op up to rounding
        let zv = DVector::from_row_slice(z);
        let zp = &zv - &self.span_a * (self.span_a.transpose() * &zv);
        match self.projected.distance2(zp.as_slice(), SEARCH_BUDGET) {
            Ok(d2) if d2 >= zp.norm_squared() - tol => Ok(Membership::In),
            Ok(_) => Ok(Membership::Out),
            Err(e) if e.is_budget() => Ok(Membership::Undecided),
            Err(e) => Err(e),
        }
    }

    /// dist(z, 𝓛)² − ‖z‖²; non-negative exactly on V(𝓛).
    pub fn lattice_margin(&self, z: &[f64]) -> Result<f64> {
        self.check_len(z)?;
        let z2: f64 = z.iter().map(|v| v * v).sum();
        Ok(self.lattice.distance2(z, SEARCH_BUDGET)? - z2)
    }

    /// z ∈ V(𝓛) for 𝓛 = Lℤⁿ, by exact closest-vector search.
    pub fn in_lattice_voronoi(&self, z: &[f64]) -> Result<bool> {
        let z2: f64 = z.iter().map(|v| v * v).sum();
        Ok(self.lattice_margin(z)? >= -2e-9 * z2.max(1.0))
    }

    /// Membership in P_Λ: the linear conditions and z ∈ V(𝓛).
    pub fn in_polytope(&self, z: &[f64]) -> Result<bool> {
        Ok(self.satisfies_linear(z)? && self.in_lattice_voronoi(z)?)
    }

    /// ½·√(Σ‖b_i‖²) over the reduced basis of 𝓛, an upper bound on its covering radius.
    pub fn covering_radius_bound(&self) -> f64 {
        0.5 * self.lattice.reduced_basis().norm()
    }

    /// Orthogonal projection of `v` onto {z : ⟨Λe_j, z⟩ = 0, j ≤ k}.
    pub fn project_to_linear(&self, v: &[f64]) -> Result<DVector<f64>> {
        self.check_len(v)?;
        let vv = DVector::from_row_slice(v);
        Ok(&vv - &self.span_a * (self.span_a.transpose() * &vv))
    }
}

/// Odometer increment over [lo, hi]^len; false once it wraps around.
pub(crate) fn odometer(v: &mut [i64], lo: i64, hi: i64) -> bool {
    for x in v.iter_mut() {
        if *x < hi {
            *x += 1;
            return true;
        }
        *x = lo;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::SQRT_2PI;
    use crate::random::random_spd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_geometry() -> DegenerateVoronoiGeometry {
        DegenerateVoronoiGeometry::new(&DMatrix::identity(2, 2), 1, SQRT_2PI).unwrap()
    }

    #[test]
    fn membership_examples() {
        let g = identity_geometry();
        assert_eq!(g.in_degenerate_voronoi(&[0.0, 0.0], 5).unwrap(), Membership::In);
        assert!(g.in_polytope(&[0.0, 0.0]).unwrap());
        // along Λe₁
        assert_eq!(g.in_degenerate_voronoi(&[0.3, 0.0], 5).unwrap(), Membership::Out);
        assert!(!g.in_polytope(&[0.3, 0.0]).unwrap());
        // closer to (0, Δ)
        assert_eq!(g.in_degenerate_voronoi(&[0.0, 0.6 * SQRT_2PI], 5).unwrap(), Membership::Out);
        assert_eq!(g.in_degenerate_voronoi(&[0.0, 0.4 * SQRT_2PI], 5).unwrap(), Membership::In);
        let far = 3.0 * g.covering_radius_bound();
        assert!(!g.in_polytope(&[0.0, far]).unwrap());
    }

    #[test]
    fn out_beyond_probe_radius_is_still_detected() {
        // with no probes the exact search alone must reject
        let g = identity_geometry();
        assert_eq!(g.in_degenerate_voronoi(&[0.0, 0.6 * SQRT_2PI], 0).unwrap(), Membership::Out);
    }

    #[test]
    fn invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 2..=5 {
            for k in 1..n {
                let s = random_spd(&mut rng, n, 0.2, 5.0);
                let g = DegenerateVoronoiGeometry::new(&s, k, SQRT_2PI).unwrap();
                let l2 = g.lambda() * g.lambda();
                let inv = s.clone().try_inverse().unwrap();
                assert!(max_abs(&(l2 - inv)) < 1e-8);
                assert!(g.lambda_hat_residual().unwrap() < 1e-10);
                assert!(g.lattice_basis().determinant().abs() > 1e-12);
                // φ(z) maps into the linear subspace after Λ
                let z: Vec<f64> = (0..n - k).map(|i| 0.1 * (i as f64 + 1.0)).collect();
                let v = g.lambda() * g.lift(&z).unwrap();
                assert!(g.linear_residual(v.as_slice()).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn ball_center_formula() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = DegenerateVoronoiGeometry::new(&s, 1, SQRT_2PI).unwrap();
        // Γ₂ = −Λ̂; Γ₁ = Λ̂ − Σ_AB/Σ_BB
        let lh = g.lambda_hat()[(0, 0)];
        assert!((g.gamma2()[(0, 0)] + lh).abs() < 1e-12);
        assert!((g.gamma1()[(0, 0)] - (lh - 0.5)).abs() < 1e-12);
        let c = g.ball_center(&[0.3], &[1]).unwrap();
        let want = g.gamma1()[(0, 0)] * 0.3 + g.gamma2()[(0, 0)] * SQRT_2PI;
        assert!((c[0] - want).abs() < 1e-12);
    }

    #[test]
    fn flipped_hook_changes_lambda_hat() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = DegenerateVoronoiGeometry::new(&s, 1, SQRT_2PI).unwrap();
        let f = g.with_flipped_lambda_hat().unwrap();
        assert!((f.lambda_hat()[(0, 0)] + g.lambda_hat()[(0, 0)]).abs() < 1e-15);
        assert!(f.lambda_hat_residual().unwrap() > 1e-3);
    }
}
