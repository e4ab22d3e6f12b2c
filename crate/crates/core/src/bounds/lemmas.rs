//! Randomized numerical checks of the geometric and matrix lemmas behind
//! the bounds. Each check reports how many instances it tried, how many
//! failed, and the largest violation seen.
//!
//! Instance i of check c draws from trial_stream(seed, c·2³² + i), and
//! results are reduced in instance order, so reports are reproducible for
//! any worker count.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::geometry::{DegenerateVoronoiGeometry, Membership};
use super::{check_schur_eigen_bound, corollary_bound};
use crate::code::SQRT_2PI;
use crate::error::Result;
use crate::linalg::{lambda_max, sym_eigen};
use crate::noise::{trial_stream, GaussianDensity};
use crate::random::random_spd;
use crate::unwrap::UnwrapProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub instances: u64,
    pub failures: u64,
    pub max_violation: f64,
}

impl LemmaCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn report_line(&self) -> String {
        format!(
            "{:<22} instances={:<8} failures={:<6} max_violation={:e}",
            self.name, self.instances, self.failures, self.max_violation
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSettings {
    pub seed: u64,
    /// Random instances for the matrix-level checks.
    pub instances: usize,
    /// Random covariances for the geometry checks.
    pub geometries: usize,
    /// Sampled points per geometry in the containment check.
    pub points_per_geometry: usize,
    /// ‖b‖_∞ radius of the quadratic-form probes in membership tests.
    pub probe_budget: i64,
    /// Negate Λ̂ inside the geometry (fault injection).
    pub flip_lambda_hat: bool,
}

impl Default for LemmaSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 1000,
            geometries: 12,
            points_per_geometry: 10_000,
            probe_budget: 2,
            flip_lambda_hat: false,
        }
    }
}

#[derive(Default)]
struct Tally {
    instances: u64,
    failures: u64,
    max_violation: f64,
}

impl Tally {
    fn record(&mut self, failed: bool, violation: f64) {
        self.instances += 1;
        self.failures += u64::from(failed);
        if violation > self.max_violation || violation.is_nan() {
            self.max_violation = violation;
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.instances += other.instances;
        self.failures += other.failures;
        if other.max_violation > self.max_violation || other.max_violation.is_nan() {
            self.max_violation = other.max_violation;
        }
        self
    }

    fn finish(self, name: &'static str) -> LemmaCheck {
        LemmaCheck {
            name,
            instances: self.instances,
            failures: self.failures,
            max_violation: self.max_violation,
        }
    }
}

fn stream(seed: u64, check: u64, i: usize) -> ChaCha8Rng {
    trial_stream(seed, (check << 32) | i as u64)
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

/// Runs `f` on instances 0..count in parallel and folds in index order.
fn sweep<F>(count: usize, f: F) -> Result<Tally>
where
    F: Fn(usize) -> Result<Tally> + Sync + Send,
{
    let parts: Vec<Result<Tally>> = (0..count).into_par_iter().map(f).collect();
    let mut total = Tally::default();
    for p in parts {
        total = total.merge(p?);
    }
    Ok(total)
}

fn random_geometry(rng: &mut ChaCha8Rng, n: usize, k: usize, flip: bool) -> Result<DegenerateVoronoiGeometry> {
    let s = random_spd(rng, n, 0.2, 5.0);
    let g = DegenerateVoronoiGeometry::new(&s, k, SQRT_2PI)?;
    if flip {
        g.with_flipped_lambda_hat()
    } else {
        Ok(g)
    }
}

/// (n, k) for geometry i: cycles through n ∈ {2, 3, 4} and all 0 < k < n.
fn geometry_shape(i: usize) -> (usize, usize) {
    const SHAPES: [(usize, usize); 6] = [(2, 1), (3, 1), (3, 2), (4, 1), (4, 2), (4, 3)];
    SHAPES[i % SHAPES.len()]
}

/// λ_min(Σ*) ≥ λ_min(Σ) for every block split of random PD matrices up to dimension 8.
pub fn schur_eigen_bound(s: &LemmaSettings) -> Result<LemmaCheck> {
    let t = sweep(s.instances, |i| {
        let mut rng = stream(s.seed, 1, i);
        let n = rng.random_range(2..=8);
        let sigma = random_spd(&mut rng, n, 1e-2, 1e2);
        let mut tally = Tally::default();
        let mut worst = 0.0_f64;
        let mut failed = false;
        for k in 1..n {
            let c = check_schur_eigen_bound(&sigma, k)?;
            worst = worst.max(c.lambda_min_sigma - c.lambda_min_schur);
            failed |= !c.holds;
        }
        tally.record(failed, worst.max(0.0));
        Ok(tally)
    })?;
    Ok(t.finish("schur_eigen_bound"))
}

/// q_b(z) equals the inner minimum over h, evaluated directly at h* = −Ω⁻¹w_b(z).
pub fn quadratic_form(s: &LemmaSettings) -> Result<LemmaCheck> {
    let t = sweep(s.instances, |i| {
        let mut rng = stream(s.seed, 2, i);
        let n = rng.random_range(2..=5);
        let k = rng.random_range(1..n);
        let g = random_geometry(&mut rng, n, k, false)?;
        let z = gaussian_vec(&mut rng, n, 2.0);
        let mut b: Vec<i64> = (0..n - k).map(|_| rng.random_range(-3..=3)).collect();
        if b.iter().all(|&v| v == 0) {
            b[0] = 1;
        }
        let q = g.q_b(&z, &b)?;
        let value_at = |h: &DVector<f64>| {
            let v = DVector::from_iterator(
                n,
                h.iter().copied().chain(b.iter().map(|&bi| g.delta() * bi as f64)),
            );
            let zv = DVector::from_row_slice(&z);
            (&zv - g.lambda() * v).norm_squared() - zv.norm_squared()
        };
        let h_star = g.inner_minimizer(&z, &b);
        let direct = value_at(&h_star);
        let mut violation = (q - direct).abs();
        let sign_mismatch = q.abs().max(direct.abs()) > 1e-8 && q.signum() != direct.signum();
        // h* must be a minimizer: nearby h never do better
        for _ in 0..10 {
            let d = DVector::from_vec(gaussian_vec(&mut rng, k, 1e-3));
            let worse = value_at(&(&h_star + d));
            violation = violation.max(direct - worse - 1e-12 * direct.abs().max(1.0));
        }
        let mut tally = Tally::default();
        tally.record(violation > 1e-8 || sign_mismatch, violation.max(0.0));
        Ok(tally)
    })?;
    Ok(t.finish("quadratic_form"))
}

/// (Π_A − Λ̂Π_B)w = 0 for w = Λ⁻¹v and v sampled from P_Λ.
pub fn parametrization(s: &LemmaSettings) -> Result<LemmaCheck> {
    let points = s.points_per_geometry.clamp(1, 500);
    let t = sweep(s.geometries, |i| {
        let mut rng = stream(s.seed, 3, i);
        let (n, k) = geometry_shape(i);
        let g = random_geometry(&mut rng, n, k, s.flip_lambda_hat)?;
        let scale = g.covering_radius_bound() / (n as f64).sqrt();
        let mut tally = Tally::default();
        let mut attempts = 0;
        while tally.instances < points as u64 && attempts < 50 * points {
            attempts += 1;
            let v = g.project_to_linear(&gaussian_vec(&mut rng, n, scale))?;
            if !g.in_polytope(v.as_slice())? {
                continue;
            }
            let w = g.lambda_inverse() * v;
            let r = (w.rows(0, k) - g.lambda_hat() * w.rows(k, n - k)).norm();
            tally.record(r > 1e-10, r);
        }
        if tally.instances == 0 {
            tally.record(true, f64::NAN);
        }
        Ok(tally)
    })?;
    Ok(t.finish("parametrization"))
}

/// No point is certified inside V_Λ while lying outside P_Λ.
pub fn containment(s: &LemmaSettings) -> Result<LemmaCheck> {
    let t = sweep(s.geometries, |i| {
        let mut rng = stream(s.seed, 4, i);
        let (n, k) = geometry_shape(i);
        let g = random_geometry(&mut rng, n, k, s.flip_lambda_hat)?;
        let scale = g.covering_radius_bound() / (n as f64).sqrt();
        let mut tally = Tally::default();
        for _ in 0..s.points_per_geometry {
            let z = g.project_to_linear(&gaussian_vec(&mut rng, n, scale))?;
            let inside = g.in_degenerate_voronoi(z.as_slice(), s.probe_budget)? == Membership::In;
            if !inside {
                tally.record(false, 0.0);
                continue;
            }
            let violated = !g.in_polytope(z.as_slice())?;
            let margin = g.lattice_margin(z.as_slice())?;
            tally.record(violated, (-margin).max(0.0));
        }
        Ok(tally)
    })?;
    Ok(t.finish("containment"))
}

/// Shared boundaries of the projected translates Π_B S_0 and Π_B S_b (n − k = 2)
/// are line segments: intersection points found by bisection are collinear.
pub fn translate_overlap(s: &LemmaSettings) -> Result<LemmaCheck> {
    let count = s.geometries.clamp(1, 6);
    let t = sweep(count, |i| {
        let mut rng = stream(s.seed, 5, i);
        let (n, k) = if i % 2 == 0 { (3, 1) } else { (4, 2) };
        let g = random_geometry(&mut rng, n, k, false)?;
        overlap_for_geometry(&g, &mut rng)
    })?;
    let mut t = t;
    if t.instances == 0 {
        t.record(true, f64::NAN);
    }
    Ok(t.finish("translate_overlap"))
}

fn overlap_for_geometry(g: &DegenerateVoronoiGeometry, rng: &mut ChaCha8Rng) -> Result<Tally> {
    let delta = g.delta();
    // z ∈ Π_B S_0 iff Λφ(z) ∈ V(𝓛); the linear conditions hold by construction of Λ̂
    let in_r0 = |z: &[f64; 2]| -> Result<bool> {
        let v = g.lambda() * g.lift(z)?;
        Ok(g.lattice_margin(v.as_slice())? >= 0.0)
    };
    let reach = lambda_max(g.lambda_inverse()) * g.covering_radius_bound();
    let sample_r0 = |rng: &mut ChaCha8Rng| -> Result<Option<[f64; 2]>> {
        for _ in 0..1000 {
            let z = [rng.random_range(-reach..reach), rng.random_range(-reach..reach)];
            if in_r0(&z)? {
                return Ok(Some(z));
            }
        }
        Ok(None)
    };
    let mut tally = Tally::default();
    for b0 in -2i64..=2 {
        for b1 in -2i64..=2 {
            if b0 == 0 && b1 == 0 {
                continue;
            }
            let shift = [delta * b0 as f64, delta * b1 as f64];
            let in_rb = |z: &[f64; 2]| in_r0(&[z[0] - shift[0], z[1] - shift[1]]);
            let mut touching: Vec<[f64; 2]> = Vec::new();
            for _ in 0..40 {
                let (Some(p0), Some(q)) = (sample_r0(rng)?, sample_r0(rng)?) else {
                    continue;
                };
                let p1 = [q[0] + shift[0], q[1] + shift[1]];
                let at = |t: f64| [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
                if in_r0(&p1)? || in_rb(&p0)? {
                    continue;
                }
                // last t inside R_0, first t inside R_b (both regions are convex)
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if in_r0(&at(mid))? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let exit_r0 = lo;
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if in_rb(&at(mid))? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let enter_rb = hi;
                let len = ((p1[0] - p0[0]).powi(2) + (p1[1] - p0[1]).powi(2)).sqrt();
                if (enter_rb - exit_r0) * len < 1e-9 {
                    touching.push(at(0.5 * (exit_r0 + enter_rb)));
                }
            }
            if touching.len() >= 3 {
                let dev = line_fit_deviation(&touching);
                tally.record(dev > 1e-6, dev);
            }
        }
    }
    Ok(tally)
}

/// Largest distance of the points from their total-least-squares line.
fn line_fit_deviation(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut cov = DMatrix::<f64>::zeros(2, 2);
    for p in points {
        let d = [p[0] - cx, p[1] - cy];
        for r in 0..2 {
            for c in 0..2 {
                cov[(r, c)] += d[r] * d[c];
            }
        }
    }
    let (_, vecs) = sym_eigen(&cov);
    let normal = [vecs[(0, 0)], vecs[(1, 0)]];
    points
        .iter()
        .map(|p| ((p[0] - cx) * normal[0] + (p[1] - cy) * normal[1]).abs())
        .fold(0.0, f64::max)
}

/// (Σ⁻¹)_BB − (Σ⁻¹)_BA((Σ⁻¹)_AA)⁻¹(Σ⁻¹)_AB = (Σ_BB)⁻¹, the identity the decoder is built on.
pub fn schur_identity(s: &LemmaSettings) -> Result<LemmaCheck> {
    let t = sweep(s.instances, |i| {
        let mut rng = stream(s.seed, 6, i);
        let n = rng.random_range(2..=8);
        let k = rng.random_range(0..n);
        let sigma = random_spd(&mut rng, n, 0.1, 10.0);
        let p = UnwrapProblem::new(k, SQRT_2PI, GaussianDensity::new(sigma)?)?;
        let r = p.schur_identity_residual()?;
        let scale = crate::linalg::max_abs(p.sigma_bb_inverse()).max(1.0);
        let mut tally = Tally::default();
        tally.record(r > 1e-9 * scale, r);
        Ok(tally)
    })?;
    Ok(t.finish("schur_identity"))
}

/// The Schur-complement bound is never larger than the plain one.
pub fn bound_ordering(s: &LemmaSettings) -> Result<LemmaCheck> {
    let t = sweep(s.instances, |i| {
        let mut rng = stream(s.seed, 7, i);
        let n = rng.random_range(2..=8);
        let k = rng.random_range(1..n);
        let sigma = random_spd(&mut rng, n, 1e-2, 1.0);
        let p = UnwrapProblem::new(k, SQRT_2PI, GaussianDensity::new(sigma)?)?;
        let eps = rng.random_range(0.01..1.0);
        let c = corollary_bound(&p, eps)?;
        let gap = c.schur - c.plain;
        let mut tally = Tally::default();
        tally.record(gap > 1e-12, gap.max(0.0));
        Ok(tally)
    })?;
    Ok(t.finish("bound_ordering"))
}

/// All checks, in a fixed order.
pub fn run_all(s: &LemmaSettings) -> Result<Vec<LemmaCheck>> {
    Ok(vec![
        schur_identity(s)?,
        schur_eigen_bound(s)?,
        bound_ordering(s)?,
        quadratic_form(s)?,
        parametrization(s)?,
        containment(s)?,
        translate_overlap(s)?,
    ])
}
