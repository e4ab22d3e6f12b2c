//! Exhaustive grid search, used as an independent check of the decoder.
//!
//! Evaluates the full quadratic form xᵀΣ⁻¹x at every point of
//! {h ∈ step·ℤ^k ∩ [−hw, hw]^k} × {u + Δb : b ∈ [−r, r]^{n−k}} and keeps the
//! smallest. It shares no algebra with the closest-vector route.

use nalgebra::DVector;

use super::{DecodeResult, UnwrapProblem, TIE_TOL};
use crate::error::{Error, Result};

/// Largest grid the oracle will evaluate.
pub const BRUTE_FORCE_BUDGET: u128 = 100_000_000;

pub fn brute_force_estimate(
    p: &UnwrapProblem,
    u: &[f64],
    h_halfwidth: f64,
    h_step: f64,
    b_range: i64,
) -> Result<DecodeResult> {
    let n = p.n();
    let k = p.k();
    let m = n - k;
    if n > 4 {
        return Err(Error::Domain(format!("brute-force oracle supports n ≤ 4, got {n}")));
    }
    if u.len() != m {
        return Err(Error::dim("syndrome", m, u.len()));
    }
    if !(h_step > 0.0) || !(h_halfwidth >= 0.0) || b_range < 0 {
        return Err(Error::Domain("grid step must be positive, halfwidth and b range non-negative".into()));
    }
    let h_count = 2 * (h_halfwidth / h_step).floor() as i64 + 1;
    let b_count = 2 * b_range + 1;
    let points = (h_count as u128).pow(k as u32) * (b_count as u128).pow(m as u32);
    if points > BRUTE_FORCE_BUDGET {
        return Err(Error::BudgetExceeded {
            points,
            budget: BRUTE_FORCE_BUDGET,
        });
    }
    let h_half = (h_count - 1) / 2;
    let inv = p.density().inverse();
    let delta = p.delta();

    let mut x = DVector::<f64>::zeros(n);
    let mut best = f64::INFINITY;
    let mut best_x = vec![0.0; n];
    let mut best_b = vec![0i64; m];
    let mut tie = false;
    let mut b = vec![-b_range; m];
    loop {
        for i in 0..m {
            x[k + i] = u[i] + delta * b[i] as f64;
        }
        let mut h = vec![-h_half; k];
        loop {
            for i in 0..k {
                x[i] = h[i] as f64 * h_step;
            }
            let v = x.dot(&(inv * &x));
            if v < best - TIE_TOL {
                tie = false;
                best = v;
                best_x.copy_from_slice(x.as_slice());
                best_b.copy_from_slice(&b);
            } else if v <= best + TIE_TOL && b != best_b {
                tie = true;
                if v < best {
                    best = v;
                    best_x.copy_from_slice(x.as_slice());
                }
            }
            if !advance(&mut h, -h_half, h_half) {
                break;
            }
        }
        if !advance(&mut b, -b_range, b_range) {
            break;
        }
    }
    Ok(DecodeResult {
        x_hat: best_x,
        b: best_b,
        objective: best,
        tie,
    })
}

/// Odometer increment over [lo, hi]^len; false once it wraps around.
fn advance(v: &mut [i64], lo: i64, hi: i64) -> bool {
    for x in v.iter_mut() {
        if *x < hi {
            *x += 1;
            return true;
        }
        *x = lo;
    }
    false
}
