//! Oscillator-to-oscillator codes at the phase-space level.
//!
//! The first K modes carry logical information; rows 2K.. of the encoder
//! define the GKP stabilizer measurements whose outcomes form the syndrome.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, symmetrize};
use crate::noise::GaussianDensity;
use crate::symplectic::{SymplecticMatrix, DEFAULT_TOL_SYMP};
use crate::unwrap::UnwrapProblem;

/// Lattice spacing of canonical GKP states, √(2π).
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

/// Largest accepted condition number of SᵀS.
pub const MAX_CONDITION: f64 = 1e12;

/// Centered remainder of `x` modulo `delta`, in [−Δ/2, Δ/2).
pub fn centered_mod(x: f64, delta: f64) -> f64 {
    let half = 0.5 * delta;
    let mut r = x - delta * (x / delta + 0.5).floor();
    if r >= half {
        r -= delta;
    } else if r < -half {
        r += delta;
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct Syndrome {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalError {
    pub values: Vec<f64>,
    pub norm: f64,
}

impl LogicalError {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = crate::linalg::norm(&values);
        Self { values, norm }
    }
}

#[derive(Debug, Clone)]
pub struct OscillatorCode {
    n_modes: usize,
    k_logical: usize,
    encoder: SymplecticMatrix,
}

impl OscillatorCode {
    /// Encodes `k_logical` modes into `encoder.modes()` modes; requires 0 < K < N.
    pub fn new(encoder: SymplecticMatrix, k_logical: usize) -> Result<Self> {
        let n_modes = encoder.modes();
        if k_logical == 0 || k_logical >= n_modes {
            return Err(Error::Domain(format!(
                "need 0 < K < N, got K = {k_logical}, N = {n_modes}"
            )));
        }
        Ok(Self {
            n_modes,
            k_logical,
            encoder,
        })
    }

    /// The two-mode squeezing code: N = 2, K = 1.
    pub fn two_mode_squeezing(gain: f64) -> Result<Self> {
        Self::new(SymplecticMatrix::two_mode_squeezer(gain)?, 1)
    }

    pub fn identity(n_modes: usize, k_logical: usize) -> Result<Self> {
        Self::new(SymplecticMatrix::identity(n_modes), k_logical)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn k_logical(&self) -> usize {
        self.k_logical
    }

    pub fn encoder(&self) -> &SymplecticMatrix {
        &self.encoder
    }

    pub fn delta(&self) -> f64 {
        SQRT_2PI
    }

    pub fn squeezing_measure(&self) -> f64 {
        self.encoder.squeezing_measure()
    }

    fn check_len(&self, context: &'static str, v: &[f64]) -> Result<()> {
        if v.len() != 2 * self.n_modes {
            return Err(Error::dim(context, 2 * self.n_modes, v.len()));
        }
        Ok(())
    }

    /// x = Sξ.
    pub fn encode_displacement(&self, xi: &[f64]) -> Result<DVector<f64>> {
        self.check_len("displacement", xi)?;
        Ok(self.encoder.matrix() * DVector::from_row_slice(xi))
    }

    pub fn syndrome(&self, xi: &[f64]) -> Result<Syndrome> {
        let x = self.encode_displacement(xi)?;
        let start = 2 * self.k_logical;
        Ok(Syndrome {
            values: x.iter().skip(start).map(|&v| centered_mod(v, SQRT_2PI)).collect(),
        })
    }

    /// Σ = σ²(SᵀS)⁻¹.
    pub fn covariance(&self, sigma: f64) -> Result<GaussianDensity> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        let s = self.encoder.matrix();
        let sts = symmetrize(&(s.transpose() * s));
        let (vals, _) = sym_eigen(&sts);
        let cond = vals[vals.len() - 1] / vals[0];
        if !(cond <= MAX_CONDITION) {
            return Err(Error::NumericalFailure(format!(
                "cond(SᵀS) = {cond:e} exceeds {MAX_CONDITION:e}"
            )));
        }
        // (SᵀS)⁻¹ = S⁻¹S⁻ᵀ with the exact symplectic inverse
        let inv = self.encoder.inverse();
        let m = inv.matrix();
        let cov = symmetrize(&(m * m.transpose())) * (sigma * sigma);
        GaussianDensity::new(cov)
    }

    /// Classical unwrapping instance (n, k, Δ, Σ) = (2N, 2K, √(2π), σ²(SᵀS)⁻¹).
    pub fn unwrap_problem(&self, sigma: f64) -> Result<UnwrapProblem> {
        UnwrapProblem::new(2 * self.k_logical, SQRT_2PI, self.covariance(sigma)?)
    }

    /// First 2K entries of S(ξ − ξ̂).
    pub fn logical_error(&self, xi: &[f64], xi_hat: &[f64]) -> Result<LogicalError> {
        self.check_len("true displacement", xi)?;
        self.check_len("estimated displacement", xi_hat)?;
        let d = DVector::from_iterator(xi.len(), xi.iter().zip(xi_hat).map(|(a, b)| a - b));
        let x = self.encoder.matrix() * d;
        Ok(LogicalError::new(x.iter().take(2 * self.k_logical).copied().collect()))
    }

    /// Maps an estimate x̂ of Sξ back to ξ̂ = S⁻¹x̂.
    pub fn displacement_from_estimate(&self, x_hat: &[f64]) -> Result<DVector<f64>> {
        self.check_len("estimate", x_hat)?;
        Ok(self.encoder.inverse().matrix() * DVector::from_row_slice(x_hat))
    }
}

/// Code definition file (TOML).
///
/// ```toml
/// N = 2
/// K = 1
/// gain = 2.0           # two-mode squeezer, needs N = 2, K = 1
/// # matrix_file = "s.txt"  # or: encoder in the symplectic text format
/// ```
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    #[serde(alias = "N")]
    pub n: usize,
    #[serde(alias = "K")]
    pub k: usize,
    #[serde(default)]
    pub gain: Option<f64>,
    #[serde(default)]
    pub matrix_file: Option<PathBuf>,
}

impl CodeSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Builds the code; relative matrix paths are resolved against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<OscillatorCode> {
        let encoder = match (&self.gain, &self.matrix_file) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse("give either `gain` or `matrix_file`, not both".into()))
            }
            (None, None) => return Err(Error::Parse("missing field `gain` or `matrix_file`".into())),
            (Some(g), None) => {
                if self.n != 2 || self.k != 1 {
                    return Err(Error::Domain(format!(
                        "`gain` builds a two-mode squeezer and needs N = 2, K = 1 (got N = {}, K = {})",
                        self.n, self.k
                    )));
                }
                SymplecticMatrix::two_mode_squeezer(*g)?
            }
            (None, Some(file)) => {
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base_dir.join(file)
                };
                let s = SymplecticMatrix::load(&path, DEFAULT_TOL_SYMP)?;
                if s.modes() != self.n {
                    return Err(Error::dim("encoder modes", self.n, s.modes()));
                }
                s
            }
        };
        OscillatorCode::new(encoder, self.k)
    }
}

/// λ_min(Σ)·λ_max(SᵀS) − σ², which vanishes for Σ = σ²(SᵀS)⁻¹.
pub fn eigen_identity_residual(code: &OscillatorCode, sigma: f64) -> Result<f64> {
    let cov = code.covariance(sigma)?;
    let s = code.encoder().matrix();
    let (sv, _) = sym_eigen(&(s.transpose() * s));
    let (cv, _) = sym_eigen(cov.covariance());
    Ok(cv[0] * sv[sv.len() - 1] - sigma * sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use nalgebra::DMatrix;

    #[test]
    fn sqrt_2pi_constant() {
        assert!((SQRT_2PI - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn centered_mod_examples() {
        let d = SQRT_2PI;
        assert_eq!(centered_mod(0.3, d), 0.3);
        assert_eq!(centered_mod(-0.4, d), -0.4);
        assert!(centered_mod(d, d).abs() < 1e-15);
        assert_eq!(centered_mod(-d / 2.0, d), -d / 2.0);
        assert_eq!(centered_mod(d / 2.0, d), -d / 2.0);
        assert!((centered_mod(1.9, d) - (1.9 - d)).abs() < 1e-12);
        assert!((centered_mod(-1.9, d) - (d - 1.9)).abs() < 1e-12);
        for i in -2000..2000 {
            let x = i as f64 * 0.0137;
            let r = centered_mod(x, d);
            assert!((-d / 2.0..d / 2.0).contains(&r));
            let q = (x - r) / d;
            assert!((q - q.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn syndrome_examples() {
        let code = OscillatorCode::identity(2, 1).unwrap();
        assert_eq!(code.syndrome(&[0.0; 4]).unwrap().values, vec![0.0, 0.0]);
        assert_eq!(code.syndrome(&[0.1, 0.2, 0.3, -0.4]).unwrap().values, vec![0.3, -0.4]);
        let s = code.syndrome(&[0.0, 0.0, SQRT_2PI, 0.0]).unwrap().values;
        assert!(s.iter().all(|v| v.abs() < 1e-15));
        assert!(matches!(code.syndrome(&[0.0; 3]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn covariance_examples() {
        let code = OscillatorCode::identity(2, 1).unwrap();
        let cov = code.covariance(0.3).unwrap();
        assert!(max_abs(&(cov.covariance() - DMatrix::<f64>::identity(4, 4) * 0.09)) < 1e-15);

        let sq = SymplecticMatrix::squeezer(&[2.0, 1.0]).unwrap();
        let code = OscillatorCode::new(sq, 1).unwrap();
        let cov = code.covariance(1.0).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 4.0, 1.0, 1.0]));
        assert!(max_abs(&(cov.covariance() - want)) < 1e-14);

        let code = OscillatorCode::two_mode_squeezing(2.0).unwrap();
        let s = code.encoder().matrix();
        let inv = (s.transpose() * s).lu().try_inverse().unwrap() * 0.04;
        let cov = code.covariance(0.2).unwrap();
        assert!(max_abs(&(cov.covariance() - inv)) < 1e-10);
    }

    #[test]
    fn logical_error_examples() {
        let code = OscillatorCode::identity(2, 1).unwrap();
        let e = code.logical_error(&[0.3, -0.4, 7.0, 7.0], &[0.0; 4]).unwrap();
        assert_eq!(e.values, vec![0.3, -0.4]);
        assert!((e.norm - 0.5).abs() < 1e-15);
        let same = code.logical_error(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(same.norm, 0.0);

        let code = OscillatorCode::two_mode_squeezing(2.0).unwrap();
        let e = code.logical_error(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4]).unwrap();
        assert!((e.values[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(e.values[1], 0.0);
        assert!((e.norm - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_k_and_ill_conditioned() {
        assert!(OscillatorCode::identity(2, 0).is_err());
        assert!(OscillatorCode::identity(2, 2).is_err());
        let sq = SymplecticMatrix::squeezer(&[1e7, 1.0]).unwrap();
        let code = OscillatorCode::new(sq, 1).unwrap();
        assert!(matches!(code.covariance(0.1), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn eigen_identity_links_bounds() {
        for g in [1.0, 1.5, 2.0, 4.0] {
            let code = OscillatorCode::two_mode_squeezing(g).unwrap();
            assert!(eigen_identity_residual(&code, 0.3).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn code_spec_parsing() {
        let spec = CodeSpec::parse("N = 2\nK = 1\ngain = 2.0\n").unwrap();
        let code = spec.build(Path::new(".")).unwrap();
        assert!((code.squeezing_measure() - (2f64.sqrt() + 1.0)).abs() < 1e-12);
        assert!(CodeSpec::parse("N = 3\nK = 1\ngain = 2.0\n")
            .unwrap()
            .build(Path::new("."))
            .is_err());
        assert!(CodeSpec::parse("N = 2\nK = 1\n").unwrap().build(Path::new(".")).is_err());

        let dir = tempfile::tempdir().unwrap();
        SymplecticMatrix::identity(3).save(&dir.path().join("s.txt")).unwrap();
        let spec = CodeSpec::parse("n = 3\nk = 1\nmatrix_file = \"s.txt\"\n").unwrap();
        let code = spec.build(dir.path()).unwrap();
        assert_eq!((code.n_modes(), code.k_logical()), (3, 1));
        let wrong = CodeSpec::parse("n = 2\nk = 1\nmatrix_file = \"s.txt\"\n").unwrap();
        assert!(matches!(wrong.build(dir.path()), Err(Error::Dimension { .. })));
    }
}
