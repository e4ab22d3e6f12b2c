//! Run configuration file (TOML).
//!
//! ```toml
//! mode = "sweep"
//! sigma_grid = [0.1, 0.2]
//! eps_grid = [0.05, 0.1]
//! trials = 100000
//! master_seed = 1
//! output_path = "sweep.csv"
//!
//! [code]
//! N = 2
//! K = 1
//! gain = 2.0
//! ```
//!
//! The code is given either inline as `[code]` or as `code_file`, a path
//! to a code definition file. `gain_grid` replaces the code with one
//! two-mode squeezer per gain.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use osc_unwrap::{CodeSpec, OscillatorCode};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sweep,
    Bounds,
    VerifyLemmas,
    DecodeOne,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sweep" => Ok(Mode::Sweep),
            "bounds" => Ok(Mode::Bounds),
            "verify-lemmas" => Ok(Mode::VerifyLemmas),
            "decode-one" => Ok(Mode::DecodeOne),
            other => Err(format!(
                "unknown mode `{other}` (expected sweep, bounds, verify-lemmas or decode-one)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sweep => "sweep",
            Mode::Bounds => "bounds",
            Mode::VerifyLemmas => "verify-lemmas",
            Mode::DecodeOne => "decode-one",
        })
    }
}

/// The file as written; every key optional, checked per mode.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub mode: Option<String>,
    pub sigma_grid: Option<Vec<f64>>,
    pub eps_grid: Option<Vec<f64>>,
    pub gain_grid: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub code: Option<CodeSpec>,
    pub code_file: Option<PathBuf>,
    pub xi: Option<Vec<f64>>,
    pub instances: Option<usize>,
    pub geometries: Option<usize>,
    pub points_per_geometry: Option<usize>,
    pub probe_budget: Option<i64>,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub xi: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum CodeSource {
    Inline(CodeSpec),
    File(PathBuf),
    Gains(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub code: Option<CodeSource>,
    pub sigma_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub xi: Option<Vec<f64>>,
    pub instances: Option<usize>,
    pub geometries: Option<usize>,
    pub points_per_geometry: Option<usize>,
    pub probe_budget: Option<i64>,
    /// Directory that relative paths in the file resolve against.
    pub base_dir: PathBuf,
}

fn missing(field: &str) -> CliError {
    CliError::Config(format!("missing field `{field}`"))
}

fn grid(name: &str, v: Option<Vec<f64>>) -> CliResult<Vec<f64>> {
    let v = v.ok_or_else(|| missing(name))?;
    if v.is_empty() {
        return Err(CliError::Config(format!("`{name}` must not be empty")));
    }
    if let Some(x) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(CliError::Config(format!("`{name}` entries must be positive, got {x}")));
    }
    Ok(v)
}

impl RunConfig {
    pub fn resolve(raw: RawConfig, over: Overrides, base_dir: &Path) -> CliResult<Self> {
        let mode = match (over.mode, &raw.mode) {
            (Some(m), _) => m,
            (None, Some(s)) => s.parse().map_err(CliError::Config)?,
            (None, None) => return Err(missing("mode")),
        };
        let needs_code = mode != Mode::VerifyLemmas;
        let code = match (raw.code, raw.code_file, raw.gain_grid) {
            (Some(c), None, None) => Some(CodeSource::Inline(c)),
            (None, Some(f), None) => Some(CodeSource::File(f)),
            (None, None, Some(g)) => Some(CodeSource::Gains(grid("gain_grid", Some(g))?)),
            (None, None, None) if needs_code => return Err(missing("code")),
            (None, None, None) => None,
            _ => {
                return Err(CliError::Config(
                    "give exactly one of `code`, `code_file` and `gain_grid`".into(),
                ))
            }
        };
        if let Some(CodeSource::Gains(g)) = &code {
            if let Some(x) = g.iter().find(|x| **x < 1.0) {
                return Err(CliError::Config(format!("`gain_grid` entries must be ≥ 1, got {x}")));
            }
        }
        let uses_grids = matches!(mode, Mode::Sweep | Mode::Bounds);
        let (sigma_grid, eps_grid) = match mode {
            Mode::Sweep | Mode::Bounds => (grid("sigma_grid", raw.sigma_grid)?, grid("eps_grid", raw.eps_grid)?),
            Mode::DecodeOne => {
                let s = grid("sigma_grid", raw.sigma_grid)?;
                if s.len() != 1 {
                    return Err(CliError::Config("decode-one takes a single `sigma_grid` entry".into()));
                }
                (s, raw.eps_grid.map(|e| grid("eps_grid", Some(e))).transpose()?.unwrap_or_default())
            }
            Mode::VerifyLemmas => (vec![], vec![]),
        };
        let trials = match mode {
            Mode::Sweep => {
                let t = raw.trials.ok_or_else(|| missing("trials"))?;
                if t == 0 {
                    return Err(CliError::Config("`trials` must be at least 1".into()));
                }
                t
            }
            _ => raw.trials.unwrap_or(0),
        };
        let master_seed = match (over.seed, raw.master_seed) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) if matches!(mode, Mode::Sweep | Mode::VerifyLemmas) => return Err(missing("master_seed")),
            (None, None) => 0,
        };
        let output_path = over.out.or(raw.output_path.map(|p| base_dir.join(p)));
        if uses_grids && output_path.is_none() {
            return Err(missing("output_path"));
        }
        let xi = over.xi.or(raw.xi);
        if mode == Mode::DecodeOne && xi.is_none() {
            return Err(missing("xi"));
        }
        if let Some(pb) = raw.probe_budget {
            if pb < 0 {
                return Err(CliError::Config("`probe_budget` must be non-negative".into()));
            }
        }
        Ok(Self {
            mode,
            code,
            sigma_grid,
            eps_grid,
            trials,
            master_seed,
            output_path,
            xi,
            instances: raw.instances,
            geometries: raw.geometries,
            points_per_geometry: raw.points_per_geometry,
            probe_budget: raw.probe_budget,
            base_dir: base_dir.to_path_buf(),
        })
    }

    /// The codes to run, in row order.
    pub fn build_codes(&self) -> CliResult<Vec<OscillatorCode>> {
        let code_err = |e: osc_unwrap::Error| CliError::Code(e.to_string());
        match &self.code {
            None => Ok(vec![]),
            Some(CodeSource::Inline(spec)) => Ok(vec![spec.build(&self.base_dir).map_err(code_err)?]),
            Some(CodeSource::File(path)) => {
                let path = self.base_dir.join(path);
                let spec = CodeSpec::load(&path).map_err(code_err)?;
                let dir = path.parent().unwrap_or(Path::new("."));
                Ok(vec![spec.build(dir).map_err(code_err)?])
            }
            Some(CodeSource::Gains(gains)) => gains
                .iter()
                .map(|&g| OscillatorCode::two_mode_squeezing(g).map_err(code_err))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> CliResult<RunConfig> {
        RunConfig::resolve(RawConfig::parse(text)?, Overrides::default(), Path::new("."))
    }

    const SWEEP: &str = r#"
mode = "sweep"
sigma_grid = [0.1]
eps_grid = [0.1]
trials = 10
master_seed = 3
output_path = "x.csv"
[code]
N = 2
K = 1
gain = 1.0
"#;

    #[test]
    fn complete_sweep_resolves() {
        let c = resolve(SWEEP).unwrap();
        assert_eq!(c.mode, Mode::Sweep);
        assert_eq!(c.trials, 10);
        assert_eq!(c.build_codes().unwrap().len(), 1);
    }

    #[test]
    fn missing_grid_is_named() {
        let text = SWEEP.replace("sigma_grid = [0.1]\n", "");
        let err = resolve(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("missing field `sigma_grid`"), "{err}");
    }

    #[test]
    fn bad_values_are_config_errors() {
        for (from, to) in [
            ("eps_grid = [0.1]", "eps_grid = []"),
            ("eps_grid = [0.1]", "eps_grid = [-0.1]"),
            ("trials = 10", "trials = 0"),
            ("mode = \"sweep\"", "mode = \"plot\""),
            ("trials = 10", "trials = 10\nunknown_key = 1"),
            ("trials = 10", "trials = [10"),
        ] {
            let err = resolve(&SWEEP.replace(from, to)).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{to}: {err}");
        }
    }

    #[test]
    fn overrides_win() {
        let raw = RawConfig::parse(SWEEP).unwrap();
        let over = Overrides {
            seed: Some(9),
            out: Some("y.csv".into()),
            ..Overrides::default()
        };
        let c = RunConfig::resolve(raw, over, Path::new(".")).unwrap();
        assert_eq!(c.master_seed, 9);
        assert_eq!(c.output_path.unwrap(), PathBuf::from("y.csv"));
    }

    #[test]
    fn verify_lemmas_needs_no_code() {
        let c = resolve("mode = \"verify-lemmas\"\nmaster_seed = 1\n").unwrap();
        assert!(c.build_codes().unwrap().is_empty());
    }

    #[test]
    fn code_errors_are_separate_from_config_errors() {
        let c = resolve(&SWEEP.replace("N = 2", "N = 3")).unwrap();
        assert_eq!(c.build_codes().unwrap_err().exit_code(), 3);
        let text = SWEEP.replace("[code]\nN = 2\nK = 1\ngain = 1.0\n", "code_file = \"/nonexistent/code.toml\"\n");
        let c = resolve(&text).unwrap();
        assert_eq!(c.build_codes().unwrap_err().exit_code(), 3);
    }
}
