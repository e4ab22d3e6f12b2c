use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Schema-version line that leads every CSV file.
pub const SCHEMA_LINE: &str = "# osc-unwrap v1";

pub const SWEEP_HEADER: &str =
    "sigma,eps,trials,successes,p_hat,ci_low,ci_high,theorem_bound,corollary_bound,schur_bound,sq_u,seed";
pub const BOUNDS_HEADER: &str = "sigma,eps,theorem_bound,corollary_bound,schur_bound,sq_u";
pub const LEMMA_HEADER: &str = "check,instances,failures,max_violation";

/// Builds a CSV document in memory; floats use the shortest round-trip form.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self {
            text: format!("{SCHEMA_LINE}\n{header}\n"),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Writes to a temporary file next to `path`, then renames it into place.
    pub fn persist(&self, path: &Path) -> CliResult<()> {
        let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(self.text.as_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }
}

/// Twelve significant digits, trailing zeros trimmed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.11e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

pub fn sig12_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| sig12(x)).collect();
    format!("[{}]", parts.join(", "))
}
