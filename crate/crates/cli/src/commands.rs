use std::io::Write;

use osc_unwrap::bounds::bound_report;
use osc_unwrap::bounds::lemmas::{run_all, LemmaSettings};
use osc_unwrap::montecarlo::{estimate_psucc, ExperimentSpec};
use osc_unwrap::{decode_success, OscillatorCode};

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{sig12, sig12_list, Csv, BOUNDS_HEADER, LEMMA_HEADER, SWEEP_HEADER};

/// Deliberate defects for exercising failure paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negate Λ̂ in the lemma geometry.
    FlipLambdaHat,
    /// Give every decoder search a zero node budget.
    ExhaustSearch,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flip-lambda-hat" => Ok(Fault::FlipLambdaHat),
            "exhaust-search" => Ok(Fault::ExhaustSearch),
            other => Err(format!("unknown fault `{other}`")),
        }
    }
}

pub fn run(config: &RunConfig, fault: Option<Fault>, out: &mut dyn Write) -> CliResult<()> {
    match config.mode {
        Mode::Sweep => run_sweep(config, fault, out),
        Mode::Bounds => run_bounds(config, out),
        Mode::VerifyLemmas => run_verify_lemmas(config, fault, out),
        Mode::DecodeOne => run_decode_one(config, out),
    }
}

/// Runs `run` on a pool of `threads` workers, or on the default pool.
pub fn run_with_threads(
    config: &RunConfig,
    threads: Option<usize>,
    fault: Option<Fault>,
    out: &mut (dyn Write + Send),
) -> CliResult<()> {
    match threads {
        None => run(config, fault, out),
        Some(n) => {
            if n == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
            pool.install(|| run(config, fault, out))
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(format!("cannot write output: {e}"))
}

fn output_path(config: &RunConfig) -> CliResult<&std::path::Path> {
    config
        .output_path
        .as_deref()
        .ok_or_else(|| CliError::Config("missing field `output_path`".into()))
}

pub fn run_sweep(config: &RunConfig, fault: Option<Fault>, out: &mut dyn Write) -> CliResult<()> {
    let path = output_path(config)?;
    let codes = config.build_codes()?;
    let mut csv = Csv::new(SWEEP_HEADER);
    let mut rows = 0;
    for code in &codes {
        for &sigma in &config.sigma_grid {
            let mut spec = ExperimentSpec::new(
                code.clone(),
                sigma,
                config.eps_grid.clone(),
                config.trials,
                config.master_seed,
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            if fault == Some(Fault::ExhaustSearch) {
                spec.search_budget = 0;
            }
            let report = estimate_psucc(&spec).map_err(CliError::from_run)?;
            for r in &report.records {
                let b = bound_report(code, sigma, r.eps).map_err(CliError::from_run)?;
                csv.row(&[
                    sigma.to_string(),
                    r.eps.to_string(),
                    r.trials.to_string(),
                    r.successes.to_string(),
                    r.p_hat.to_string(),
                    r.ci_low.to_string(),
                    r.ci_high.to_string(),
                    b.theorem_bound.to_string(),
                    b.corollary_bound.to_string(),
                    b.schur_bound.to_string(),
                    b.sq_u.to_string(),
                    report.seed.to_string(),
                ]);
                rows += 1;
            }
        }
    }
    csv.persist(path)?;
    writeln!(out, "wrote {rows} rows to {}", path.display()).map_err(io_err)
}

pub fn run_bounds(config: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let path = output_path(config)?;
    let codes = config.build_codes()?;
    let mut csv = Csv::new(BOUNDS_HEADER);
    let mut rows = 0;
    for code in &codes {
        for &sigma in &config.sigma_grid {
            for &eps in &config.eps_grid {
                let b = bound_report(code, sigma, eps).map_err(CliError::from_run)?;
                csv.row(&[
                    sigma.to_string(),
                    eps.to_string(),
                    b.theorem_bound.to_string(),
                    b.corollary_bound.to_string(),
                    b.schur_bound.to_string(),
                    b.sq_u.to_string(),
                ]);
                rows += 1;
            }
        }
    }
    csv.persist(path)?;
    writeln!(out, "wrote {rows} rows to {}", path.display()).map_err(io_err)
}

pub fn lemma_settings(config: &RunConfig, fault: Option<Fault>) -> LemmaSettings {
    let d = LemmaSettings::default();
    LemmaSettings {
        seed: config.master_seed,
        instances: config.instances.unwrap_or(d.instances),
        geometries: config.geometries.unwrap_or(d.geometries),
        points_per_geometry: config.points_per_geometry.unwrap_or(d.points_per_geometry),
        probe_budget: config.probe_budget.unwrap_or(d.probe_budget),
        flip_lambda_hat: fault == Some(Fault::FlipLambdaHat),
    }
}

pub fn run_verify_lemmas(config: &RunConfig, fault: Option<Fault>, out: &mut dyn Write) -> CliResult<()> {
    let settings = lemma_settings(config, fault);
    let checks = run_all(&settings).map_err(CliError::from_run)?;
    let mut csv = Csv::new(LEMMA_HEADER);
    for c in &checks {
        writeln!(out, "{}", c.report_line()).map_err(io_err)?;
        csv.row(&[
            c.name.to_string(),
            c.instances.to_string(),
            c.failures.to_string(),
            c.max_violation.to_string(),
        ]);
    }
    if let Some(path) = &config.output_path {
        csv.persist(path)?;
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("{} ({} of {} instances)", c.name, c.failures, c.instances))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Lemma(failed.join(", ")))
    }
}

fn single_code(config: &RunConfig) -> CliResult<OscillatorCode> {
    let mut codes = config.build_codes()?;
    if codes.len() != 1 {
        return Err(CliError::Config("decode-one needs exactly one code".into()));
    }
    Ok(codes.remove(0))
}

pub fn run_decode_one(config: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let code = single_code(config)?;
    let sigma = config.sigma_grid[0];
    let xi = config.xi.as_deref().ok_or_else(|| CliError::Config("missing field `xi`".into()))?;
    let dim = 2 * code.n_modes();
    if xi.len() != dim {
        return Err(CliError::Code(format!(
            "xi has {} entries but the code acts on {dim} quadratures",
            xi.len()
        )));
    }
    let x = code.encode_displacement(xi).map_err(CliError::from_run)?;
    let syndrome = code.syndrome(xi).map_err(CliError::from_run)?;
    let problem = code.unwrap_problem(sigma).map_err(CliError::from_run)?;
    let result = problem.map_estimate(&syndrome.values).map_err(CliError::from_run)?;
    let xi_hat = code.displacement_from_estimate(&result.x_hat).map_err(CliError::from_run)?;
    let logical = code.logical_error(xi, xi_hat.as_slice()).map_err(CliError::from_run)?;

    let mut lines = vec![
        format!(
            "code: N={} K={} sq_u={}",
            code.n_modes(),
            code.k_logical(),
            sig12(code.squeezing_measure())
        ),
        format!("sigma: {}", sig12(sigma)),
        format!("xi: {}", sig12_list(xi)),
        format!("x: {}", sig12_list(x.as_slice())),
        format!("syndrome: {}", sig12_list(&syndrome.values)),
        format!("b: {:?}", result.b),
        format!("x_hat: {}", sig12_list(&result.x_hat)),
        format!("xi_hat: {}", sig12_list(xi_hat.as_slice())),
        format!("logical_error: {}", sig12_list(&logical.values)),
        format!("logical_error_norm: {}", sig12(logical.norm)),
        format!("objective: {}", sig12(result.objective)),
        format!("tie: {}", result.tie),
    ];
    for &eps in &config.eps_grid {
        let ok = decode_success(&problem, x.as_slice(), &result, eps).map_err(CliError::from_run)?;
        lines.push(format!("success(eps={}): {ok}", sig12(eps)));
    }
    for l in lines {
        writeln!(out, "{l}").map_err(io_err)?;
    }
    Ok(())
}
