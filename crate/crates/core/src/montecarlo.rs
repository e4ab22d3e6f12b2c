//! Monte-Carlo estimation of the decoding success probability.
//!
//! Trial t of an experiment draws its noise from [`trial_stream`]`(seed, t)`.
//! Trials are grouped into fixed chunks of [`CHUNK`] consecutive indices;
//! chunks run on the rayon pool and their partial sums are folded in chunk
//! order, so reports are bit-identical for every worker count.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::code::{LogicalError, OscillatorCode};
use crate::error::{Error, Result};
use crate::noise::{trial_stream, NoiseModel};
use crate::unwrap::{decode_success, modulo_reduce, SearchMode, UnwrapProblem, SEARCH_BUDGET};

/// Trials per work unit.
pub const CHUNK: u64 = 4096;

/// Confidence level of the reported intervals.
pub const CONFIDENCE: f64 = 0.99;

/// Largest tolerated fraction of trials whose decode exhausted the search budget.
pub const MAX_BUDGET_FAILURE_RATE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub code: OscillatorCode,
    pub sigma: f64,
    pub eps_list: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    /// Node budget of each trial's closest-vector search.
    pub search_budget: u64,
}

impl ExperimentSpec {
    pub fn new(code: OscillatorCode, sigma: f64, eps_list: Vec<f64>, trials: u64, master_seed: u64) -> Result<Self> {
        let spec = Self {
            code,
            sigma,
            eps_list,
            trials,
            master_seed,
            search_budget: SEARCH_BUDGET,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain("trials must be at least 1".into()));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::Domain(format!("eps must be positive, got {e}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsRecord {
    pub eps: f64,
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Statistics of the logical error over trials that decoded without error.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalSummary {
    pub samples: u64,
    pub mean_norm: f64,
    pub std_norm: f64,
    pub coord_std: Vec<f64>,
}

impl LogicalSummary {
    /// √(mean of per-coordinate variances).
    pub fn rms_coord_std(&self) -> f64 {
        if self.coord_std.is_empty() {
            return 0.0;
        }
        (self.coord_std.iter().map(|s| s * s).sum::<f64>() / self.coord_std.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub records: Vec<EpsRecord>,
    pub logical: LogicalSummary,
    pub seed: u64,
    pub trials: u64,
    /// Trials whose decode exceeded the search budget (counted as failures).
    pub budget_failures: u64,
    pub first_budget_failure: Option<u64>,
    pub tie_count: u64,
    pub wall_time: Duration,
}

struct Trial {
    logical: LogicalError,
    successes: Vec<bool>,
    tie: bool,
}

/// Everything a trial needs, built once per experiment.
struct Setup {
    problem: UnwrapProblem,
    noise: NoiseModel,
    /// Maps the physical displacement ξ to the decoded vector x.
    sampler: DMatrix<f64>,
}

impl Setup {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            problem: spec.code.unwrap_problem(spec.sigma)?,
            noise: NoiseModel::new(spec.sigma, spec.code.n_modes())?,
            // x = S⁻¹ξ is distributed as N(0, σ²(SᵀS)⁻¹), the covariance the
            // decoder and the bounds assume
            sampler: spec.code.encoder().inverse().matrix().clone(),
        })
    }
}

fn run_trial(spec: &ExperimentSpec, setup: &Setup, t: u64) -> Result<Trial> {
    let problem = &setup.problem;
    let mut rng = trial_stream(spec.master_seed, t);
    let xi = setup.noise.sample_displacement(&mut rng);
    let x = &setup.sampler * xi;
    let k = problem.k();
    let u = modulo_reduce(&x.as_slice()[k..], problem.delta())?;
    let result = problem.map_estimate_with(&u, SearchMode::Exact, spec.search_budget)?;
    let successes = spec
        .eps_list
        .iter()
        .map(|&eps| decode_success(problem, x.as_slice(), &result, eps))
        .collect::<Result<Vec<_>>>()?;
    let logical = LogicalError::new((0..k).map(|i| x[i] - result.x_hat[i]).collect());
    Ok(Trial {
        logical,
        successes,
        tie: result.tie,
    })
}

#[derive(Debug, Clone)]
struct Partial {
    successes: Vec<u64>,
    budget_failures: u64,
    first_budget_failure: Option<u64>,
    ties: u64,
    ok: u64,
    sum_norm: f64,
    sum_norm2: f64,
    sum_coord: Vec<f64>,
    sum_coord2: Vec<f64>,
}

impl Partial {
    fn new(n_eps: usize, k: usize) -> Self {
        Self {
            successes: vec![0; n_eps],
            budget_failures: 0,
            first_budget_failure: None,
            ties: 0,
            ok: 0,
            sum_norm: 0.0,
            sum_norm2: 0.0,
            sum_coord: vec![0.0; k],
            sum_coord2: vec![0.0; k],
        }
    }

    fn add(&mut self, trial: &Trial) {
        for (s, &hit) in self.successes.iter_mut().zip(&trial.successes) {
            *s += u64::from(hit);
        }
        self.ok += 1;
        self.ties += u64::from(trial.tie);
        let norm = trial.logical.norm;
        self.sum_norm += norm;
        self.sum_norm2 += norm * norm;
        for (i, v) in trial.logical.values.iter().enumerate() {
            self.sum_coord[i] += v;
            self.sum_coord2[i] += v * v;
        }
    }

    fn merge(&mut self, other: &Partial) {
        for (a, b) in self.successes.iter_mut().zip(&other.successes) {
            *a += b;
        }
        self.budget_failures += other.budget_failures;
        self.first_budget_failure = self.first_budget_failure.or(other.first_budget_failure);
        self.ties += other.ties;
        self.ok += other.ok;
        self.sum_norm += other.sum_norm;
        self.sum_norm2 += other.sum_norm2;
        for i in 0..self.sum_coord.len() {
            self.sum_coord[i] += other.sum_coord[i];
            self.sum_coord2[i] += other.sum_coord2[i];
        }
    }
}

fn run_chunk(spec: &ExperimentSpec, setup: &Setup, chunk: u64) -> Result<Partial> {
    let k = setup.problem.k();
    let mut part = Partial::new(spec.eps_list.len(), k);
    let start = chunk * CHUNK;
    let end = (start + CHUNK).min(spec.trials);
    for t in start..end {
        match run_trial(spec, setup, t) {
            Ok(trial) => part.add(&trial),
            Err(Error::SearchBudgetExceeded { .. }) => {
                part.budget_failures += 1;
                part.first_budget_failure.get_or_insert(t);
            }
            Err(e) => {
                return Err(Error::Trial {
                    trial: t,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(part)
}

fn sample_std(sum: f64, sum2: f64, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = sum / nf;
    ((sum2 - nf * mean * mean) / (nf - 1.0)).max(0.0).sqrt()
}

/// Estimates P_succ(ε) for every ε in `spec.eps_list` on the current rayon pool.
pub fn estimate_psucc(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let started = Instant::now();
    let setup = Setup::new(spec)?;
    let problem = &setup.problem;
    let chunks = spec.trials.div_ceil(CHUNK);
    let partials: Vec<Result<Partial>> = (0..chunks)
        .into_par_iter()
        .map(|c| run_chunk(spec, &setup, c))
        .collect();
    let mut total = Partial::new(spec.eps_list.len(), problem.k());
    for p in partials {
        total.merge(&p?);
    }
    if total.budget_failures as f64 > MAX_BUDGET_FAILURE_RATE * spec.trials as f64 {
        return Err(Error::TrialFailureRate {
            failures: total.budget_failures,
            trials: spec.trials,
            first_trial: total.first_budget_failure.unwrap_or(0),
        });
    }
    let records = spec
        .eps_list
        .iter()
        .zip(&total.successes)
        .map(|(&eps, &successes)| {
            let (ci_low, ci_high) = clopper_pearson(successes, spec.trials, CONFIDENCE);
            EpsRecord {
                eps,
                successes,
                trials: spec.trials,
                p_hat: successes as f64 / spec.trials as f64,
                ci_low,
                ci_high,
            }
        })
        .collect();
    let n = total.ok;
    let logical = LogicalSummary {
        samples: n,
        mean_norm: if n > 0 { total.sum_norm / n as f64 } else { 0.0 },
        std_norm: sample_std(total.sum_norm, total.sum_norm2, n),
        coord_std: (0..problem.k())
            .map(|i| sample_std(total.sum_coord[i], total.sum_coord2[i], n))
            .collect(),
    };
    Ok(EstimateReport {
        records,
        logical,
        seed: spec.master_seed,
        trials: spec.trials,
        budget_failures: total.budget_failures,
        first_budget_failure: total.first_budget_failure,
        tie_count: total.ties,
        wall_time: started.elapsed(),
    })
}

/// As [`estimate_psucc`], on a dedicated pool of `threads` workers.
pub fn estimate_psucc_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<EstimateReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::NumericalFailure(format!("cannot start worker pool: {e}")))?;
    pool.install(|| estimate_psucc(spec))
}

/// Logical errors of trials 0..count, in trial order.
pub fn logical_error_samples(spec: &ExperimentSpec, count: u64) -> Result<Vec<LogicalError>> {
    let setup = Setup::new(spec)?;
    (0..count)
        .into_par_iter()
        .map(|t| {
            run_trial(spec, &setup, t)
                .map(|trial| trial.logical)
                .map_err(|e| Error::Trial {
                    trial: t,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Exact (Clopper–Pearson) two-sided binomial interval at the given confidence.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials, "need 0 ≤ successes ≤ trials, trials > 0");
    let alpha = 1.0 - confidence;
    let x = successes as f64;
    let n = trials as f64;
    let low = if successes == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, x, n - x + 1.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, x + 1.0, n - x)
    };
    let p = x / n;
    (low.min(p), high.max(p))
}

/// Inverse of the regularized incomplete beta function by bisection.
fn beta_quantile(q: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
