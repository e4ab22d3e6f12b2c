use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use osc_unwrap_cli::{exit, run_with_threads, CliResult, Fault, Mode, Overrides, RawConfig, RunConfig};

/// Monte Carlo decoding of oscillator-to-oscillator codes under Gaussian
/// displacement noise.
#[derive(Debug, Parser)]
#[command(name = "osc-unwrap", version)]
struct Args {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,

    /// What to run; overrides `mode` in the config.
    #[arg(long)]
    mode: Option<Mode>,

    /// Master seed; overrides `master_seed` in the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path; overrides `output_path` in the config.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for Monte Carlo and lemma sweeps.
    #[arg(long, env = "OSC_UNWRAP_THREADS")]
    threads: Option<usize>,

    /// Displacement for decode-one, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    xi: Option<Vec<f64>>,

    #[arg(long, hide = true)]
    inject_fault: Option<Fault>,
}

fn execute(args: Args) -> CliResult<()> {
    let raw = RawConfig::load(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let over = Overrides {
        mode: args.mode,
        seed: args.seed,
        out: args.out,
        xi: args.xi,
    };
    let config = RunConfig::resolve(raw, over, base)?;
    let mut stdout = std::io::stdout();
    run_with_threads(&config, args.threads, args.inject_fault, &mut stdout)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

