use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use randbound_cli::bound::{bound_report, BoundError};
use randbound_cli::report::Report;
use randbound_cli::suites::{gap_report, run_suite, RunConfig, Suite, SuiteOptions};
use randbound_core::{ConstantKind, Error};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONTRACT: u8 = 3;

/// Brackets and cross-checks Rademacher, Gaussian and square-function bounds
/// of finite operator families.
#[derive(Debug, Parser)]
#[command(name = "randbound", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed for searches and Monte Carlo.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Monte Carlo sample count.
    #[arg(long, global = true, default_value_t = 100_000)]
    samples: usize,
    /// Confidence level of Monte Carlo intervals.
    #[arg(long, global = true, default_value_t = 0.99)]
    confidence: f64,
    /// Search restarts.
    #[arg(long, global = true, default_value_t = 64)]
    budget: usize,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Omit the timestamp and wall-clock timings.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a verification suite.
    Verify {
        /// sudakov, komatsu, expsup, comparison-constants, diag-exact,
        /// identities, duality or product.
        suite: Suite,
        /// Dimensions for the sudakov suite.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Diagonal coefficients for diag-exact.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Option<Vec<f64>>,
        /// Random cases for the randomized suites.
        #[arg(long)]
        cases: Option<usize>,
    },
    /// γ-bound gap scan over the coordinate functionals.
    Gap {
        #[arg(long, value_delimiter = ',', default_values_t = [2, 8, 64, 1024])]
        n: Vec<usize>,
    },
    /// Bracket one constant of a family read from a JSON file.
    Bound {
        file: PathBuf,
        /// r, gamma, ell2, pi2, pi21, cotype2 or cotype2gamma.
        #[arg(long)]
        constant: ConstantKind,
    },
}

fn engine_exit(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Shape(_) => EXIT_USAGE,
        _ => EXIT_CONTRACT,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("RANDBOUND_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // fails only if a pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn emit(report: &mut Report, common: &Common) -> Result<(), String> {
    if common.no_timestamp {
        report.strip_timing();
    } else {
        report.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    let text = match common.format {
        Format::Json => report.render_json(),
        Format::Csv => report.render_csv().map_err(|e| e.to_string())?,
    };
    match &common.out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let c = &cli.common;
    let cfg = RunConfig { seed: c.seed, samples: c.samples, confidence: c.confidence, budget: c.budget };
    if let Err(e) = cfg.mc() {
        eprintln!("randbound: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match cli.command {
        Command::Verify { suite, n, a, cases } => {
            run_suite(suite, &SuiteOptions { n, a, cases }, &cfg).map_err(|e| (engine_exit(&e), e.to_string()))
        }
        Command::Gap { n } => gap_report(&n, &cfg).map_err(|e| (engine_exit(&e), e.to_string())),
        Command::Bound { file, constant } => bound_report(&file, constant, &cfg).map_err(|e| match e {
            BoundError::Input(m) => (EXIT_USAGE, m),
            BoundError::Engine(e) => (EXIT_CONTRACT, e.to_string()),
        }),
    };
    let mut report = match result {
        Ok(r) => r,
        Err((code, msg)) => {
            eprintln!("randbound: {msg}");
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = emit(&mut report, c) {
        eprintln!("randbound: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
