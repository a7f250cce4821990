//! `calabi`: run the verification suites and report.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for
//! unparseable arguments, 3 for internal errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use calabi_core::models::WarpFunction;
use calabi_core::space::{parse_space_spec, SpaceSpec};
use calabi_core::verify::{self, report, RunConfig, SuiteReport, DEFAULT_ORDER, DEFAULT_SEED, DEFAULT_TRIALS};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "calabi",
    version,
    about = "Verify Killing and Calabi operator identities on locally symmetric spaces",
    after_help = "Space specs are factors joined by 'x': S<n>, H<n>, CP<n>, R<n>, each optionally \
                  followed by @<scale>, e.g. S2xS1, CP2xR1, S2@2xH2.\n\
                  The default seed is read from the CALABI_SEED environment variable."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Maximum jet order; each check uses the least order it needs.
    #[arg(long, global = true, default_value_t = DEFAULT_ORDER, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(3..))]
    order: usize,

    /// Replace every residual tolerance with this value.
    #[arg(long, global = true, value_parser = parse_tol)]
    tol: Option<f64>,

    /// Seed for every random field and sample point.
    #[arg(long, global = true, env = verify::SEED_ENV, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Random fields per suite.
    #[arg(long, global = true, default_value_t = DEFAULT_TRIALS, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    trials: usize,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Curvature-operator spectrum with its bound and Kähler flags.
    Spectrum {
        #[arg(value_parser = parse_spec)]
        spec: SpaceSpec,
    },
    /// Dimensions of K, the kernel of the curvature homomorphism, and of C.
    Split {
        #[arg(value_parser = parse_spec)]
        spec: SpaceSpec,
    },
    /// L∘K = 0 on random fields (C∘K = 0 on flat specs).
    ComplexCheck {
        #[arg(value_parser = parse_spec)]
        spec: SpaceSpec,
    },
    /// The S2xS1 field outside the Killing range, with S3xS1 for comparison.
    Counterexample,
    /// Khavkine operator on a warped plane Ω(t)² dx² + dt².
    Khavkine {
        #[arg(long, value_enum)]
        omega: Omega,
    },
    /// Refined trace identity on CPⁿ.
    RefinedCpn { n: usize },
    /// Every suite.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Omega {
    Cosh,
    ExpHalfSquare,
    One,
}

impl From<Omega> for WarpFunction {
    fn from(o: Omega) -> WarpFunction {
        match o {
            Omega::Cosh => WarpFunction::Cosh,
            Omega::ExpHalfSquare => WarpFunction::ExpHalfSquare,
            Omega::One => WarpFunction::One,
        }
    }
}

fn parse_spec(s: &str) -> Result<SpaceSpec, String> {
    parse_space_spec(s).map_err(|e| e.to_string())
}

fn parse_tol(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t.is_finite() && t > 0.0 => Ok(t),
        Ok(t) => Err(format!("tolerance must be positive and finite, got {t}")),
        Err(e) => Err(e.to_string()),
    }
}

fn run(cli: &Cli) -> calabi_core::Result<Vec<SuiteReport>> {
    let cfg = RunConfig {
        order: cli.order,
        tol: cli.tol,
        seed: cli.seed,
        trials: cli.trials,
    };
    Ok(match &cli.command {
        Command::Spectrum { spec } => vec![verify::suite_spectrum(&spec.to_string(), &cfg)?],
        Command::Split { spec } => vec![verify::suite_split(&spec.to_string(), &cfg)?],
        Command::ComplexCheck { spec } => vec![verify::suite_complex(&spec.to_string(), &cfg)?],
        Command::Counterexample => vec![verify::suite_counterexample(&cfg)?],
        Command::Khavkine { omega } => vec![verify::suite_khavkine((*omega).into(), &cfg)?],
        Command::RefinedCpn { n } => vec![verify::suite_cpn_refined(*n, &cfg)?],
        Command::All => verify::suite_all(&cfg)?,
    })
}

fn render(reports: &[SuiteReport], format: Format) -> calabi_core::Result<String> {
    match format {
        Format::Text => Ok(report::to_text(reports)),
        Format::Json => report::to_json(reports).map(|mut s| {
            s.push('\n');
            s
        }),
        Format::Csv => report::to_csv(reports),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let reports = match run(&cli) {
        Ok(r) => r,
        Err(e @ calabi_core::Error::InvalidArgument(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            eprintln!("internal error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    };
    let text = match render(&reports, cli.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("internal error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = fs::write(path, text) {
                eprintln!("internal error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_INTERNAL);
            }
        }
        None => print!("{text}"),
    }
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| r.failures().map(move |c| format!("{} [{}]: {}", r.suite, r.spec, c.name)))
        .collect();
    for f in &failed {
        eprintln!("FAIL {f}");
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
