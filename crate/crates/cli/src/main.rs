use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use solvhodge_core::forms::DEFAULT_MAX_FORMS_DIM;
use solvhodge_core::manifold::{SolvManifoldSpec, TMode};
use solvhodge_core::par::Execution;
use solvhodge_core::report::{analyze, check_harmonic, AnalyzeOptions, SCHEMA_VERSION};
use solvhodge_core::specfile::{load_spec, write_spec, BuilderSpec};
use solvhodge_core::Error;

#[derive(Parser)]
#[command(name = "solvhodge", about = "Dolbeault and de Rham cohomology of complex solvmanifolds C^n x C^m")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check on a spec file.
    Analyze {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Only count; skip harmonicity and wedge closure.
        #[arg(long)]
        skip_forms: bool,
        /// Include per-stage timings in JSON output.
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Write a builder example as an explicit spec file.
    EmitExample {
        #[arg(value_enum)]
        name: Builder,
        /// Exponents for example1, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1")]
        a: Vec<i64>,
        /// `symbolic` or `rational_pi(r,s)`.
        #[arg(long, default_value = "symbolic", value_parser = parse_t_mode)]
        t_mode: TMode,
        /// Matrix entries p,q,r,s of [[p,q],[r,s]] for example2_n1.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "2,1,1,1")]
        matrix: Vec<i64>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Harmonicity flags of every basis form.
    CheckHarmonic {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = HarmonicFormat::Text)]
        format: HarmonicFormat,
        #[command(flatten)]
        common: CommonArgs,
    },
    Version,
}

#[derive(Args)]
struct CommonArgs {
    /// Decide lattice triviality in floating point.
    #[arg(long = "float")]
    force_float: bool,
    /// Largest n + m for the forms-level checks.
    #[arg(long, default_value_t = DEFAULT_MAX_FORMS_DIM)]
    max_dim: usize,
    /// Disable the parallel sweeps.
    #[arg(long)]
    sequential: bool,
}

impl CommonArgs {
    fn options(&self, skip_forms: bool) -> AnalyzeOptions {
        AnalyzeOptions {
            skip_forms,
            force_float: self.force_float,
            max_dim: self.max_dim,
            execution: if self.sequential { Execution::Sequential } else { Execution::Parallel },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Latex,
}

#[derive(Clone, Copy, ValueEnum)]
enum HarmonicFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Builder {
    Example1,
    #[value(name = "example2_n1")]
    Example2N1,
    Torus,
}

fn parse_t_mode(s: &str) -> Result<TMode, String> {
    if s == "symbolic" {
        return Ok(TMode::Symbolic);
    }
    let inner = s
        .strip_prefix("rational_pi(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("expected `symbolic` or `rational_pi(r,s)`, got `{s}`"))?;
    let (r, s) = inner.split_once(',').ok_or("rational_pi needs two integers")?;
    let parse = |x: &str| x.trim().parse::<i64>().map_err(|e| e.to_string());
    Ok(TMode::RationalPi { r: parse(r)?, s: parse(s)? })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::FiberTooLarge { .. } | Error::DimensionCap { .. } => 3,
        _ => 2,
    }
}

fn load(path: &Path) -> Result<SolvManifoldSpec, ExitCode> {
    load_spec(path).map_err(|e| fail(&e))
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if matches!(e, Error::DimensionCap { .. }) {
        eprintln!("hint: raise --max-dim or pass --skip-forms to analyze");
    }
    ExitCode::from(exit_code(e))
}

fn run(cli: Cli) -> Result<ExitCode, ExitCode> {
    match cli.command {
        Command::Analyze { file, format, skip_forms, timings, common } => {
            let spec = load(&file)?;
            let report = analyze(&spec, &common.options(skip_forms)).map_err(|e| fail(&e))?;
            match format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => println!("{}", report.to_json(timings)),
                Format::Latex => print!("{}", report.to_latex()),
            }
            Ok(ExitCode::from(report.exit_code() as u8))
        }
        Command::EmitExample { name, a, t_mode, matrix, n, m, output } => {
            let builder = match name {
                Builder::Example1 => BuilderSpec::Example1 { a, t_mode: t_mode.into() },
                Builder::Example2N1 => {
                    let [p, q, r, s] = matrix[..] else {
                        return Err(fail(&Error::InvalidBuilder("--matrix needs exactly four entries".into())));
                    };
                    BuilderSpec::Example2N1 { matrix: [[p, q], [r, s]] }
                }
                Builder::Torus => BuilderSpec::Torus { n, m },
            };
            let spec = builder.build().map_err(|e| fail(&e))?;
            write_spec(&spec, &output).map_err(|e| fail(&e))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckHarmonic { file, format, common } => {
            let spec = load(&file)?;
            let report = check_harmonic(&spec, &common.options(false)).map_err(|e| fail(&e))?;
            match format {
                HarmonicFormat::Text => print!("{}", report.to_text()),
                HarmonicFormat::Json => println!("{}", report.to_json()),
            }
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Version => {
            let parallel = if Execution::parallel_available() { "rayon" } else { "sequential only" };
            println!("solvhodge {} (schema_version {SCHEMA_VERSION}, {parallel})", env!("CARGO_PKG_VERSION"));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    run(Cli::parse()).unwrap_or_else(|code| code)
}
