//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for invalid arguments (one diagnostic line on
//! stderr), 3 when a computation fails numerically.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{error_sweep, fit_rate, fit_to_json, predicted_rate, sweep_to_csv};
use crate::bergomi::{call_via_parity, simulate_terminal_prices, PricingConfig, VolSource};
use crate::error::Error;
use crate::quadrature::{build_scheme, ModelParams};
use crate::simulate::simulate_lift;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ou-lift",
    version,
    about = "OU-sum approximations of Volterra fractional Brownian motion"
)]
struct Cli {
    /// Worker threads for parallel sections (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a quadrature scheme and print it as JSON.
    Quadrature(QuadratureArgs),
    /// Strong errors over a list of interval counts, plus a log-log rate fit.
    ErrorSweep(SweepArgs),
    /// Simulate paths of the OU-sum process.
    Paths(PathsArgs),
    /// Price a put (or a call by parity) in the rough Bergomi model.
    Price(PriceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct SchemeArgs {
    /// Hurst index in (0, 1/2).
    #[arg(long = "H")]
    hurst: f64,
    /// Number of geometric intervals.
    #[arg(long)]
    n: usize,
    /// Gauss points per interval.
    #[arg(long)]
    m: usize,
    /// Grid rate; defaults to 2Hm/3.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Debug, Args)]
struct QuadratureArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long = "H")]
    hurst: f64,
    #[arg(long)]
    m: usize,
    /// Comma-separated interval counts.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PathsArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    /// Time steps.
    #[arg(long)]
    k: usize,
    /// Number of paths.
    #[arg(long = "N")]
    paths: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PriceArgs {
    #[arg(long = "H")]
    hurst: f64,
    #[arg(long, required_unless_present = "oracle")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "oracle")]
    m: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    /// Drive the volatility with the exact Volterra process instead of a scheme.
    #[arg(long, conflicts_with_all = ["n", "m", "r"])]
    oracle: bool,
    #[arg(long = "K")]
    strike: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long)]
    k: usize,
    #[arg(long = "N")]
    paths: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long)]
    seed: u64,
    /// Report the call price obtained by put-call parity.
    #[arg(long)]
    call: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the CLI with process stdout/stderr and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_io<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            // Fold clap's multi-line message into one line, dropping the usage hints.
            let rendered = e.to_string();
            let line: Vec<&str> = rendered
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            let _ = writeln!(stderr, "{}", line.join(" "));
            return EXIT_INVALID;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be >= 1")),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Error::numerical(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match result.and_then(|(text, out)| emit(&text, out.as_ref(), stdout)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.to_string().replace('\n', " "));
            if e.is_invalid_argument() {
                EXIT_INVALID
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn emit(text: &str, out: Option<&PathBuf>, stdout: &mut dyn Write) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::invalid(format!("cannot write to stdout: {e}"))),
    }
}

fn dispatch(command: &Command) -> Result<(String, Option<PathBuf>), Error> {
    match command {
        Command::Quadrature(a) => {
            let params = ModelParams::new(a.scheme.hurst, a.horizon)?;
            let scheme = build_scheme(&params, a.scheme.n, a.scheme.m, a.scheme.r)?;
            Ok((scheme.to_json() + "\n", a.out.clone()))
        }
        Command::ErrorSweep(a) => {
            ModelParams::new(a.hurst, a.horizon)?;
            if a.m == 0 {
                return Err(Error::invalid("m must be >= 1"));
            }
            let records = error_sweep(a.hurst, a.m, &a.n, a.horizon, a.r)?;
            let predicted = predicted_rate(a.hurst, a.m);
            let text = match a.format {
                Format::Csv => {
                    let mut s = sweep_to_csv(&records);
                    if records.len() >= 2 {
                        s.push_str(&fit_to_json(&fit_rate(&records)?, predicted));
                        s.push('\n');
                    }
                    s
                }
                Format::Json => {
                    let fit = if records.len() >= 2 {
                        serde_json::from_str::<serde_json::Value>(&fit_to_json(
                            &fit_rate(&records)?,
                            predicted,
                        ))
                        .expect("fit json")
                    } else {
                        serde_json::Value::Null
                    };
                    serde_json::json!({ "records": records, "fit": fit }).to_string() + "\n"
                }
            };
            Ok((text, a.out.clone()))
        }
        Command::Paths(a) => {
            let params = ModelParams::new(a.scheme.hurst, a.horizon)?;
            if a.k == 0 || a.paths == 0 {
                return Err(Error::invalid("--k and --N must be >= 1"));
            }
            if !(-1.0..=1.0).contains(&a.rho) {
                return Err(Error::invalid(format!(
                    "rho must lie in [-1, 1], got {}",
                    a.rho
                )));
            }
            let scheme = build_scheme(&params, a.scheme.n, a.scheme.m, a.scheme.r)?;
            let batch = simulate_lift(&scheme, a.horizon, a.k, a.rho, a.paths, a.seed)?;
            let text = match a.format {
                Format::Csv => batch.to_csv(),
                Format::Json => batch.to_json() + "\n",
            };
            Ok((text, a.out.clone()))
        }
        Command::Price(a) => {
            let params = ModelParams::new(a.hurst, a.horizon)?;
            let vol = if a.oracle {
                VolSource::ExactOracle { hurst: a.hurst }
            } else {
                // clap guarantees n and m without --oracle
                let (n, m) = (a.n.unwrap(), a.m.unwrap());
                VolSource::Scheme(build_scheme(&params, n, m, a.r)?)
            };
            let config = PricingConfig {
                strike: a.strike,
                horizon: a.horizon,
                steps: a.k,
                paths: a.paths,
                rho: a.rho,
                vol,
                seed: a.seed,
            };
            config.validate()?;
            let samples = simulate_terminal_prices(&config)?;
            let put = samples.put(a.strike)?;
            let result = if a.call {
                call_via_parity(&put, a.strike)
            } else {
                put
            };
            Ok((result.to_json() + "\n", a.out.clone()))
        }
    }
}
