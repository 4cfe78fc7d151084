mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bkp_tau::integrals::QuadratureSpec;
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use commands::PartitionSet;
use error::CliError;
use output::{Format, Report};
use verify::Level;

const DEFAULT_SEED: u64 = 0x5eed;

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().as_str().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

#[derive(Parser)]
#[command(name = "bkp-tau", version, about = "Neutral-fermion tau functions, Q-function sums and Pfaffian ensembles")]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Seed for sampling and random verification data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate strict partitions.
    Partitions {
        #[arg(long, value_enum, default_value = "dp")]
        set: PartitionSet,
        #[arg(long)]
        max_part: u32,
        #[arg(long, default_value_t = usize::MAX)]
        max_length: usize,
    },
    /// Projective Schur Q-function of a strict partition.
    Qfn {
        /// Comma-separated parts, e.g. `2,1`.
        #[arg(long, conflicts_with = "rows")]
        partition: Option<String>,
        /// Print the generating rows q_0..q_N instead.
        #[arg(long)]
        rows: Option<u32>,
        #[arg(long)]
        cap: u32,
        /// Use the second time family.
        #[arg(long)]
        tbar: bool,
    },
    /// Sum a truncated series.
    Sum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pair coefficients (or a D matrix) reproducing a series through S3 (or S5).
    Specialize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact model table and seeded samples.
    Sample {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the free-fermion expectation value with the series.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Bilinear residual of a Q-function or of a summed series.
    Hirota {
        #[arg(long, conflicts_with_all = ["config", "poly"])]
        partition: Option<String>,
        /// A `sum` config whose polynomial is tested.
        #[arg(long, conflicts_with = "poly")]
        config: Option<PathBuf>,
        /// A polynomial as a JSON term list.
        #[arg(long)]
        poly: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        cap: u32,
    },
    /// One integral I1..I5 at fixed N.
    Integral {
        #[arg(long)]
        config: PathBuf,
    },
    /// Poissonized generating series Z1..Z5.
    Grandz {
        #[arg(long)]
        config: PathBuf,
    },
    /// Two-point series G± with the Bessel check of its first term.
    Braden {
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 1)]
        nmax: usize,
        /// `+` or `-`.
        #[arg(long, default_value = "+", allow_hyphen_values = true)]
        sign: String,
        #[arg(long, default_value_t = 12)]
        order: usize,
        #[arg(long, default_value_t = 6)]
        panels: usize,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
    /// Run the identity suite.
    VerifyAll {
        #[arg(long, value_enum, default_value = "fast")]
        level: Level,
    },
}

#[derive(Serialize)]
struct VerifyArgs {
    level: Level,
    seed: u64,
}

fn verify_all(level: Level, seed: u64) -> Result<(Report, bool), CliError> {
    let checks = verify::run(level, seed);
    let ok = checks.iter().all(|c| c.passed);
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                c.name.to_string(),
                if c.passed { "PASS" } else { "FAIL" }.to_string(),
                format!("{:e}", c.tolerance),
                c.detail.clone(),
            ]
        })
        .collect();
    let report = Report::new("verify-all", &VerifyArgs { level, seed })?
        .result(json!({"passed": ok, "checks": checks}))
        .table(vec!["check", "status", "tolerance", "detail"], rows);
    Ok((report, ok))
}

fn dispatch(cli: &Cli) -> Result<(Report, bool), CliError> {
    let ok = |r: Report| Ok((r, true));
    match &cli.command {
        Command::Partitions { set, max_part, max_length } => ok(commands::partitions(*set, *max_part, *max_length)?),
        Command::Qfn { partition, rows, cap, tbar } => match (partition, rows) {
            (Some(p), None) => ok(commands::qfn(p, *cap, *tbar)?),
            (None, Some(n)) => ok(commands::qrows(*n, *cap)?),
            _ => Err(CliError::Validation("give --partition or --rows".into())),
        },
        Command::Sum { config } => ok(commands::sum(&config::load(config)?)?),
        Command::Specialize { config } => ok(commands::specialize(&config::load(config)?)?),
        Command::Sample { config } => ok(commands::sample_cmd(&config::load(config)?, cli.seed)?),
        Command::Oracle { config } => commands::oracle(&config::load(config)?),
        Command::Hirota { partition, config, poly, cap } => {
            let source = match (partition, config, poly) {
                (Some(p), None, None) => commands::TauSource::Partition(p.clone()),
                (None, Some(c), None) => commands::TauSource::Sum(config::load(c)?),
                (None, None, Some(p)) => commands::TauSource::Poly(config::load(p)?),
                _ => return Err(CliError::Validation("give one of --partition, --config or --poly".into())),
            };
            commands::hirota(&source, *cap)
        }
        Command::Integral { config } => ok(commands::integral(&config::load(config)?)?),
        Command::Grandz { config } => ok(commands::grandz(&config::load(config)?)?),
        Command::Braden { r, nmax, sign, order, panels, tolerance } => {
            let s = match sign.as_str() {
                "+" | "plus" => 1,
                "-" | "minus" => -1,
                other => return Err(CliError::Validation(format!("sign must be + or -, got {other:?}"))),
            };
            let qs = QuadratureSpec { order: *order, panels: *panels };
            ok(commands::braden(*r, s, *nmax, qs, *tolerance)?)
        }
        Command::VerifyAll { level } => verify_all(*level, cli.seed.unwrap_or(DEFAULT_SEED)),
    }
}

fn emit(cli: &Cli, report: &Report) -> Result<(), CliError> {
    let bytes = report.render(cli.format)?;
    match &cli.output {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(log::LevelFilter::Warn);
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = dispatch(&cli).and_then(|(report, ok)| {
        emit(&cli, &report)?;
        if ok {
            Ok(())
        } else {
            Err(CliError::Tolerance(format!("`{}` did not meet its tolerance", report.command)))
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
