use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nvmag::commands::{self, Context, Format, NepTarget};
use nvmag::{CliError, RunConfig};

/// Synthesize and analyze lock-in CW-ODMR magnetometer traces.
#[derive(Debug, Parser)]
#[command(name = "nvmag", version)]
struct Cli {
    /// TOML run configuration, or `published` for the built-in preset (default).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the configured `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of the summary file written next to the data files.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic field trace from the [synth] section.
    Synth {
        /// Overrides `[synth] duration_s`.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Spectrum, sensitivity and Allan deviation of a trace CSV.
    Analyze { trace: PathBuf },
    /// Fit the five-peak derivative-Lorentzian model; synthesizes a spectrum
    /// when no input is given.
    FitOdmr { input: Option<PathBuf> },
    /// Noise budget at the operating point; fits p1, p2 to a data CSV when given.
    NoiseBudget { input: Option<PathBuf> },
    /// Monte Carlo NEP bandwidth: chain, lockin, one-pole:<f3db> or brick:<lo>:<hi>.
    Nep {
        #[arg(long, default_value = "chain")]
        filter: NepTarget,
    },
    /// Overlapping Allan deviation of a trace CSV.
    Adev { trace: PathBuf },
    /// Recompute the published numbers and compare against pinned tolerances.
    Reproduce,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let ctx = Context::new(config, cli.out, cli.format, cli.plot);
    let summary = match &cli.command {
        Command::Synth { duration } => commands::synth(&ctx, *duration)?,
        Command::Analyze { trace } => commands::analyze(&ctx, trace)?,
        Command::FitOdmr { input } => commands::fit_odmr(&ctx, input.as_deref())?,
        Command::NoiseBudget { input } => commands::noise_budget(&ctx, input.as_deref())?,
        Command::Nep { filter } => commands::nep(&ctx, filter)?,
        Command::Adev { trace } => commands::adev(&ctx, trace)?,
        Command::Reproduce => {
            let report = commands::reproduce(&ctx)?;
            println!("{report}");
            return Ok(report.pass);
        }
    };
    print!("{summary}");
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NVMAG_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
