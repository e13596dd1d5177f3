use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use queuekit::cli::{self, report, Format, Mode, RunOptions};
use queuekit::Error;

#[derive(Parser)]
#[command(name = "queuekit", version, about = "Analytic queueing models checked against simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and numerical analytics for every model.
    Analyze(RunArgs),
    /// Simulation estimates with 95% batch-means intervals.
    Simulate(RunArgs),
    /// Analytics against simulation; exits 2 on any breach.
    Validate(RunArgs),
    /// Print the model-file JSON schema.
    Schema,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    /// Model file (JSON).
    model: PathBuf,
    /// Master seed; overrides the model file (default 42).
    #[arg(long)]
    seed: Option<u64>,
    /// Departures (served customers) per replication.
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Half-widths within which a delta passes.
    #[arg(long, default_value_t = cli::DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Write per-batch simulation samples as CSV.
    #[arg(long)]
    batches_out: Option<PathBuf>,
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb_analytic: f64,
}

const EXIT_USAGE: u8 = 1;
const EXIT_INTERNAL: u8 = 3;

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let (mode, args) = match parsed.command {
        Command::Schema => {
            print!("{}", cli::MODEL_SCHEMA);
            return ExitCode::SUCCESS;
        }
        Command::Analyze(a) => (Mode::Analyze, a),
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Validate(a) => (Mode::Validate, a),
    };
    if !(args.tolerance.is_finite() && args.tolerance > 0.0) {
        eprintln!("error: --tolerance must be positive");
        return ExitCode::from(EXIT_USAGE);
    }
    let file = match cli::parse_model_file(&args.model) {
        Ok(f) => f,
        Err(Error::Schema(violations)) => {
            for v in violations {
                eprintln!("schema violation: {v}");
            }
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            eprintln!("error: {}: {e}", args.model.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let opts = RunOptions { seed: args.seed, horizon: args.horizon, tolerance: args.tolerance, perturb: args.perturb_analytic };
    if let Err(e) = opts.sim_config(&file).validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    let run = cli::run(&file, mode, &opts);
    let format = match args.format {
        OutFormat::Json => Format::Json,
        OutFormat::Csv => Format::Csv,
    };
    let written = cli::emit_report(&run.report, format, args.out.as_deref()).and_then(|_| match &args.batches_out {
        Some(p) => Ok(std::fs::write(p, report::batches_csv(&run.batches)?)?),
        None => Ok(()),
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_INTERNAL);
    }
    ExitCode::from(run.exit_code() as u8)
}
