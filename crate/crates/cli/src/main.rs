use std::path::PathBuf;
use std::process::ExitCode;

use burgers_lab::config::{self, Scenario};
use burgers_lab::{fit_exponent, CSV_SCHEMAS, EXIT_CODES, EXIT_CONFIG};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "burgers-lab", version, about = "Forced Burgers experiments through the Cole-Hopf transformation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground state Ω of the periodic potential, u∞ and stationarity of e^{-tH}Ω.
    Groundstate(RunArgs),
    /// Cole-Hopf evolution, sandwich bound, convergence to u∞ and operator identities.
    Solve(RunArgs),
    /// Direct pseudo-spectral solver against Cole-Hopf under refinement.
    Compare(RunArgs),
    /// Bloch heat kernel on the line: decay diagnostics and Gaussian envelope.
    KernelDecay(RunArgs),
    /// Band structure and effective mass of the bottom band.
    Band(RunArgs),
    /// Free heat flow of shell data whose value at the origin never settles.
    Counterexample(RunArgs),
    /// Power-law fit of two columns of a CSV file.
    Fit(FitArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML scenario config; every key is optional.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel parts.
    #[arg(long, env = "BURGERS_LAB_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with a header row.
    csv: PathBuf,
    /// Column used as x.
    #[arg(long, default_value = "t")]
    x: String,
    /// Column used as y.
    #[arg(long)]
    y: String,
}

fn main() -> ExitCode {
    let help = format!("{}\n{CSV_SCHEMAS}\n{EXIT_CODES}", config::defaults_table());
    let matches = Cli::command().after_long_help(help).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let (scenario, args) = match cli.command {
        Command::Groundstate(a) => (Scenario::Groundstate, a),
        Command::Solve(a) => (Scenario::Solve, a),
        Command::Compare(a) => (Scenario::Compare, a),
        Command::KernelDecay(a) => (Scenario::KernelDecay, a),
        Command::Band(a) => (Scenario::Band, a),
        Command::Counterexample(a) => (Scenario::Counterexample, a),
        Command::Fit(f) => return fit(&f),
    };
    let cfg = match config::load(&args.config, scenario, args.out.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    ExitCode::from(burgers_lab::execute(&cfg) as u8)
}

fn fit(args: &FitArgs) -> ExitCode {
    match fit_exponent(&args.csv, &args.x, &args.y) {
        Ok(line) => {
            println!("slope {}", line.slope);
            println!("intercept {}", line.intercept);
            println!("residual {}", line.residual);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}: {e}", args.csv.display());
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
