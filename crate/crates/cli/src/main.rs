use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tdas_dicke::config::{Config, Scenario};
use tdas_dicke::presets::{run_figure, FIGURE_IDS};
use tdas_dicke::{init_thread_pool, run, CliError};

/// Mean-field dynamics, stability and fluctuations of the open Dicke model
/// under delayed optical feedback.
#[derive(Parser)]
#[command(name = "tdas-dicke", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed points, thresholds and their rightmost characteristic roots.
    FixedPoints(RunArgs),
    /// Integrate the delayed mean-field equations at constant coupling.
    Simulate(RunArgs),
    /// Integrate while ramping the coupling up as sqrt(t / t0).
    Ramp(RunArgs),
    /// Rightmost characteristic root over a (gain, delay) grid.
    StabilityScan(RunArgs),
    /// Steady-state photon fluctuations over a coupling grid.
    Fluctuations(RunArgs),
    /// Critical exponent of the photon fluctuations.
    Exponent(RunArgs),
    /// Run the preset reproducing one figure's data.
    Figure {
        #[arg(value_name = "ID", help = format!("one of {}", FIGURE_IDS.join(", ")))]
        id: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cmd: Command) -> Result<i32, CliError> {
    init_thread_pool()?;
    let (scenario, args) = match cmd {
        Command::Figure { id, out } => return run_figure(&id, &out),
        Command::FixedPoints(a) => (Scenario::FixedPoints, a),
        Command::Simulate(a) => (Scenario::Simulate, a),
        Command::Ramp(a) => (Scenario::Ramp, a),
        Command::StabilityScan(a) => (Scenario::StabilityScan, a),
        Command::Fluctuations(a) => (Scenario::Fluctuations, a),
        Command::Exponent(a) => (Scenario::Exponent, a),
    };
    let config = Config::load(&args.config)?;
    let report = run(config, scenario, &args.out)?;
    if report.exit_code != 0 {
        eprintln!(
            "error: {}",
            report.summary["error"]["message"]
                .as_str()
                .unwrap_or("numerical failure")
        );
    }
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the configuration exit status.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
