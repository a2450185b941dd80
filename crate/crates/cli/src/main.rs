use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use qotto_cli::commands::{
    cmd_carnot, cmd_cycle, cmd_sweep, cmd_trajectory, cmd_two_step, write_file, BathSelector,
    TrajectoryRequest,
};
use qotto_cli::error::EXIT_OK;
use qotto_cli::scenario::{load_scenario, ScenarioFile, SweepSpec};
use qotto_cli::Result;

/// Quantum Otto engine with Markovian and TCL2 baths.
#[derive(Debug, Parser)]
#[command(name = "qotto", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve one bath contact from its equilibrium state and write a CSV.
    Trajectory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        bath: BathSelector,
        /// Horizon; defaults to the scenario's t_max or 100 relaxation times.
        #[arg(long)]
        t_max: Option<f64>,
        /// Stop at the first time omega/T_eff reaches this value.
        #[arg(long)]
        until_crossing: Option<f64>,
        /// Append constant omega_h/T_h and omega_c/T_c columns.
        #[arg(long)]
        reference_columns: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Otto cycle and its Carnot counterpart.
    Cycle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Carnot cycle between the Otto cycle's equilibrium states.
    Carnot {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-step preparation of the hot-contact endpoint state.
    TwoStep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cycle reports over a grid of parameter values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axes: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn scenario(path: &Path) -> Result<ScenarioFile> {
    load_scenario(path)?.with_env_overrides()
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Trajectory { config, bath, t_max, until_crossing, reference_columns, out } => {
            let req = TrajectoryRequest { bath, t_max, until_crossing, reference_columns };
            write_file(&out, &cmd_trajectory(&scenario(&config)?, &req)?)?;
            Ok(EXIT_OK)
        }
        Command::Cycle { config, out } => {
            let result = cmd_cycle(&scenario(&config)?)?;
            write_file(&out, &result.body)?;
            Ok(result.exit_code)
        }
        Command::Carnot { config, out } => {
            write_file(&out, &cmd_carnot(&scenario(&config)?)?)?;
            Ok(EXIT_OK)
        }
        Command::TwoStep { config, out } => {
            write_file(&out, &cmd_two_step(&scenario(&config)?)?)?;
            Ok(EXIT_OK)
        }
        Command::Sweep { config, axes, jobs, out } => {
            let spec = SweepSpec::load(&config, &axes, out)?;
            let summary = cmd_sweep(&spec, jobs)?;
            if summary.failed > 0 {
                error!("{} of {} sweep points failed; see index.csv", summary.failed, summary.points);
            }
            Ok(summary.exit_code)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qotto: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
