use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use budgetsim_cli::commands::{
    cmd_check_trace, cmd_gen_config, cmd_run, cmd_sweep, parse_values, Experiment,
};
use budgetsim_cli::CliError;

/// Deterministic simulator of a budget-based real-time publish/subscribe
/// executor: FIFO and sporadic-server scheduling on one virtual CPU.
#[derive(Parser)]
#[command(name = "budgetsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a config file and emit metrics (and a trace).
    Run {
        /// Scenario config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Write the event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the metrics CSV here (default: stdout).
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run a parameter sweep and write one CSV row per (value, topic).
    Sweep {
        /// `case1`, `case2`, `workconserving`, or a path to a config file
        /// whose sporadic budgets are re-derived from each sweep value.
        #[arg(long)]
        experiment: String,
        /// Comma-separated decimal fractions, e.g. `0.1,0.3,0.5,0.7,1.0`.
        #[arg(long)]
        values: String,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
        /// Also write each run's trace into this directory.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Verify a trace file against the post-hoc invariants.
    CheckTrace {
        /// Trace file produced by `run --trace` or `sweep --trace-dir`.
        trace: PathBuf,
    },
    /// Emit the built-in experiments as editable config files.
    GenConfig {
        /// Target directory (default: current directory).
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            trace,
            metrics,
        } => {
            let csv = cmd_run(&config, trace.as_deref(), metrics.as_deref())?;
            if metrics.is_none() {
                print!("{csv}");
            }
            Ok(())
        }
        Command::Sweep {
            experiment,
            values,
            output,
            trace_dir,
        } => {
            let experiment = Experiment::parse(&experiment);
            let values = parse_values(&values)?;
            cmd_sweep(&experiment, &values, &output, trace_dir.as_deref())
        }
        Command::CheckTrace { trace } => {
            let report = cmd_check_trace(&trace)?;
            print!("{}", report.render());
            Ok(())
        }
        Command::GenConfig { dir } => {
            for path in cmd_gen_config(&dir)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
