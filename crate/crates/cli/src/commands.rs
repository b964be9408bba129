//! Command implementations behind the CLI surface: `run`, `sweep`,
//! `check-trace`, `gen-config`.

use std::fs;
use std::path::{Path, PathBuf};

use budgetsim_core::workload::Scenario;
use budgetsim_core::{
    build_case1, build_case2, build_workconserving, run_scenario, Fraction, Policy, Trace,
    CSV_HEADER,
};

use crate::check::{check_trace, Report};
use crate::config::ConfigFile;
use crate::error::CliError;

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(&format!("reading {}", path.display()), e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(&format!("writing {}", path.display()), e))
}

pub fn load_scenario(config_path: &Path) -> Result<Scenario, CliError> {
    let text = read_file(config_path)?;
    ConfigFile::parse(&text)?.to_scenario()
}

/// Runs a single scenario from a config file; writes the metrics CSV (stdout
/// unless a path is given) and optionally the trace.
pub fn cmd_run(
    config_path: &Path,
    trace_path: Option<&Path>,
    metrics_path: Option<&Path>,
) -> Result<String, CliError> {
    let scenario = load_scenario(config_path)?;
    let (metrics, trace) =
        run_scenario(&scenario).map_err(|e| CliError::Validation(e.to_string()))?;
    let csv = metrics.to_csv("-");
    if let Some(path) = metrics_path {
        write_file(path, &csv)?;
    }
    if let Some(path) = trace_path {
        write_file(path, &trace.to_text())?;
    }
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Experiment {
    Case1,
    Case2,
    Workconserving,
    Custom(PathBuf),
}

impl Experiment {
    pub fn parse(s: &str) -> Experiment {
        match s {
            "case1" => Experiment::Case1,
            "case2" => Experiment::Case2,
            "workconserving" => Experiment::Workconserving,
            other => Experiment::Custom(PathBuf::from(other)),
        }
    }

    fn scenario_for(&self, value: Fraction) -> Result<Scenario, CliError> {
        match self {
            Experiment::Case1 => {
                build_case1(value).map_err(|e| CliError::Validation(e.to_string()))
            }
            Experiment::Case2 => Ok(build_case2()),
            Experiment::Workconserving => {
                build_workconserving(value).map_err(|e| CliError::Validation(e.to_string()))
            }
            Experiment::Custom(path) => {
                let mut scenario = load_scenario(path)?;
                // The sweep value re-budgets every sporadic subscription as a
                // fraction of its own replenishment period.
                for sub in &mut scenario.subscriptions {
                    if let Policy::Sporadic {
                        low_priority,
                        repl_period,
                        max_repl,
                        ..
                    } = sub.sched.policy
                    {
                        let budget = value
                            .of(repl_period)
                            .map_err(|e| CliError::Validation(e.to_string()))?;
                        sub.sched.policy = Policy::Sporadic {
                            low_priority,
                            init_budget: budget,
                            repl_period,
                            max_repl,
                        };
                    }
                }
                scenario
                    .validate()
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                Ok(scenario)
            }
        }
    }
}

/// Runs one scenario per sweep value and writes a single CSV with one row per
/// (value, topic). Optionally writes each run's trace into `trace_dir`.
pub fn cmd_sweep(
    experiment: &Experiment,
    values: &[Fraction],
    output: &Path,
    trace_dir: Option<&Path>,
) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Validation(
            "sweep requires at least one value".into(),
        ));
    }
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for value in values {
        let scenario = experiment.scenario_for(*value)?;
        let (metrics, trace) =
            run_scenario(&scenario).map_err(|e| CliError::Validation(e.to_string()))?;
        csv.push_str(&metrics.csv_rows(&value.to_string()));
        if let Some(dir) = trace_dir {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::io(&format!("creating {}", dir.display()), e))?;
            let name = format!("sweep_{value}.trace");
            write_file(&dir.join(name), &trace.to_text())?;
        }
    }
    write_file(output, &csv)
}

/// Parses a trace file and runs the post-hoc invariant checks.
pub fn cmd_check_trace(trace_path: &Path) -> Result<Report, CliError> {
    let text = read_file(trace_path)?;
    let trace = Trace::parse(&text).map_err(|e| CliError::Validation(e.to_string()))?;
    let report = check_trace(&trace);
    if report.all_passed() {
        Ok(report)
    } else {
        Err(CliError::CheckFailed(report.render()))
    }
}

/// Emits the three built-in experiments as editable config files.
pub fn cmd_gen_config(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(&format!("creating {}", dir.display()), e))?;
    let case1 = build_case1("0.3".parse().expect("static fraction"))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let workconserving = build_workconserving("0.5".parse().expect("static fraction"))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let outputs = [
        ("case1.toml", case1),
        ("case2.toml", build_case2()),
        ("workconserving.toml", workconserving),
    ];
    let mut written = Vec::new();
    for (name, scenario) in outputs {
        let path = dir.join(name);
        write_file(&path, &ConfigFile::from_scenario(&scenario).to_toml())?;
        written.push(path);
    }
    Ok(written)
}

pub fn parse_values(csv: &str) -> Result<Vec<Fraction>, CliError> {
    csv.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<Fraction>()
                .map_err(|e| CliError::Validation(e.to_string()))
        })
        .collect()
}
