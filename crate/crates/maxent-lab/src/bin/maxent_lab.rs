use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use maxent_lab::config::{apply_override, ConfigError, Scenario};
use maxent_lab::diagnostics::{suite_passes, CheckReport, CheckStatus};
use maxent_lab::experiments::{experiment_names, run_experiment, REGISTRY};

#[derive(Parser)]
#[command(name = "maxent-lab", about = "Batch runner for maximum entropy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiments in a scenario config.
    Run {
        config: PathBuf,
        /// Dotted-path overrides, e.g. --set drift.diffusion=0.5
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker count; kept at 1 so logs and outputs stay deterministic.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// List available experiments.
    List,
    /// Validate a config without running anything.
    Check { config: PathBuf },
}

#[derive(PartialEq, PartialOrd, Clone, Copy)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

fn log_level() -> LogLevel {
    match std::env::var("MAXENT_LAB_LOG").as_deref() {
        Ok("error") => LogLevel::Error,
        Ok("warn") => LogLevel::Warn,
        Ok("debug") => LogLevel::Debug,
        _ => LogLevel::Info,
    }
}

fn log(level: LogLevel, msg: &str) {
    if level <= log_level() {
        let tag = match level {
            LogLevel::Error => "error",
            LogLevel::Warn => "warn",
            LogLevel::Info => "info",
            LogLevel::Debug => "debug",
        };
        eprintln!("[{tag}] {msg}");
    }
}

fn load_scenario(config: &PathBuf, overrides: &[String]) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| ConfigError::Io(format!("{config:?}: {e}")))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    for assignment in overrides {
        apply_override(&mut value, assignment)?;
    }
    Scenario::from_value(value, &experiment_names())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn cmd_run(
    config: PathBuf,
    overrides: Vec<String>,
    out: Option<PathBuf>,
    workers: usize,
) -> ExitCode {
    let scenario = match load_scenario(&config, &overrides) {
        Ok(s) => s,
        Err(e) => {
            log(LogLevel::Error, &format!("config error: {e}"));
            return ExitCode::from(2);
        }
    };
    if workers > 1 {
        log(
            LogLevel::Debug,
            "worker count > 1 requested; running serially for deterministic output",
        );
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&scenario.output_dir));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        log(LogLevel::Error, &format!("cannot create {out_dir:?}: {e}"));
        return ExitCode::from(2);
    }

    let mut reports: Vec<CheckReport> = Vec::new();
    let mut checksums: BTreeMap<String, String> = BTreeMap::new();
    for spec in &scenario.experiments {
        log(LogLevel::Info, &format!("running {}", spec.name));
        match run_experiment(&scenario, spec, &out_dir) {
            Ok(outcome) => {
                for a in outcome.artifacts {
                    let name = a
                        .path
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    checksums.insert(name, a.sha256);
                }
                reports.extend(outcome.reports);
            }
            Err(e) => {
                // An experiment that cannot run at all still counts
                // against the exit code, and the rest keep going.
                log(LogLevel::Warn, &format!("{} failed: {e}", spec.name));
                reports.push(CheckReport {
                    name: format!("{}/error", spec.name),
                    inputs_digest: String::new(),
                    measured: f64::NAN,
                    bound: 0.0,
                    slack: f64::NAN,
                    pass: false,
                    status: CheckStatus::Fail,
                    runtime_secs: 0.0,
                    detail: e.to_string(),
                });
            }
        }
    }

    for r in &reports {
        let verdict = match r.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::HypothesisNotMet => "SKIP",
        };
        println!(
            "{verdict} {} measured={:.6e} bound={:.6e}",
            r.name, r.measured, r.bound
        );
    }

    // Runtimes vary between runs; zero them in the persisted report so
    // identical configs reproduce identical bytes.
    let frozen: Vec<CheckReport> = reports
        .iter()
        .map(|r| CheckReport {
            runtime_secs: 0.0,
            ..r.clone()
        })
        .collect();
    let report_json = format!(
        "{}\n",
        serde_json::to_string_pretty(&frozen).expect("reports serialize")
    );
    if let Err(e) = std::fs::write(out_dir.join("report.json"), &report_json) {
        log(LogLevel::Error, &format!("cannot write report.json: {e}"));
        return ExitCode::from(2);
    }
    checksums.insert("report.json".to_string(), sha256_hex(report_json.as_bytes()));

    let config_bytes = std::fs::read(&config).unwrap_or_default();
    let manifest = serde_json::json!({
        "scenario": scenario.name,
        "config_sha256": sha256_hex(&config_bytes),
        "overrides": overrides,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "files": checksums,
    });
    let manifest_json = format!(
        "{}\n",
        serde_json::to_string_pretty(&manifest).expect("manifest serializes")
    );
    if let Err(e) = std::fs::write(out_dir.join("manifest.json"), manifest_json) {
        log(LogLevel::Error, &format!("cannot write manifest.json: {e}"));
        return ExitCode::from(2);
    }

    if suite_passes(&reports) {
        log(LogLevel::Info, "all checks passed");
        ExitCode::SUCCESS
    } else {
        log(LogLevel::Error, "one or more checks failed");
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            overrides,
            out,
            workers,
        } => cmd_run(config, overrides, out, workers),
        Command::List => {
            for (name, description) in REGISTRY {
                println!("{name}: {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Check { config } => match load_scenario(&config, &[]) {
            Ok(s) => {
                println!("ok: {} ({} experiments)", s.name, s.experiments.len());
                ExitCode::SUCCESS
            }
            Err(e) => {
                log(LogLevel::Error, &format!("config error: {e}"));
                ExitCode::from(2)
            }
        },
    }
}
