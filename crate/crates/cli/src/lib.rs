//! Experiment runner: reads a JSON experiment document, dispatches to the
//! library, and writes a JSON result plus a long-format CSV table.

mod commands;
pub mod config;
mod table;

use std::fmt;
use std::path::{Path, PathBuf};

use lka_core::LkaError;
use serde_json::{json, Value};

pub use config::{ExperimentConfig, Payload};
pub use table::{Cell, Table};

pub const VERSION: &str = concat!("lka ", env!("CARGO_PKG_VERSION"));

/// Failures mapped to exit codes: 2 for bad configs, 3 for numerical trouble.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    ConfigInvalid(String),
    NumericalFailure(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::ConfigInvalid(msg.into())
    }

    /// Attribute a library error to a config field.
    pub fn field(name: &str, e: LkaError) -> Self {
        if e.is_validation() {
            CliError::ConfigInvalid(format!("{name}: {e}"))
        } else {
            CliError::NumericalFailure(format!("{name}: {e}"))
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::NumericalFailure(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::ConfigInvalid(m) => write!(f, "config invalid: {m}"),
            CliError::NumericalFailure(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<LkaError> for CliError {
    fn from(e: LkaError) -> Self {
        if e.is_validation() {
            CliError::ConfigInvalid(e.to_string())
        } else {
            CliError::NumericalFailure(e.to_string())
        }
    }
}

/// What a command produced, before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    pub result: Value,
    pub table: Option<Table>,
    /// One line: the key metric and pass/fail against its tolerance.
    pub summary: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's seed.
    pub seed: Option<u64>,
    /// Overrides the config's output directory.
    pub out: Option<PathBuf>,
    pub no_timestamp: bool,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
}

/// Apply overrides, check the seed, and run the command.
pub fn execute(cfg: &mut ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    if let Some(s) = opts.seed {
        cfg.seed = Some(s);
    }
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::config("seed: missing (set it in the config or pass --seed)"))?;
    commands::run(&cfg.payload, seed)
}

/// The result document: version, resolved config, optional timestamp, result.
pub fn result_document(cfg: &ExperimentConfig, outcome: &Outcome, timestamp: bool) -> Value {
    let mut doc = json!({
        "version": VERSION,
        "command": outcome.command,
        "config": serde_json::to_value(cfg).expect("configs serialize"),
        "result": outcome.result,
    });
    if timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        doc["timestamp"] = json!(secs);
    }
    doc
}

/// Write `<command>.json` and, when there is a table, `<command>.csv` into `dir`.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    timestamp: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let io = |e: std::io::Error| CliError::config(format!("output: {e}"));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    let doc = result_document(cfg, outcome, timestamp);
    let json_path = dir.join(format!("{}.json", outcome.command));
    let mut text = serde_json::to_string_pretty(&doc).expect("documents serialize");
    text.push('\n');
    std::fs::write(&json_path, text).map_err(io)?;
    written.push(json_path);
    if let Some(t) = &outcome.table {
        let csv_path = dir.join(format!("{}.csv", outcome.command));
        std::fs::write(&csv_path, t.to_csv()).map_err(io)?;
        written.push(csv_path);
    }
    Ok(written)
}

/// Parse, run and write; the output directory is `opts.out`, then the
/// config's `output`, then `out`.
pub fn run_text(text: &str, opts: &RunOptions) -> Result<(Outcome, Vec<PathBuf>), CliError> {
    let mut cfg = parse_config(text)?;
    let outcome = execute(&mut cfg, opts)?;
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let files = write_outputs(&dir, &cfg, &outcome, !opts.no_timestamp)?;
    Ok((outcome, files))
}
