//! Command-line surface: `polymerlab <experiment> --config <path> [--out <path>]`.
//!
//! The CSV table goes to `--out`; the JSON summary goes beside it with a
//! `.json` extension (or `.csv` for the table when `--out` already ends in
//! `.json`). Without `--out` the summary is printed to standard output.
//! Errors are written to standard error as JSON and mapped to exit codes
//! 1 (invalid input), 2 (resource cap) and 3 (numeric failure).

pub mod config;
pub mod emit;
pub mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;

use crate::error::{Error, Result};
pub use config::{parse_config, ExperimentConfig};
pub use run::{run, Experiment, Output};

#[derive(Debug, Parser)]
#[command(name = "polymerlab", version, about = "Directed-polymer transfer-matrix experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV output path; the JSON summary is written beside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Changes speed, never results.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// `(csv, json)` paths for an `--out` argument.
pub fn output_paths(out: &Path) -> (PathBuf, PathBuf) {
    if out.extension().is_some_and(|e| e == "json") {
        (out.with_extension("csv"), out.to_path_buf())
    } else {
        (out.to_path_buf(), out.with_extension("json"))
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let text = std::fs::read_to_string(&cli.config)?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let output = match cli.threads {
        Some(0) => return Err(Error::Argument("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?
            .install(|| run(cli.experiment, &cfg))?,
        None => run(cli.experiment, &cfg)?,
    };
    let summary = serde_json::to_string_pretty(&output.summary).expect("JSON values serialize") + "\n";
    match &cli.out {
        Some(out) => {
            let (csv_path, json_path) = output_paths(out);
            emit::write_atomic(&csv_path, output.table.to_csv().as_bytes())?;
            emit::write_atomic(&json_path, summary.as_bytes())?;
        }
        None => {
            std::io::stdout().write_all(summary.as_bytes())?;
        }
    }
    Ok(())
}

/// Structured error record written to standard error.
pub fn error_json(err: &Error) -> serde_json::Value {
    let problems = match err {
        Error::Config(list) => list.clone(),
        other => vec![other.to_string()],
    };
    json!({"error": {"kind": err.kind(), "exit_code": err.exit_code(), "message": err.to_string(), "problems": problems}})
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = Error::Argument(e.to_string().trim().to_string());
            eprintln!("{}", error_json(&err));
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            err.exit_code()
        }
    }
}
