use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lka_cli::{run_text, CliError, RunOptions};

/// Run one experiment document and write its JSON and CSV results.
#[derive(Parser, Debug)]
#[command(name = "lka", version, about)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores. Falls back to LKA_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Leave the timestamp out of the result document.
    #[arg(long)]
    no_timestamp: bool,
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(k) = flag {
        return Ok(k);
    }
    match std::env::var("LKA_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("LKA_THREADS: not a thread count: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = (|| {
        let threads = thread_count(args.threads)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("threads: {e}")))?;
        let text = std::fs::read_to_string(&args.config)
            .map_err(|e| CliError::config(format!("config: {}: {e}", args.config.display())))?;
        let opts = RunOptions {
            seed: args.seed,
            out: args.out.clone(),
            no_timestamp: args.no_timestamp,
        };
        run_text(&text, &opts)
    })();
    match result {
        Ok((outcome, files)) => {
            println!("{}", outcome.summary);
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
