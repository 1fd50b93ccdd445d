use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use vqrsim::pipeline::{cmd_compare, cmd_run, cmd_synth, report_json};

/// Research-assessment simulator: synthetic corpora, three scoring
/// scenarios, and ranking comparisons.
#[derive(Parser)]
#[command(name = "vqrsim", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus from a JSON spec.
    Synth {
        /// Synth spec file.
        #[arg(long)]
        config: PathBuf,
        /// Directory receiving the four corpus CSV files.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run all three scenarios and write rankings and comparisons.
    Run {
        /// Run config file.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two ranking CSV files.
    Compare {
        list_a: PathBuf,
        list_b: PathBuf,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Synth { config, out, seed } => {
            let paths = cmd_synth(&config, &out, seed)?;
            eprintln!(
                "corpus written to {}",
                paths.universities.parent().unwrap_or(&out).display()
            );
        }
        Command::Run { config, out } => {
            let summary = cmd_run(&config, out.as_deref())?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("{} report files written", summary.files.len());
        }
        Command::Compare { list_a, list_b, out } => {
            let json = report_json(&cmd_compare(&list_a, &list_b)?);
            match out {
                Some(path) => std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{json}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
