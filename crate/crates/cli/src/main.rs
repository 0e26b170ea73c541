use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mcf_cli::{build_config, execute, flag_pairs, parse_pairs, run::configure_threads, CliError};

/// Mean curvature flow of closed surfaces.
///
/// Keys are set in a `key = value` file and overridden by `--key value`
/// flags. Run with `--help` for the command list.
#[derive(Debug, Parser)]
#[command(name = "mcf", version)]
struct Args {
    /// sphere-convergence, dumbbell, mesh-gen or single-run
    command: mcf_cli::Command,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` overrides, e.g. `--tau 0.01 --output out`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

fn run(args: Args) -> Result<(), CliError> {
    configure_threads()?;
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    let config = build_config(Some(args.command), &file, &flag_pairs(&args.overrides)?)?;
    let summary = execute(&config)?;
    for m in &summary.messages {
        println!("{m}");
    }
    println!(
        "wrote {} files to {}",
        summary.files.len(),
        config.output.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcf: {e}");
            ExitCode::FAILURE
        }
    }
}
