use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cnslab_cli::{analyze, config::Config, run, verify};

/// Spectral laboratory for compressible non-isentropic flows with
/// concentration monitoring.
#[derive(Parser)]
#[command(name = "cnslab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a config file.
    Run {
        /// Path to the TOML configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output.directory).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Dotted-path config overrides, e.g. --override run.t_end=0.25
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the oracle verification suite and print pass/fail per check.
    Verify,
    /// Recompute diagnostics and monitors from stored snapshots.
    Analyze {
        /// Run output directory or a single snapshot directory.
        input: PathBuf,
        /// Where to write analysis.ndjson / analysis.csv
        /// (default: INPUT/analysis).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Lebesgue exponent for gradient norms.
        #[arg(long, default_value_t = 4.0)]
        q_tilde: f64,
    },
}

// exit codes: 0 success (any physics verdict), 2 config error,
// 3 non-finite abort, 4 i/o error, 1 verification failure
fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output,
            seed,
            overrides,
        } => {
            let cfg = match Config::from_path(&config, &overrides, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            let out_dir = output
                .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            match run::run_simulation(&cfg, &out_dir) {
                Ok(artifacts) => {
                    println!(
                        "verdict: {} (artifacts in {})",
                        serde_json::to_string(&artifacts.verdict).unwrap_or_default(),
                        artifacts.output_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("run error: {e:#}");
                    let msg = format!("{e:#}");
                    if msg.contains("non-finite") {
                        ExitCode::from(3)
                    } else if msg.contains("scenario") || msg.contains("config") {
                        ExitCode::from(2)
                    } else {
                        ExitCode::from(4)
                    }
                }
            }
        }
        Command::Verify => {
            let report = verify::verify();
            if report.failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Analyze {
            input,
            output,
            q_tilde,
        } => {
            let out_dir = output.unwrap_or_else(|| input.join("analysis"));
            match analyze::analyze(&input, &out_dir, q_tilde) {
                Ok(n) => {
                    println!("analyzed {n} snapshots into {}", out_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("analyze error: {e:#}");
                    ExitCode::from(4)
                }
            }
        }
    }
}
