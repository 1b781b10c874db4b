use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jacobi_spectra::experiment::{emit_plot, run_experiment, ExperimentConfig, RunOutcome, Status};
use jacobi_spectra::Error;

/// Spectral experiments for Jacobi operators with power-growth off-diagonals.
#[derive(Parser)]
#[command(name = "jacobi-spectra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output prefix; overrides `output` in the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the built-in identity, solver and commutator checks.
    Validate,
    /// Print two-column plot data (first column, COLUMN) from a CSV file.
    EmitPlot { csv: PathBuf, column: String },
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn report(out: &RunOutcome) {
    for c in &out.summary.checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Degenerate => "DEGENERATE",
        };
        let detail = match (&c.fit, c.value) {
            (Some(f), _) => format!("slope {:.4}", f.slope),
            (None, Some(v)) => format!("value {v:.3e}"),
            _ => String::new(),
        };
        let gate = if c.gating { "" } else { " (diagnostic)" };
        println!("{tag:<10} {}{gate} {detail}", c.name);
    }
}

fn usage(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output } => {
            let cfg = match ExperimentConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => return usage(e),
            };
            let out = match run_experiment(&cfg) {
                Ok(o) => o,
                Err(e @ Error::Config(_)) => return usage(e),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FAIL);
                }
            };
            let prefix = output.unwrap_or_else(|| cfg.output.clone());
            match out.write(&prefix) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                }
                Err(e) => return usage(e),
            }
            report(&out);
            ExitCode::from(out.exit_code() as u8)
        }
        Command::Validate => {
            let cfg = ExperimentConfig::parse("[experiment]\nkind = validate\noutput = validate\n")
                .expect("built-in config parses");
            match run_experiment(&cfg) {
                Ok(out) => {
                    report(&out);
                    ExitCode::from(out.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAIL)
                }
            }
        }
        Command::EmitPlot { csv, column } => {
            let text = match std::fs::read_to_string(&csv) {
                Ok(t) => t,
                Err(e) => return usage(Error::Io(format!("{}: {e}", csv.display()))),
            };
            match emit_plot(&text, &column) {
                Ok(s) => {
                    print!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => usage(e),
            }
        }
    }
}
