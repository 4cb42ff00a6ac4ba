use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lorentz_lab::runner::{self, CheckId, ScenarioSource};
use lorentz_lab::scenario;

#[derive(Parser)]
#[command(name = "lorentz-lab", version, about = "Numerical checks for weighted Lorentzian comparison geometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks listed in a JSON configuration file.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed, overriding `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Relative ODE tolerance; the absolute tolerance becomes tol/100.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// List the available checks.
    ListChecks,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for (name, about) in scenario::builtin_catalog() {
                println!("{name:<18} {about}");
            }
            ExitCode::SUCCESS
        }
        Command::ListChecks => {
            for id in CheckId::ALL {
                println!("{:<24} {}", id.as_str(), id.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, out, seed, tol } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let mut cfg = match runner::parse_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error in {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            // scenario files are relative to the config file
            if let ScenarioSource::File(p) = &mut cfg.scenario {
                if p.is_relative() {
                    if let Some(dir) = config.parent() {
                        *p = dir.join(&*p);
                    }
                }
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(tol) = tol {
                if !(tol.is_finite() && tol > 0.0) {
                    eprintln!("error: --tol must be a positive number");
                    return ExitCode::from(2);
                }
                cfg.tolerances.rtol = tol;
                cfg.tolerances.atol = tol / 100.0;
            }
            let summary = runner::run(&cfg);
            print!("{}", summary.report);
            ExitCode::from(summary.exit_code as u8)
        }
    }
}
