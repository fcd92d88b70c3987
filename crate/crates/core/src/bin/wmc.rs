use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weighted_curvature::cli::{self, exit_code_for, Outcome, EXIT_USAGE};
use weighted_curvature::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "wmc", version, about = "Weighted mean curvature checks and graph solver")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sampling seed (overrides [check] seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid spacing (overrides [domain] h).
    #[arg(long = "grid-h", global = true)]
    grid_h: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural conditions on domain, weight and curvature.
    Check,
    /// Solve the Dirichlet problem by homotopy continuation.
    Solve,
    /// Sample the weighted mean curvature of an analytic surface.
    Curvature {
        /// plane, sphere or paraboloid; defaults to the [surface] section.
        #[arg(long)]
        surface: Option<String>,
    },
    /// Check the weight matrix axioms on random directions.
    ValidateWeight,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let mut cfg = match &args.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
        },
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides { out: args.out, seed: args.seed, grid_h: args.grid_h });

    let result = match &args.command {
        Command::Check => cli::cmd_check(&cfg),
        Command::Solve => cli::cmd_solve(&cfg),
        Command::Curvature { surface } => cli::cmd_curvature(&cfg, surface.as_deref()),
        Command::ValidateWeight => cli::cmd_validate_weight(&cfg),
    };
    match result {
        Ok(Outcome { exit, summary, files }) => {
            println!("{summary}");
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
