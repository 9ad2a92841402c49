use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use densopt_cli::commands::{self, CheckKind, Overrides, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "densopt", version, about = "Convex optimization over probability densities with KKT certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Output directory (overrides `[output] dir`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    tol_eq: Option<f64>,
    #[arg(long, global = true)]
    tol_ineq: Option<f64>,
    #[arg(long, global = true)]
    tol_stat: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and write the density and certificate
    Solve { config: PathBuf },
    /// Re-check a density and multipliers against the configured problem
    Verify { density: PathBuf, config: PathBuf, multipliers: PathBuf },
    /// Run a property check on the configured objective functional
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        config: PathBuf,
    },
    /// Solve the Rényi-entropy maximization with fixed mean and variance
    RenyiDemo {
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2001)]
        nodes: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let f = cli.flags;
    let overrides = Overrides { out: f.out, tol_eq: f.tol_eq, tol_ineq: f.tol_ineq, tol_stat: f.tol_stat, seed: f.seed };
    let result = match cli.command {
        Command::Solve { config } => commands::cmd_solve(&config, &overrides),
        Command::Verify { density, config, multipliers } => {
            commands::cmd_verify(&density, &config, &multipliers, &overrides)
        }
        Command::Check { kind, config } => commands::cmd_check(kind, &config, &overrides),
        Command::RenyiDemo { alpha, sigma, nodes } => commands::cmd_renyi_demo(alpha, sigma, nodes, &overrides),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
