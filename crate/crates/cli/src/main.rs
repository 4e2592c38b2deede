use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opfix_cli::{
    cmd_audit, cmd_bounds, cmd_simulate, exit_code, format_audit, format_report, Only, Overrides,
};

#[derive(Parser)]
#[command(name = "opfix", version, about = "Stochastic fixed-point iterations: simulation, bounds, coverage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Replaces `run.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces `run.trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Replaces `run.horizon`.
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory; defaults to `output.directory`, then `opfix-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict output to one proposition, or `eta` for the eta table.
    #[arg(long)]
    only: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, trials: self.trials, horizon: self.horizon }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo ensemble and check every requested bound.
    Simulate(RunArgs),
    /// Evaluate bound curves without simulating.
    Bounds(RunArgs),
    /// Check closure rules and sampler parameters against empirical moments.
    Audit {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_only(only: &Option<String>) -> opfix_core::Result<Option<Only>> {
    only.as_deref().map(str::parse).transpose()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => parse_only(&a.only)
            .and_then(|only| cmd_simulate(&a.config, a.out.as_deref(), a.overrides(), only))
            .map(|s| {
                print!("{}", format_report(&s.report));
                println!("wrote {}", s.out_dir.display());
                s.exit_code()
            }),
        Command::Bounds(a) => parse_only(&a.only)
            .and_then(|only| cmd_bounds(&a.config, a.out.as_deref(), a.overrides(), only))
            .map(|s| {
                println!("wrote {} rows to {}", s.rows, s.path.display());
                0
            }),
        Command::Audit { samples, seed, out } => cmd_audit(*samples, *seed, out.as_deref()).map(|s| {
            print!("{}", format_audit(&s));
            s.exit_code()
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
