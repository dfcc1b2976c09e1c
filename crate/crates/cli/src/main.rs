use std::path::PathBuf;

use clap::Parser;
use microtop_cli::{exit, run, Command, Invocation};

/// Two-scale phase-field topology and microstructure optimization.
#[derive(Debug, Parser)]
#[command(name = "microtop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the internal parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized directions (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::error!("cannot configure {n} threads: {e}");
            std::process::exit(exit::CONFIG);
        }
    }
    let inv = Invocation {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
    };
    std::process::exit(run(cli.command, &inv, std::env::vars()));
}
