//! Configuration, dispatch and file export for the `microtop` binary.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

pub use config::RunConfig;
use output::OutputDir;

/// Exit statuses of the binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const NON_CONVERGENCE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("not converged: {0}")]
    NonConvergence(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Solver(_) => exit::SOLVER,
            CliError::NonConvergence(_) => exit::NON_CONVERGENCE,
            CliError::Io(_) => exit::IO,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config_error",
            CliError::Solver(_) => "solver_failure",
            CliError::NonConvergence(_) => "not_converged",
            CliError::Io(_) => "io_error",
        }
    }
}

impl From<microtop::Error> for CliError {
    fn from(e: microtop::Error) -> Self {
        use microtop::Error as E;
        match e {
            E::Parameter(_) | E::Config(_) => CliError::Config(e.to_string()),
            E::Contract(_) | E::Assembly(_) | E::Solver { .. } => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Tabulate C*(s) for the configured microstructure.
    Homogenize,
    /// Solve the homogenized equilibrium for the configured design.
    Solve,
    /// Run projected-gradient optimization from the configured design.
    Optimize,
    /// Compare the reduced gradient with central differences.
    CheckGrad,
    /// Compare ε-problems with their limit along a list of ε.
    GammaSweep,
    /// Optimal 1D transition profile and its interface energy.
    MmProfile,
    /// Shape derivative of the sharp cost against transported difference quotients.
    SharpDerivative,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    config_path: Option<&'a Path>,
    config: Option<&'a RunConfig>,
    threads: usize,
    status: &'static str,
    exit_code: i32,
    error: Option<String>,
    /// Wall-clock seconds; the only field that varies between identical runs.
    elapsed_seconds: f64,
    outputs: Vec<String>,
}

/// Options that come from the command line rather than the config file.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Loads the configuration, runs `command` and writes `manifest.json` to
/// the output directory whatever the outcome. Returns the exit status.
pub fn run(
    command: Command,
    inv: &Invocation,
    env: impl IntoIterator<Item = (String, String)>,
) -> i32 {
    let start = Instant::now();
    let loaded = RunConfig::load(inv.config.as_deref(), env).map(|mut cfg| {
        if let Some(out) = &inv.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = inv.seed {
            cfg.seed = seed;
        }
        cfg
    });
    let out_root = match (&loaded, &inv.out) {
        (Ok(cfg), _) => cfg.out.clone(),
        (Err(_), Some(out)) => out.clone(),
        (Err(_), None) => RunConfig::default().out,
    };
    let mut dir = match OutputDir::create(&out_root) {
        Ok(d) => d,
        Err(e) => {
            log::error!("{e}");
            return e.exit_code();
        }
    };
    let (config, result) = match loaded {
        Ok(cfg) => {
            let r = commands::dispatch(command, &cfg, &mut dir);
            (Some(cfg), r)
        }
        Err(e) => (None, Err(e)),
    };
    let (status, code, error) = match &result {
        Ok(()) => ("ok", exit::OK, None),
        Err(e) => {
            log::error!("{e}");
            (e.status(), e.exit_code(), Some(e.to_string()))
        }
    };
    let mut outputs = dir.files.clone();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: "microtop",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_path: inv.config.as_deref(),
        config: config.as_ref(),
        threads: rayon::current_num_threads(),
        status,
        exit_code: code,
        error,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        outputs,
    };
    match output::write_json(&dir.root.join("manifest.json"), &manifest) {
        Ok(()) => code,
        Err(e) => {
            log::error!("{e}");
            if code == exit::OK {
                e.exit_code()
            } else {
                code
            }
        }
    }
}
