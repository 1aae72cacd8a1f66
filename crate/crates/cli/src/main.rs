//! rotor-dyn: deterministic command-line runner for the coupled
//! kicked-rotor simulation suite.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 runtime
//! numerical error. The worker thread count is taken from the
//! ROTOR_DYN_THREADS environment variable; seeds always come from the
//! configuration (never from the clock).

mod commands;
mod config;
mod series_io;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use commands::OutputOptions;

#[derive(Parser)]
#[command(name = "rotor-dyn", version, about = "Stroboscopic kicked-rotor simulations and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override or supply configuration values, e.g. --set params.K=6
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write JSON mirrors next to the CSV files
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Stroboscopic trajectory: energy and order-parameter records
    Evolve(RunArgs),
    /// Largest-Lyapunov-exponent estimation, optionally sweeping M
    Lyapunov(RunArgs),
    /// Conserved-quantity deviation experiment with power-law fits
    Nekhoroshev(RunArgs),
    /// Exact-diagonalization level-spacing scan over kick strengths
    EdScan(RunArgs),
    /// Post-processing of series files: fits and coarse-grained noise
    Analyze(RunArgs),
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("ROTOR_DYN_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// 2 for validation/configuration problems, 3 for runtime numerical ones.
fn exit_code_for(err: &anyhow::Error) -> i32 {
    use rotor_core::Error as CoreError;
    if let Some(core) = err.downcast_ref::<CoreError>() {
        return match core {
            CoreError::InvalidParams(_)
            | CoreError::IndexOutOfRange(_)
            | CoreError::LengthMismatch(_)
            | CoreError::DimensionLimit(_) => 2,
            CoreError::Series(_)
            | CoreError::Fit(_)
            | CoreError::Linalg(_)
            | CoreError::Numerical(_) => 3,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    // config parsing, schema, unknown keys, bad flag values
    2
}

fn run(args: &RunArgs, body: impl FnOnce(&config::FileConfig, &OutputOptions) -> anyhow::Result<()>) -> i32 {
    let cfg = match config::load_config(args.config.as_deref(), &args.sets) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return 2;
        }
    };
    let out = OutputOptions { dir: args.out.clone(), json: args.json };
    match body(&cfg, &out) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code_for(&e);
            eprintln!("error: {e:#}");
            code
        }
    }
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Evolve(a) => run(a, commands::cmd_evolve),
        Command::Lyapunov(a) => run(a, commands::cmd_lyapunov),
        Command::Nekhoroshev(a) => run(a, commands::cmd_nekhoroshev),
        Command::EdScan(a) => run(a, commands::cmd_ed_scan),
        Command::Analyze(a) => run(a, commands::cmd_analyze),
    };
    std::process::exit(code);
}
