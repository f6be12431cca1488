use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tdns_cli::config::parse_config;
use tdns_cli::run::{run, Command, RunError};

/// Stochastic Navier–Stokes on a moving domain: simulation and diagnostics.
#[derive(Debug, Parser)]
#[command(name = "tdns", version)]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides output.dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides solver.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), RunError> {
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text).map_err(|e| {
        // config errors carry the file name for the user
        eprintln!("in {}:", args.config.display());
        e
    })?;
    if let Some(dir) = &args.out {
        cfg.out_dir = dir.clone();
        cfg.effective.insert("output.dir".into(), dir.display().to_string());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.effective.insert("solver.seed".into(), seed.to_string());
    }
    let out = run(args.command, &cfg)?;
    println!("wrote {} files to {}", out.files.len() + 1, cfg.out_dir.display());
    Ok(())
}
