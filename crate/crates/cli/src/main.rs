mod config;
mod run;

use clap::error::ErrorKind;
use clap::Parser;
use config::{Command, Overrides, RunConfig};
use run::{run, RunError};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

const EXIT_USAGE: u8 = 64;

/// Normalized ground states of the Sobolev-critical NLS with combined
/// powers, as reproducible batch runs.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// What to compute; may also come from the config file
    command: Option<Command>,
    /// JSON file with any subset of the run settings
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Serialize)]
struct Tolerances {
    pohozaev: f64,
    mass: f64,
    shooting_rtol: f64,
    fiber_root: f64,
    fiber_membership: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    threads: usize,
    tolerances: Tolerances,
    started_unix: u64,
    elapsed_seconds: f64,
    artifacts: &'a [String],
    exit_code: u8,
    message: Option<String>,
}

fn resolve(cli: Cli) -> Result<RunConfig, RunError> {
    let base = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| RunError::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    Ok(base.apply(cli.command, cli.overrides))
}

fn configure_threads() -> Result<usize, RunError> {
    if let Ok(v) = std::env::var("CRITNLS_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| RunError::Usage(format!("CRITNLS_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Usage(e.to_string()))?;
    }
    Ok(rayon::current_num_threads())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let cfg = match resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let threads = match configure_threads() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let result = run(&cfg);
    let (artifacts, code, message) = match result {
        Ok(out) => match out.violation {
            Some(v) => (out.artifacts, 2, Some(format!("structural error: {v}"))),
            None => (out.artifacts, 0, None),
        },
        Err(e) => (vec![], e.exit_code(), Some(e.to_string())),
    };
    if let Some(m) = &message {
        eprintln!("{m}");
    }
    // no manifest without a usable output directory
    if cfg.command.is_some() && cfg.out.is_dir() {
        use critnls_core::{fiber, ground_state};
        let manifest = Manifest {
            tool: "critnls",
            version: env!("CARGO_PKG_VERSION"),
            config: &cfg,
            threads,
            tolerances: Tolerances {
                pohozaev: ground_state::POHOZAEV_TOL,
                mass: ground_state::MASS_TOL,
                shooting_rtol: ground_state::SHOOT_RTOL,
                fiber_root: fiber::ROOT_TOL,
                fiber_membership: fiber::MEMBERSHIP_TOL,
            },
            started_unix,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
            artifacts: &artifacts,
            exit_code: code,
            message,
        };
        let written = std::fs::File::create(cfg.out.join("manifest.json"))
            .map_err(RunError::from)
            .and_then(|f| serde_json::to_writer_pretty(f, &manifest).map_err(RunError::from));
        if let Err(e) = written {
            eprintln!("cannot write manifest: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(code)
}
