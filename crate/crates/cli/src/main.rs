//! Command-line driver: exact quench simulations of two bosonic gases
//! on a ring, with CSV output and optional gnuplot scripts.
//!
//! Exit codes: 0 success, 2 configuration error, 3 capacity error,
//! 4 numeric-integrity error.

mod config;
mod output;
mod presets;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};

use config::Mode;
use runner::{RunContext, RunError, RunErrorKind};

#[derive(Parser)]
#[command(
    name = "ringquench",
    version,
    about = "Exact quench dynamics of two bosonic gases on a ring lattice",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state observables of a single gas (energy, current,
    /// momentum distribution, visibility).
    GroundState(RunArgs),
    /// Propagate the interspecies quench and record current reduction
    /// and entanglement series.
    Quench(RunArgs),
    /// Scan the Peierls phase of a single gas and compare the
    /// visibility against its closed form.
    VisibilityScan(RunArgs),
    /// Closed-form proportionality factors (no simulation).
    Theory(RunArgs),
    /// Project the pre-quench state onto the post-quench eigenbasis.
    SpectrumProjection(RunArgs),
    /// Repeat the quench over a parameter axis and tabulate averages.
    Sweep(RunArgs),
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::GroundState(_) => Mode::GroundState,
            Command::Quench(_) => Mode::Quench,
            Command::VisibilityScan(_) => Mode::VisibilityScan,
            Command::Theory(_) => Mode::Theory,
            Command::SpectrumProjection(_) => Mode::SpectrumProjection,
            Command::Sweep(_) => Mode::Sweep,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::GroundState(a)
            | Command::Quench(a)
            | Command::VisibilityScan(a)
            | Command::Theory(a)
            | Command::SpectrumProjection(a)
            | Command::Sweep(a) => a,
        }
    }
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
struct RunArgs {
    /// Configuration file (key = value lines, optional [curve.<name>]
    /// sections).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Built-in preset name (see the presets/ directory).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    /// Output directory (created if missing; default: current
    /// directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for sweep points and curves (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Also write a gnuplot script referencing the emitted CSVs.
    #[arg(long)]
    emit_plots: bool,
}

fn fail(err: &RunError) -> ExitCode {
    eprintln!("{err}");
    ExitCode::from(err.exit_code() as u8)
}

fn config_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {message}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = cli.command.mode();
    let args = cli.command.args();

    let (text, stem) = match (&args.config, &args.preset) {
        (Some(path), None) => match std::fs::read_to_string(path) {
            Ok(text) => {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "run".to_string());
                (text, stem)
            }
            Err(e) => return config_error(format_args!("cannot read {}: {e}", path.display())),
        },
        (None, Some(name)) => match presets::find(name) {
            Some(p) => (p.ini.to_string(), p.name.to_string()),
            None => {
                return config_error(format_args!(
                    "unknown preset '{name}'; available: {}",
                    presets::names()
                ))
            }
        },
        // The ArgGroup makes these unreachable, but stay defensive.
        _ => return config_error("exactly one of --config and --preset must be given"),
    };

    let cfg = match config::parse_config(&text, Some(mode)) {
        Ok(cfg) => cfg,
        Err(e) => return config_error(e),
    };

    if let Some(n) = args.threads {
        if n == 0 {
            return config_error("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return config_error(format_args!("cannot configure {n} worker threads: {e}"));
        }
    }

    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return config_error(format_args!("cannot create {}: {e}", out_dir.display()));
    }

    let ctx = RunContext {
        out_dir,
        stem,
        preset: args.preset.clone(),
        emit_plots: args.emit_plots,
    };

    let started = Instant::now();
    match runner::execute(&cfg, &ctx) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            println!("wall time: {:.3} s", started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            debug_assert!(matches!(
                e.kind,
                RunErrorKind::Config | RunErrorKind::Capacity | RunErrorKind::Numeric
            ));
            fail(&e)
        }
    }
}
