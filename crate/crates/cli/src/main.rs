use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use forced_kepler_cli::{parse_config, run, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "fkepler", version, about = "Periodic solutions of the forced Kepler problem")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run file with `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Multi-start minimization of the action in a winding class.
    Minimize,
    /// The two Kepler arcs joining `arcs.x_minus` and `arcs.x_plus`.
    Arcs,
    /// Collision detection, blow-up profiles and the solution certificate.
    Analyze,
    /// Removes each collision by splicing in Kepler arcs.
    Surgery,
    /// Built-in constant and invariant checks.
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Minimize => Command::Minimize,
            Cmd::Arcs => Command::Arcs,
            Cmd::Analyze => Command::Analyze,
            Cmd::Surgery => Command::Surgery,
            Cmd::Verify => Command::Verify,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.command = cli.command.into();
    if let Some(out) = &cli.out {
        cfg.out = out.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.minimize.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match load(&cli).and_then(|cfg| run(&cfg)) {
        Ok(summary) => {
            print!("{}", summary.render());
            ExitCode::from(summary.status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
