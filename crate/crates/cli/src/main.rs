//! Command-line driver: `fmflow <command> --config PATH [--out DIR] [--seed N] [--threads N]`.

use clap::{Parser, ValueEnum};
use fmflow::analysis::config::SimConfig;
use fmflow::analysis::run::{run, Command};
use fmflow::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Steady,
    Flux,
    Transport,
    Mc,
    Damped,
    Rates,
    Lln,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Command {
        match c {
            Cmd::Steady => Command::Steady,
            Cmd::Flux => Command::Flux,
            Cmd::Transport => Command::Transport,
            Cmd::Mc => Command::Mc,
            Cmd::Damped => Command::Damped,
            Cmd::Rates => Command::Rates,
            Cmd::Lln => Command::Lln,
        }
    }
}

/// Free molecular flow experiments in a slab or disk.
#[derive(Debug, Parser)]
#[command(name = "fmflow", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    command: Cmd,
    /// Configuration file (TOML or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` or `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config { field: "threads".into(), message: e.to_string() })?;
    }
    let mut config = SimConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.clone().or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let manifest = run(cli.command.into(), &config, &out)?;
    println!("{} finished in {:.2} s", manifest.command, manifest.wall_clock_seconds);
    println!("{}", serde_json::to_string_pretty(&manifest.results).unwrap_or_default());
    for f in &manifest.outputs {
        println!("  {}  {}{}", f.sha256, f.file, if f.reused { " (reused)" } else { "" });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
