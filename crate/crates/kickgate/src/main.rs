use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use kickgate::{exit, exit_code, write_artifacts, Command, Invocation, RunConfig, Status};

#[derive(Parser)]
#[command(name = "kickgate", version, about = "Design and analysis of kick-based trapped-ion phase gates")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration; reference design when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "KICKGATE_OUT_DIR", default_value = ".")]
    out: PathBuf,

    /// Overrides the optimizer and synthesis RNG seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Only write these file types (repeatable); all by default.
    #[arg(long, global = true, value_enum)]
    format: Vec<Format>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Search for the fastest kick sequence meeting the gate tolerances.
    DesignGate,
    /// Evaluate a given sequence and draw its phase-space orbits.
    SimulateTrajectory,
    /// Excitation probability of a chirped pulse against pulse energy.
    RapScan,
    /// Recover the pulse-to-pulse phase from interferometer samples.
    FitEllipse,
    /// Sum the dispersion of the laser chain.
    Dispersion,
    /// Compile a sequence to a pulse-picker pattern and bitstream.
    Pattern,
    /// Spontaneous-emission error of a train of kicks.
    ErrorBudget,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::DesignGate => Command::DesignGate,
            Cmd::SimulateTrajectory => Command::SimulateTrajectory,
            Cmd::RapScan => Command::RapScan,
            Cmd::FitEllipse => Command::FitEllipse,
            Cmd::Dispersion => Command::Dispersion,
            Cmd::Pattern => Command::Pattern,
            Cmd::ErrorBudget => Command::ErrorBudget,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Svg,
    Bin,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
            Format::Bin => "bin",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn real_main(cli: &Cli) -> anyhow::Result<u8> {
    let (config, base) = match &cli.config {
        Some(p) => {
            let base = p.parent().map(PathBuf::from).unwrap_or_default();
            (RunConfig::load(p)?, base)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    let inv = Invocation::new(config, base, cli.seed);
    let cmd = Command::from(cli.command);
    let run = kickgate::run(cmd, &inv)?;
    let formats: Vec<&str> = cli.format.iter().map(|f| f.extension()).collect();
    let written = write_artifacts(&cli.out, &run.artifacts, &formats)
        .with_context(|| format!("writing to {}", cli.out.display()))?;
    println!("{}", run.summary);
    for name in written {
        eprintln!("wrote {}", cli.out.join(name).display());
    }
    Ok(match run.status {
        Status::Success => exit::OK,
        Status::Infeasible => {
            eprintln!("{}: no sequence met the tolerances; artifacts hold the best effort", cmd.name());
            exit::INFEASIBLE
        }
    })
}
