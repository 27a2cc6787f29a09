mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "coopsurface", version, about = "Cooperative optics of subwavelength emitter arrays")]
struct Cli {
    /// Flat key/value TOML file; flags override its entries
    #[arg(long, global = true, display_order = 900)]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, display_order = 900, default_value = "out")]
    out: PathBuf,

    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, display_order = 900, env = "COOPSURFACE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Band structure and polarizability along a Brillouin-zone path
    Bands(config::BandsFlags),
    /// Visibility map over spacing and detuning, with resonance ridges
    Polarizer(config::PolarizerFlags),
    /// Phase-retarder maps and the field line scan
    Waveplate(config::WaveplateFlags),
    /// Field map of a finite array
    Fieldmap(config::RealSpaceFlags),
    /// Thermal-disorder ensemble and averaged bands
    Disorder {
        #[command(flatten)]
        rs: config::RealSpaceFlags,
        #[command(flatten)]
        flags: config::DisorderFlags,
    },
    /// One random vacancy configuration per probability
    Vacancy {
        #[command(flatten)]
        rs: config::RealSpaceFlags,
        #[command(flatten)]
        flags: config::VacancyFlags,
    },
    /// Saturation: mean field and finite-array steady states
    Nonlinear(config::NonlinearFlags),
    /// Honeycomb polarizer: bands, Jones matrix and phase matrix
    HoneycombDemo(config::HoneycombFlags),
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Compute(anyhow::Error),
    Resource(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Compute(_) => 3,
            Failure::Resource(_) => 4,
        }
    }
}

impl From<coopsurface::Error> for Failure {
    fn from(e: coopsurface::Error) -> Self {
        match e {
            coopsurface::Error::ResourceLimit { .. } => Failure::Resource(e.into()),
            e if e.is_config() => Failure::Config(e.into()),
            e => Failure::Compute(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(e.into())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config(anyhow::anyhow!("thread count must be at least 1")));
        }
        coopsurface::exec::init_threads(n);
    }
    let file = match &cli.config {
        Some(p) => config::read_file(p).map_err(Failure::Config)?,
        None => toml::Table::new(),
    };
    let out = output::OutDir::new(&cli.out);
    match &cli.command {
        Command::Bands(f) => commands::bands(&file, f, &out),
        Command::Polarizer(flags) => commands::polarizer(&file, flags, &out),
        Command::Waveplate(flags) => commands::waveplate(&file, flags, &out),
        Command::Fieldmap(flags) => commands::fieldmap(&file, flags, &out),
        Command::Disorder { rs, flags } => commands::disorder(&file, rs, flags, &out),
        Command::Vacancy { rs, flags } => commands::vacancy(&file, rs, flags, &out),
        Command::Nonlinear(flags) => commands::nonlinear(&file, flags, &out),
        Command::HoneycombDemo(flags) => commands::honeycomb(&file, flags, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Config(e) | Failure::Compute(e) | Failure::Resource(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
