//! `optothermo`: figure data for optomechanical thermometry as CSV.
//!
//! Each subcommand reads an optional TOML file of `key = value` pairs, applies
//! flag overrides, fills defaults, and writes a CSV body framed by `#` lines
//! echoing the resolved configuration and numerical metadata.

mod commands;
mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] optothermo::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use optothermo::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Domain(_) | E::Contract(_)) => 2,
            CliError::Core(E::Precision { .. } | E::Numerical(_) | E::Coverage { .. }) => 3,
            CliError::Core(E::Truncation { .. } | E::CutoffInsufficient { .. }) => 4,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "optothermo", version, about = "Optomechanical thermometry: Fisher information, Kerr-assisted homodyne and Wigner data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// QFI over a (g, tau) grid.
    QfiMap(Flags),
    /// Optimal coupling and QFI against nbar, with the large-alpha limit.
    QfiVsNbar(Flags),
    /// Coupling maximizing the QFI at one point.
    Gmax(Flags),
    /// Homodyne-to-quantum Fisher ratio over (chi, nbar).
    FisherRatioMap(Flags),
    /// Fisher ratio against the local-oscillator phase.
    PhiSweep(Flags),
    /// Wigner function before and after the Kerr medium.
    Wigner(Flags),
    /// Linearized benchmark: closed forms against matrix exponentials.
    Gaussian(Flags),
    /// Monte Carlo homodyne estimation against the Cramér-Rao bound.
    Estimate(Flags),
}

#[derive(clap::Args)]
struct Flags {
    /// TOML file of `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    nbar: Option<String>,
    /// Kelvin; needs --omega.
    #[arg(long)]
    temperature: Option<String>,
    /// Mechanical angular frequency in rad/s.
    #[arg(long)]
    omega: Option<String>,
    /// Number or `auto`.
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// Number or `cancel`.
    #[arg(long)]
    chi: Option<String>,
    /// Number or `auto`.
    #[arg(long = "phi-lo")]
    phi_lo: Option<String>,
    #[arg(long = "n-max")]
    n_max: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Any other config key, e.g. `--set g_points=30`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::QfiMap(f) => ("qfi-map", f),
            Command::QfiVsNbar(f) => ("qfi-vs-nbar", f),
            Command::Gmax(f) => ("gmax", f),
            Command::FisherRatioMap(f) => ("fisher-ratio-map", f),
            Command::PhiSweep(f) => ("phi-sweep", f),
            Command::Wigner(f) => ("wigner", f),
            Command::Gaussian(f) => ("gaussian", f),
            Command::Estimate(f) => ("estimate", f),
        }
    }
}

fn build_config(flags: &Flags) -> Result<Config, CliError> {
    let mut cfg = Config::load(flags.config.as_deref())?;
    let named = [
        ("alpha", &flags.alpha),
        ("nbar", &flags.nbar),
        ("temperature", &flags.temperature),
        ("omega", &flags.omega),
        ("g", &flags.g),
        ("tau", &flags.tau),
        ("chi", &flags.chi),
        ("phi_lo", &flags.phi_lo),
        ("n_max", &flags.n_max),
        ("seed", &flags.seed),
    ];
    for (key, value) in named {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    for kv in &flags.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = cli.command.parts();
    let cfg = build_config(flags)?;
    let table = match &cli.command {
        Command::QfiMap(_) => commands::qfi_map(&cfg)?,
        Command::QfiVsNbar(_) => commands::qfi_vs_nbar(&cfg)?,
        Command::Gmax(_) => commands::gmax(&cfg)?,
        Command::FisherRatioMap(_) => commands::fisher_ratio_map(&cfg)?,
        Command::PhiSweep(_) => commands::phi_sweep(&cfg)?,
        Command::Wigner(_) => commands::wigner(&cfg)?,
        Command::Gaussian(_) => commands::gaussian(&cfg)?,
        Command::Estimate(_) => commands::estimate(&cfg)?,
    };
    for k in cfg.unused() {
        eprintln!("warning: `{k}` is not used by {name}");
    }
    let resolved = cfg.resolved();
    match &flags.out {
        Some(path) => output::write_table(BufWriter::new(File::create(path)?), name, &resolved, &table)?,
        None => output::write_table(io::stdout().lock(), name, &resolved, &table)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
