//! Command-line front end for the driven double-well simulator.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;
pub mod table;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "dwf", version, about = "Floquet and tunneling dynamics of a driven double-well lattice")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration; may be omitted when `--preset` is given.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for scans and variant runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Built-in parameter set to start from.
    #[arg(long, global = true)]
    pub preset: Option<String>,

    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Static band energies and the tunneling doublet.
    Spectrum,
    /// Quasienergies and effective splitting along a parameter axis.
    FloquetScan,
    /// Time evolution from one well with a sinusoidal fit.
    Dynamics,
    /// Tunneling frequencies of several drive variants side by side.
    SymmetryReport,
}

/// Resolve the configuration and run the chosen command; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let file = match &cli.config {
        Some(p) => config::load(p)?,
        None if cli.preset.is_some() => config::ConfigFile::default(),
        None => return Err(CliError::Usage("--config <file> is required unless --preset is given".into())),
    };
    let mut cfg = config::resolve(file, cli.preset.as_deref())?;
    cfg.plots |= cli.plots;
    let dir = cli.out.clone().or(cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Spectrum => commands::cmd_spectrum(&cfg, &dir),
        Command::FloquetScan => commands::cmd_floquet_scan(&cfg, &dir),
        Command::Dynamics => commands::cmd_dynamics(&cfg, &dir),
        Command::SymmetryReport => commands::cmd_symmetry_report(&cfg, &dir),
    })
}
