//! Command-line driver: loads a run configuration, runs flows, extensions,
//! verification checks and tube-radius estimates, and writes CSV tables and
//! line-delimited JSON reports.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 numerical
//! breakdown, 3 configuration or I/O error.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use error::Result;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "grauert", version, about = "Adapted complex structures on tangent-bundle tubes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration; the shipped default when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Model name; drops the configured model parameters when it differs.
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Flow integration tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Trajectory of the complex-time geodesic flow along the configured path.
    Flow,
    /// Complex structure and Kähler metric at sample points.
    Jtensor,
    /// Holomorphic extension of a test function by all available methods.
    Extend,
    /// Identity checks; exits 1 on any failure.
    Verify,
    /// Empirical tube radius.
    TubeRadius,
}

impl Cli {
    pub fn resolved_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        cfg.apply(&Overrides { seed: self.seed, model: self.model.clone(), tol: self.tol, out: self.out.clone() });
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<commands::Outcome> {
    match command {
        Command::Flow => commands::cmd_flow(cfg),
        Command::Jtensor => commands::cmd_jtensor(cfg),
        Command::Extend => commands::cmd_extend(cfg),
        Command::Verify => commands::cmd_verify(cfg),
        Command::TubeRadius => commands::cmd_tube_radius(cfg),
    }
}
