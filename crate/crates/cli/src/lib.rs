//! `forexpulse` command-line pipeline: configuration, subcommands that run
//! the core analyses end to end, atomic report emission and the synthetic
//! fixture generator.

pub mod config;
pub mod error;
mod output;
pub mod pipeline;
pub mod synth;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Overrides, PipelineConfig};
pub use error::PipelineError;
pub use output::OutputDir;
pub use pipeline::{run_command, Command};

#[derive(Debug, Parser)]
#[command(name = "forexpulse", version, about = "Forex tweet stance, event-study and deletion analyses")]
pub struct Cli {
    /// key = value configuration file (falls back to $FOREXPULSE_CONFIG)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tweets: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rates: Option<PathBuf>,
    #[arg(long, global = true)]
    pub events: Option<PathBuf>,
    #[arg(long, global = true)]
    pub audit: Option<PathBuf>,
    /// Trained model file; without it stances come from a model trained on gold labels
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated groups (robot, spam, company, individual, other, all)
    #[arg(long, global = true)]
    pub groups: Option<String>,
    /// Neutral band for event typing
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Event-study horizon in traded minutes
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Market-model window in days
    #[arg(long = "window-days", global = true)]
    pub window_days: Option<u32>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Feature-hash dimension (power of two, at least 1024)
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Resolve conflicting audit entries by the latest check
    #[arg(long = "audit-latest-wins", global = true)]
    pub audit_latest_wins: bool,
    /// Print the effective configuration and exit
    #[arg(long = "show-config", global = true)]
    pub show_config: bool,
    #[command(subcommand)]
    pub command: Option<Sub>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Sub {
    /// Parse and validate the inputs
    Ingest,
    /// Train the stance model on gold labels
    Train,
    /// Blocked cross-validation of the stance model
    Eval,
    /// Predict a stance for every tweet
    Classify,
    /// Profile and segment users
    Groups,
    /// CAR curves per event class and user group
    EventStudy,
    /// Deletion forensics and the before/after-deletion CAR comparison
    Deletions,
    /// Every analysis the inputs allow
    Report,
    /// Generate a synthetic fixture set
    Synth,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Ingest => Command::Ingest,
            Sub::Train => Command::Train,
            Sub::Eval => Command::Eval,
            Sub::Classify => Command::Classify,
            Sub::Groups => Command::Groups,
            Sub::EventStudy => Command::EventStudy,
            Sub::Deletions => Command::Deletions,
            Sub::Report => Command::Report,
            Sub::Synth => Command::Synth,
        }
    }
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            tweets: self.tweets.clone(),
            rates: self.rates.clone(),
            events: self.events.clone(),
            audit: self.audit.clone(),
            model: self.model.clone(),
            out: self.out.clone(),
            groups: self.groups.clone(),
            theta: self.theta,
            horizon: self.horizon,
            window_days: self.window_days,
            seed: self.seed,
            folds: self.folds,
            dim: self.dim,
            lambda: self.lambda,
            epochs: self.epochs,
            audit_latest_wins: self.audit_latest_wins,
        }
    }
}

/// Runs a parsed command line, writing `--show-config` output to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn std::io::Write) -> Result<Vec<PathBuf>, PipelineError> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides())?;
    if cli.show_config {
        stdout
            .write_all(cfg.to_kv().as_bytes())
            .map_err(|e| PipelineError::Validation(format!("cannot print config: {e}")))?;
        return Ok(Vec::new());
    }
    let sub = cli
        .command
        .ok_or_else(|| PipelineError::Validation("no subcommand given (see --help)".into()))?;
    run_command(&cfg, sub.into())
}
