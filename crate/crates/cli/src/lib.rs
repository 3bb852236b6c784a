//! Command-line front end: run configuration, subcommands and report files.

pub mod commands;
pub mod config;
pub mod report;
pub mod svg;

use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use std::path::PathBuf;

/// Breslow-depth classification and analysis.
///
/// Settings resolve in three layers: built-in defaults, then the
/// `--config` file (`key = value` lines, `#` comments), then flags.
#[derive(Debug, Parser)]
#[command(name = "breslow", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stage a list of thickness values (one per line).
    Stage(RunArgs),
    /// Write a synthetic feature file.
    Synth(RunArgs),
    /// Stratified k-fold cross-validation; writes metrics and held-out predictions.
    Crossval(RunArgs),
    /// Cross-validate each training variant on the same folds.
    Ablate(RunArgs),
    /// Train on the whole input and save a checkpoint.
    Train(RunArgs),
    /// Predict with a saved checkpoint.
    Predict(RunArgs),
    /// Thickness regression on a predictions file.
    AnalyzeRegression(RunArgs),
    /// PCA and PLS projections of a feature file, with group ellipses.
    AnalyzeProjection(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Stage(_) => "stage",
            Self::Synth(_) => "synth",
            Self::Crossval(_) => "crossval",
            Self::Ablate(_) => "ablate",
            Self::Train(_) => "train",
            Self::Predict(_) => "predict",
            Self::AnalyzeRegression(_) => "analyze-regression",
            Self::AnalyzeProjection(_) => "analyze-projection",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Self::Stage(a)
            | Self::Synth(a)
            | Self::Crossval(a)
            | Self::Ablate(a)
            | Self::Train(a)
            | Self::Predict(a)
            | Self::AnalyzeRegression(a)
            | Self::AnalyzeProjection(a) => a,
        }
    }

    /// Runs the command and returns the files it wrote.
    pub fn run(&self) -> anyhow::Result<Vec<PathBuf>> {
        let args = self.args();
        let mut cfg = RunConfig::load(args.config.as_deref(), &args.overrides)?;
        match self {
            Self::Stage(_) => commands::stage(&cfg),
            Self::Synth(_) => commands::synth(&cfg),
            Self::Crossval(_) => commands::crossval_cmd(&mut cfg),
            Self::Ablate(_) => commands::ablate_cmd(&mut cfg),
            Self::Train(_) => commands::train_cmd(&mut cfg),
            Self::Predict(_) => commands::predict_cmd(&cfg),
            Self::AnalyzeRegression(_) => commands::analyze_regression(&cfg),
            Self::AnalyzeProjection(_) => commands::analyze_projection(&cfg),
        }
    }
}

/// A short machine-readable name for the outermost known error type.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    use breslow_core::{checkpoint, data, evaluation, model, projection, regression, synth, training};
    for cause in err.chain() {
        let kind = if cause.is::<config::ConfigError>() {
            "config"
        } else if let Some(e) = cause.downcast_ref::<report::ReportError>() {
            match e {
                report::ReportError::Parse { .. } => "parse",
                _ => "io",
            }
        } else if cause.is::<commands::CommandError>() {
            "input"
        } else if cause.is::<data::DataError>() {
            "data"
        } else if cause.is::<evaluation::EvalError>() {
            "evaluation"
        } else if cause.is::<training::TrainError>() {
            "training"
        } else if cause.is::<model::ModelError>() {
            "model"
        } else if cause.is::<checkpoint::CheckpointError>() {
            "checkpoint"
        } else if cause.is::<regression::RegressionError>() {
            "regression"
        } else if cause.is::<projection::ProjectionError>() {
            "projection"
        } else if cause.is::<synth::SynthError>() {
            "synth"
        } else {
            continue;
        };
        return kind;
    }
    "internal"
}
