//! Command-line driver for the DSIRP toolkit.
//!
//! Four subcommands cover the experimental loop: `generate` writes instance
//! batches with histories and episode sets, `train` fits the prize model
//! under a chosen learning paradigm, `evaluate` produces relative-gap and
//! timing tables against the anticipative baseline, and `eoh-report`
//! summarizes per-period delivery statistics. Every value that matters is
//! derived from `--seed`; rerunning a stage with the same inputs rewrites
//! byte-identical artifacts (timing sidecars excepted).

pub mod config;
pub mod eoh;
pub mod evaluate;
pub mod generate;
pub mod jobs;
pub mod layout;
pub mod train;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, PenaltyChoice};

#[derive(Parser)]
#[command(name = "dsirp", about = "Dynamic and stochastic inventory routing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate instances, histories, validation and evaluation episodes.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Train the prize model per instance under the selected paradigm.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Roll out the policies on the evaluation episodes and report gaps.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Per-period visit/delivery statistics (end-of-horizon analysis).
    EohReport {
        #[command(flatten)]
        common: CommonArgs,
        /// Aggregate exported trajectory CSVs instead of building datasets.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
}

/// Flags shared by all subcommands; every flag overrides the config file.
#[derive(Args, Clone, Default)]
pub struct CommonArgs {
    /// JSON config file mirroring these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Demand patterns (repeatable or comma-separated).
    #[arg(long = "pattern", value_delimiter = ',')]
    pub patterns: Vec<String>,
    /// Instances per pattern.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Customers per instance.
    #[arg(long)]
    pub n: Option<usize>,
    /// Shortage-penalty selection: low, high or both.
    #[arg(long)]
    pub penalty: Option<String>,
    /// Evaluation horizon T.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Look-ahead horizon H.
    #[arg(long)]
    pub lookahead: Option<usize>,
    /// Learning paradigm: all_pairs, sampling, anticipative_dagger, voting_dagger.
    #[arg(long)]
    pub paradigm: Option<String>,
    /// Voting trajectories per state (M).
    #[arg(long)]
    pub voting: Option<usize>,
    /// Quantile levels, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parallel instance-level jobs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Experiment directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Policies to evaluate (comma-separated).
    #[arg(long = "policies", value_delimiter = ',')]
    pub policies: Vec<String>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    #[arg(long)]
    pub history_window: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub samples_per_epoch: Option<usize>,
    #[arg(long)]
    pub static_dataset_size: Option<usize>,
    #[arg(long)]
    pub opt_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub n_pert: Option<usize>,
    #[arg(long)]
    pub pert_scale: Option<f64>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// DAgger rollout horizon (defaults to the evaluation horizon).
    #[arg(long)]
    pub train_horizon: Option<usize>,
    #[arg(long)]
    pub ls_budget: Option<usize>,
    #[arg(long)]
    pub ls_restarts: Option<usize>,
    /// Budget of SAA-3 continuation solves.
    #[arg(long)]
    pub continuation_budget: Option<usize>,
    /// Export one trajectory CSV per (policy, episode) during evaluate.
    #[arg(long)]
    pub dump_trajectories: bool,
    /// Episodes per instance for the end-of-horizon report.
    #[arg(long)]
    pub eoh_episodes: Option<usize>,
}

impl CommonArgs {
    /// Defaults, overridden by the config file, overridden by the flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.patterns.is_empty() {
            config.patterns = self.patterns.clone();
        }
        if let Some(v) = self.instances {
            config.instances_per_pattern = v;
        }
        if let Some(v) = self.n {
            config.n = v;
        }
        if let Some(p) = &self.penalty {
            config.penalty = PenaltyChoice::parse(p)?;
        }
        if let Some(v) = self.horizon {
            config.horizon = v;
        }
        if let Some(v) = self.lookahead {
            config.lookahead = v;
        }
        if let Some(p) = &self.paradigm {
            config.paradigm = p.clone();
        }
        if let Some(v) = self.voting {
            config.voting = v;
        }
        if !self.quantiles.is_empty() {
            config.quantiles = self.quantiles.clone();
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.jobs {
            config.jobs = v;
        }
        if let Some(v) = &self.out {
            config.out = v.clone();
        }
        if !self.policies.is_empty() {
            config.policies = self.policies.clone();
        }
        if let Some(v) = self.eval_episodes {
            config.eval_episodes = v;
        }
        if let Some(v) = self.history_window {
            config.history_window = v;
        }
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.samples_per_epoch {
            config.samples_per_epoch = v;
        }
        if let Some(v) = self.static_dataset_size {
            config.static_dataset_size = v;
        }
        if let Some(v) = self.opt_steps {
            config.opt_steps = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.n_pert {
            config.n_pert = v;
        }
        if let Some(v) = self.pert_scale {
            config.pert_scale = v;
        }
        if let Some(v) = self.step_size {
            config.step_size = v;
        }
        if let Some(v) = self.patience {
            config.patience = v;
        }
        if let Some(v) = self.train_horizon {
            config.train_horizon = Some(v);
        }
        if let Some(v) = self.ls_budget {
            config.ls_budget = v;
        }
        if let Some(v) = self.ls_restarts {
            config.ls_restarts = v;
        }
        if let Some(v) = self.continuation_budget {
            config.continuation_budget = v;
        }
        if self.dump_trajectories {
            config.dump_trajectories = true;
        }
        if let Some(v) = self.eoh_episodes {
            config.eoh_episodes = v;
        }
        Ok(config)
    }
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { common, force } => {
            let config = common.resolve()?;
            generate::cmd_generate(&config, force)
        }
        Command::Train { common } => {
            let config = common.resolve()?;
            train::cmd_train(&config)
        }
        Command::Evaluate { common } => {
            let config = common.resolve()?;
            evaluate::cmd_evaluate(&config)
        }
        Command::EohReport { common, trajectories } => {
            let config = common.resolve()?;
            eoh::cmd_eoh_report(&config, trajectories.as_deref())
        }
    }
}
