//! Experiment configuration: one struct mirrored by the JSON config file
//! and by the command-line flags; flags override file values, file values
//! override defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use dsirp_core::det_irp::LocalSearchConfig;
use dsirp_core::instance::{DemandPattern, Penalty};
use dsirp_core::policies::PolicyKind;
use dsirp_core::training::{Paradigm, TrainConfig};

/// Penalty selection for instance batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyChoice {
    Low,
    High,
    Both,
}

impl PenaltyChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(PenaltyChoice::Low),
            "high" => Ok(PenaltyChoice::High),
            "both" => Ok(PenaltyChoice::Both),
            other => anyhow::bail!("unknown penalty choice `{other}` (low|high|both)"),
        }
    }

    /// Penalty level of the instance at `index` within a pattern batch.
    pub fn level_for(self, index: usize) -> Penalty {
        match self {
            PenaltyChoice::Low => Penalty::Low,
            PenaltyChoice::High => Penalty::High,
            PenaltyChoice::Both => {
                if index % 2 == 0 {
                    Penalty::Low
                } else {
                    Penalty::High
                }
            }
        }
    }
}

/// Full experiment configuration with the protocol defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub patterns: Vec<String>,
    pub instances_per_pattern: usize,
    pub n: usize,
    /// Evaluation horizon T.
    pub horizon: usize,
    /// Look-ahead horizon H of policies, model and expert solves.
    pub lookahead: usize,
    pub penalty: PenaltyChoice,
    pub paradigm: String,
    /// Voting trajectories per state (M).
    pub voting: usize,
    pub quantiles: Vec<f64>,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub history_window: usize,
    pub validation_episodes: usize,
    pub eval_episodes: usize,
    pub policies: Vec<String>,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub static_dataset_size: usize,
    pub opt_steps: usize,
    pub batch_size: usize,
    pub n_pert: usize,
    pub pert_scale: f64,
    pub step_size: f64,
    pub patience: usize,
    /// Rollout horizon of the DAgger training episodes; defaults to the
    /// evaluation horizon.
    pub train_horizon: Option<usize>,
    pub ls_budget: usize,
    pub ls_restarts: usize,
    pub continuation_budget: usize,
    pub dump_trajectories: bool,
    /// Episodes per instance for the end-of-horizon report.
    pub eoh_episodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            patterns: vec![
                "normal".into(),
                "uniform".into(),
                "bimodal".into(),
                "contextual".into(),
            ],
            instances_per_pattern: 10,
            n: 10,
            horizon: 10,
            lookahead: 6,
            penalty: PenaltyChoice::Both,
            paradigm: "voting_dagger".into(),
            voting: 5,
            quantiles: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            seed: 0,
            jobs: 1,
            out: PathBuf::from("runs"),
            history_window: 50,
            validation_episodes: 5,
            eval_episodes: 10,
            policies: vec!["mean".into(), "saa1".into(), "saa3".into(), "mlco".into()],
            epochs: 20,
            samples_per_epoch: 110,
            static_dataset_size: 600,
            opt_steps: 200,
            batch_size: 32,
            n_pert: 20,
            pert_scale: 1.0,
            step_size: 1e-2,
            patience: 5,
            train_horizon: None,
            ls_budget: 50_000,
            ls_restarts: 5,
            continuation_budget: 2_000,
            dump_trajectories: false,
            eoh_episodes: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parsed_patterns(&self) -> Result<Vec<DemandPattern>> {
        self.patterns
            .iter()
            .map(|p| DemandPattern::parse(p).map_err(anyhow::Error::from))
            .collect()
    }

    pub fn parsed_paradigm(&self) -> Result<Paradigm> {
        Paradigm::parse(&self.paradigm).map_err(anyhow::Error::from)
    }

    pub fn parsed_policies(&self) -> Result<Vec<PolicyKind>> {
        self.policies
            .iter()
            .map(|p| PolicyKind::parse(p).map_err(anyhow::Error::from))
            .collect()
    }

    pub fn train_horizon(&self) -> usize {
        self.train_horizon.unwrap_or(self.horizon)
    }

    /// Periods per episode file: rollouts of `horizon` periods plus the
    /// look-ahead tail every state needs.
    pub fn episode_periods(&self) -> usize {
        self.horizon + self.lookahead - 1
    }

    pub fn ls_config(&self) -> LocalSearchConfig {
        LocalSearchConfig { budget: self.ls_budget, restarts: self.ls_restarts, seed: self.seed }
    }

    pub fn train_config(&self) -> Result<TrainConfig<f64>> {
        let mut config = TrainConfig::new(self.parsed_paradigm()?);
        config.epochs = self.epochs;
        config.voting_trajectories = self.voting;
        config.n_pert = self.n_pert;
        config.pert_scale = self.pert_scale;
        config.step_size = self.step_size;
        config.batch_size = self.batch_size;
        config.opt_steps = self.opt_steps;
        config.patience = self.patience;
        config.lookahead = self.lookahead;
        config.quantile_levels = self.quantiles.clone();
        config.samples_per_epoch = self.samples_per_epoch;
        config.static_dataset_size = self.static_dataset_size;
        config.train_horizon = self.train_horizon();
        config.seed = self.seed;
        config.ls = self.ls_config();
        config.validate()?;
        Ok(config)
    }
}
