//! On-disk layout of an experiment directory and the manifest that makes
//! every artifact regenerable from recorded seeds.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use dsirp_core::instance::{DemandPattern, Penalty};
use dsirp_core::rng::{derive_u64, StreamId};

use crate::config::ExperimentConfig;

/// Seeds of one instance's artifacts, all derived from the experiment seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSeeds {
    pub instance: u64,
    pub history: u64,
    pub validation: Vec<u64>,
    pub evaluation: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub pattern: DemandPattern,
    pub penalty: Penalty,
    pub index: usize,
    pub seeds: InstanceSeeds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub instances: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Self> {
        let path = manifest_path(out);
        let text = std::fs::read_to_string(&path).with_context(|| {
            format!("reading manifest {} (run `generate` first)", path.display())
        })?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(manifest_path(out), json)?;
        Ok(())
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.join("manifest.json")
}

pub fn instance_path(out: &Path, id: &str) -> PathBuf {
    out.join("instances").join(format!("{id}.json"))
}

pub fn history_path(out: &Path, id: &str) -> PathBuf {
    out.join("histories").join(format!("{id}.json"))
}

pub fn validation_episode_path(out: &Path, id: &str, j: usize) -> PathBuf {
    out.join("episodes").join(id).join(format!("validation_{j}.json"))
}

pub fn eval_episode_path(out: &Path, id: &str, k: usize) -> PathBuf {
    out.join("episodes").join(id).join(format!("eval_{k}.json"))
}

pub fn checkpoint_dir(out: &Path, id: &str, paradigm: &str) -> PathBuf {
    out.join("checkpoints").join(id).join(paradigm)
}

pub fn epoch_checkpoint_path(out: &Path, id: &str, paradigm: &str, epoch: usize) -> PathBuf {
    checkpoint_dir(out, id, paradigm).join(format!("epoch_{epoch:03}.json"))
}

pub fn best_checkpoint_path(out: &Path, id: &str, paradigm: &str) -> PathBuf {
    checkpoint_dir(out, id, paradigm).join("best.json")
}

pub fn trainer_state_path(out: &Path, id: &str, paradigm: &str) -> PathBuf {
    checkpoint_dir(out, id, paradigm).join("state.json")
}

pub fn training_log_path(out: &Path, id: &str, paradigm: &str) -> PathBuf {
    out.join("logs").join(format!("{id}_{paradigm}.csv"))
}

pub fn training_timing_path(out: &Path, id: &str, paradigm: &str) -> PathBuf {
    out.join("logs").join(format!("{id}_{paradigm}_timing.csv"))
}

pub fn reports_dir(out: &Path) -> PathBuf {
    out.join("reports")
}

pub fn per_instance_report_path(out: &Path) -> PathBuf {
    reports_dir(out).join("per_instance.csv")
}

pub fn aggregate_report_path(out: &Path) -> PathBuf {
    reports_dir(out).join("aggregate.csv")
}

pub fn timing_report_path(out: &Path) -> PathBuf {
    reports_dir(out).join("timing.csv")
}

pub fn eoh_report_path(out: &Path) -> PathBuf {
    reports_dir(out).join("eoh.csv")
}

pub fn trajectory_path(out: &Path, id: &str, policy: &str, episode: usize) -> PathBuf {
    reports_dir(out).join("trajectories").join(format!("{id}_{policy}_ep{episode}.csv"))
}

fn pattern_tag(pattern: DemandPattern) -> u64 {
    match pattern {
        DemandPattern::Normal => 1,
        DemandPattern::Uniform => 2,
        DemandPattern::Bimodal => 3,
        DemandPattern::Contextual => 4,
    }
}

fn penalty_tag(penalty: Penalty) -> u64 {
    match penalty {
        Penalty::Low => 0,
        Penalty::High => 1,
    }
}

/// Derive the full seed record of one instance from the experiment seed.
pub fn instance_seeds(config: &ExperimentConfig, pattern: DemandPattern, penalty: Penalty, index: usize) -> InstanceSeeds {
    let tags = [pattern_tag(pattern), penalty_tag(penalty), index as u64];
    let base = |id: StreamId, salt: u64| {
        derive_u64(config.seed, id, &[tags[0], tags[1], tags[2], salt])
    };
    InstanceSeeds {
        instance: base(StreamId::Instance, 0),
        history: base(StreamId::History, 0),
        validation: (0..config.validation_episodes)
            .map(|j| base(StreamId::Episode, 100 + j as u64))
            .collect(),
        evaluation: (0..config.eval_episodes)
            .map(|k| base(StreamId::Episode, 200 + k as u64))
            .collect(),
    }
}

pub fn instance_id(pattern: DemandPattern, penalty: Penalty, n: usize, index: usize) -> String {
    format!("{}_{}_n{}_{:02}", pattern.name(), penalty.name(), n, index)
}
