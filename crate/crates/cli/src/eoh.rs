//! `eoh-report`: per-period visit and delivery statistics, either from an
//! a-priori training dataset (relative period within the look-ahead) or
//! from exported rollout trajectories (absolute period).

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use dsirp_core::mdp::visit_load;
use dsirp_core::training::{build_dataset_all_pairs, TrainConfig};

use crate::config::ExperimentConfig;
use crate::layout::{eoh_report_path, reports_dir, Manifest};
use crate::train::{load_inputs, select_instances};

#[derive(Debug, Default, Clone)]
struct PeriodStat {
    visited: f64,
    delivered: f64,
    samples: usize,
}

fn stats_csv(stats: &[PeriodStat]) -> String {
    let mut text = String::from("period,mean_visited,mean_delivered,samples\n");
    for (t, s) in stats.iter().enumerate() {
        if s.samples == 0 {
            continue;
        }
        let n = s.samples as f64;
        text.push_str(&format!("{},{},{},{}\n", t, s.visited / n, s.delivered / n, s.samples));
    }
    text
}

/// Aggregate exported trajectory CSVs (absolute period index).
fn from_trajectories(dir: &Path) -> Result<Vec<PeriodStat>> {
    let mut stats: Vec<PeriodStat> = Vec::new();
    let mut files: Vec<_> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    for path in files {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading trajectory {}", path.display()))?;
        for (ix, line) in text.lines().enumerate() {
            if ix == 0 || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                anyhow::bail!("malformed trajectory row in {}: {line}", path.display());
            }
            let period: usize = fields[0].parse()?;
            let mask: u64 = fields[1].parse()?;
            let delivered: f64 = fields[2].parse()?;
            if stats.len() <= period {
                stats.resize(period + 1, PeriodStat::default());
            }
            stats[period].visited += mask.count_ones() as f64;
            stats[period].delivered += delivered;
            stats[period].samples += 1;
        }
    }
    Ok(stats)
}

/// Build an a-priori dataset per instance and aggregate by the relative
/// period within each anticipative trajectory.
fn from_apriori_datasets(config: &ExperimentConfig) -> Result<Vec<PeriodStat>> {
    let manifest = Manifest::load(&config.out)?;
    let selected = select_instances(&manifest, config)?;
    if selected.is_empty() {
        anyhow::bail!("no instances in the manifest match the requested patterns/penalty");
    }
    let mut stats: Vec<PeriodStat> = vec![PeriodStat::default(); config.lookahead];
    for entry in selected {
        let (instance, history, _) =
            load_inputs(&config.out, entry, config.validation_episodes)?;
        let mut train_config: TrainConfig<f64> = config.train_config()?;
        train_config.paradigm = dsirp_core::training::Paradigm::AllPairs;
        train_config.static_dataset_size = config.eoh_episodes * config.lookahead;
        let dataset = build_dataset_all_pairs(&instance, &history, &train_config)?;
        for sample in &dataset {
            let t = sample.state.t;
            let mask = sample.target.visit_mask();
            stats[t].visited += sample.target.len() as f64;
            stats[t].delivered += visit_load(&instance, &sample.state.inventories, mask);
            stats[t].samples += 1;
        }
    }
    Ok(stats)
}

pub fn cmd_eoh_report(config: &ExperimentConfig, trajectories: Option<&Path>) -> Result<()> {
    let stats = match trajectories {
        Some(dir) => from_trajectories(dir)?,
        None => from_apriori_datasets(config)?,
    };
    fs::create_dir_all(reports_dir(&config.out))?;
    let path = eoh_report_path(&config.out);
    fs::write(&path, stats_csv(&stats))?;
    println!("wrote {}", path.display());
    Ok(())
}
