//! `train`: run the selected learning paradigm per instance, checkpointing
//! every epoch so interrupted runs resume from the last persisted state.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use dsirp_core::model::save_checkpoint;
use dsirp_core::training::{Trainer, TrainerState};
use dsirp_core::{Episode, Instance};

use crate::config::ExperimentConfig;
use crate::layout::{
    best_checkpoint_path, checkpoint_dir, epoch_checkpoint_path, eval_episode_path, history_path,
    instance_path, trainer_state_path, training_log_path, training_timing_path, Manifest,
    ManifestEntry, validation_episode_path,
};
use crate::jobs::run_jobs;

fn require(path: &Path) -> Result<()> {
    if !path.exists() {
        anyhow::bail!("missing file {}", path.display());
    }
    Ok(())
}

/// Instances from the manifest matching the active pattern/penalty filters.
pub fn select_instances<'m>(
    manifest: &'m Manifest,
    config: &ExperimentConfig,
) -> Result<Vec<&'m ManifestEntry>> {
    let patterns = config.parsed_patterns()?;
    Ok(manifest
        .instances
        .iter()
        .filter(|e| patterns.contains(&e.pattern))
        .filter(|e| match config.penalty {
            crate::config::PenaltyChoice::Both => true,
            crate::config::PenaltyChoice::Low => {
                e.penalty == dsirp_core::instance::Penalty::Low
            }
            crate::config::PenaltyChoice::High => {
                e.penalty == dsirp_core::instance::Penalty::High
            }
        })
        .collect())
}

pub fn load_inputs(
    out: &Path,
    entry: &ManifestEntry,
    validation_episodes: usize,
) -> Result<(Instance, Episode, Vec<Episode>)> {
    let inst_path = instance_path(out, &entry.id);
    let hist_path = history_path(out, &entry.id);
    require(&inst_path)?;
    require(&hist_path)?;
    let instance = Instance::load(&inst_path)?;
    let history = Episode::load(&hist_path)?;
    let mut validation = Vec::with_capacity(validation_episodes);
    for j in 0..validation_episodes {
        let path = validation_episode_path(out, &entry.id, j);
        require(&path)?;
        validation.push(Episode::load(&path)?);
    }
    Ok((instance, history, validation))
}

pub fn load_eval_episodes(
    out: &Path,
    entry: &ManifestEntry,
    eval_episodes: usize,
) -> Result<Vec<Episode>> {
    let mut episodes = Vec::with_capacity(eval_episodes);
    for k in 0..eval_episodes {
        let path = eval_episode_path(out, &entry.id, k);
        require(&path)?;
        episodes.push(Episode::load(&path)?);
    }
    Ok(episodes)
}

fn write_training_logs(
    out: &Path,
    id: &str,
    paradigm: &str,
    state: &TrainerState<f64>,
) -> Result<()> {
    let mut log = String::from("epoch,dataset_size,train_fy_loss,validation_cost,alpha\n");
    let mut timing = String::from("epoch,wallclock_ms\n");
    for record in &state.log {
        log.push_str(&format!(
            "{},{},{},{},{}\n",
            record.epoch,
            record.dataset_size,
            record.train_fy_loss,
            record.validation_cost,
            record.alpha
        ));
        timing.push_str(&format!("{},{}\n", record.epoch, record.wallclock_ms));
    }
    fs::write(training_log_path(out, id, paradigm), log)?;
    fs::write(training_timing_path(out, id, paradigm), timing)?;
    Ok(())
}

fn train_one(out: &Path, config: &ExperimentConfig, entry: &ManifestEntry) -> Result<String> {
    let (instance, history, validation) =
        load_inputs(out, entry, config.validation_episodes)?;
    let train_config = config.train_config()?;
    let paradigm = train_config.paradigm.name();
    fs::create_dir_all(checkpoint_dir(out, &entry.id, paradigm))?;

    let state_path = trainer_state_path(out, &entry.id, paradigm);
    let mut trainer = if state_path.exists() {
        let text = fs::read_to_string(&state_path)?;
        let state: TrainerState<f64> =
            serde_json::from_str(&text).context("parsing trainer state")?;
        Trainer::from_state(&instance, &history, &train_config, &validation, state)?
    } else {
        Trainer::new(&instance, &history, &train_config, &validation)?
    };

    let qconfig = train_config.quantile_config()?;
    while !trainer.is_done() {
        let record = trainer.run_epoch()?;
        save_checkpoint(
            &trainer.state.params,
            &qconfig,
            epoch_checkpoint_path(out, &entry.id, paradigm, record.epoch),
        )?;
        fs::write(&state_path, serde_json::to_string(&trainer.state)?)?;
        write_training_logs(out, &entry.id, paradigm, &trainer.state)?;
    }
    save_checkpoint(
        &trainer.state.tracker.best_params,
        &qconfig,
        best_checkpoint_path(out, &entry.id, paradigm),
    )?;
    write_training_logs(out, &entry.id, paradigm, &trainer.state)?;

    let epochs = trainer.state.epoch;
    let halted = trainer.state.halted;
    Ok(format!(
        "{}: {} epochs{}, best validation cost {}",
        entry.id,
        epochs,
        if halted { " (early stop)" } else { "" },
        trainer.state.tracker.best_cost
    ))
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<()> {
    let manifest = Manifest::load(&config.out)?;
    let selected = select_instances(&manifest, config)?;
    if selected.is_empty() {
        anyhow::bail!("no instances in the manifest match the requested patterns/penalty");
    }
    fs::create_dir_all(config.out.join("logs"))?;
    let lines = run_jobs(selected, config.jobs, |entry| train_one(&config.out, config, entry))?;
    let mut stdout = std::io::stdout();
    for line in lines {
        writeln!(stdout, "{line}")?;
    }
    Ok(())
}
