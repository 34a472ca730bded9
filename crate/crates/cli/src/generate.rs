//! `generate`: write instance batches with their histories, validation and
//! evaluation episodes, plus the manifest that seeds every later stage.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use dsirp_core::instance::{generate_instance, sample_episode, sample_history};

use crate::config::ExperimentConfig;
use crate::layout::{
    eval_episode_path, history_path, instance_id, instance_path, instance_seeds, Manifest,
    ManifestEntry, validation_episode_path,
};

fn dir_is_nonempty(path: &Path) -> bool {
    match fs::read_dir(path) {
        Ok(mut entries) => entries.next().is_some(),
        Err(_) => false,
    }
}

pub fn cmd_generate(config: &ExperimentConfig, force: bool) -> Result<()> {
    let out = &config.out;
    if out.exists() && dir_is_nonempty(out) && !force {
        anyhow::bail!(
            "output directory {} is not empty; pass --force to overwrite",
            out.display()
        );
    }
    fs::create_dir_all(out.join("instances"))?;
    fs::create_dir_all(out.join("histories"))?;
    fs::create_dir_all(out.join("episodes"))?;

    let patterns = config.parsed_patterns()?;
    let eval_len = config.episode_periods();
    let validation_len = config.train_horizon() + config.lookahead - 1;

    let mut entries = Vec::new();
    for &pattern in &patterns {
        for index in 0..config.instances_per_pattern {
            let penalty = config.penalty.level_for(index);
            let seeds = instance_seeds(config, pattern, penalty, index);
            let id = instance_id(pattern, penalty, config.n, index);

            let mut instance =
                generate_instance::<f64>(pattern, config.n, penalty, seeds.instance)?;
            instance.id = id.clone();
            instance.save(instance_path(out, &id))?;

            let history = sample_history(&instance, config.history_window, seeds.history)?;
            history.save(history_path(out, &id))?;

            fs::create_dir_all(out.join("episodes").join(&id))?;
            for (j, &seed) in seeds.validation.iter().enumerate() {
                let episode = sample_episode(&instance, validation_len, seed)?;
                episode.save(validation_episode_path(out, &id, j))?;
            }
            for (k, &seed) in seeds.evaluation.iter().enumerate() {
                let episode = sample_episode(&instance, eval_len, seed)?;
                episode.save(eval_episode_path(out, &id, k))?;
            }

            entries.push(ManifestEntry { id, pattern, penalty, index, seeds });
        }
    }

    // the manifest travels with its directory: record parameters, not the
    // absolute path the run happened to use
    let mut echo = config.clone();
    echo.out = std::path::PathBuf::from(".");
    let manifest = Manifest { config: echo, instances: entries };
    manifest.save(out).context("writing manifest")?;
    println!(
        "generated {} instances across {} patterns into {}",
        manifest.instances.len(),
        patterns.len(),
        out.display()
    );
    Ok(())
}
