//! `evaluate`: roll every requested policy over the evaluation episodes,
//! price the anticipative baseline per episode, and emit the gap tables.
//!
//! Deterministic outputs (per-instance rows, aggregates) and wall-clock
//! measurements (timing) go to separate files: reruns with the same seeds
//! reproduce the former byte for byte, while timings necessarily vary.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};

use dsirp_core::mdp::{initial_state, relative_gap, rollout, write_trajectory_csv, Policy};
use dsirp_core::model::load_checkpoint;
use dsirp_core::policies::{anticipative_baseline, PolicyKind};
use dsirp_core::{Instance, PolicySpec, State, Tour, TourCostCache};

use crate::config::ExperimentConfig;
use crate::layout::{
    aggregate_report_path, best_checkpoint_path, per_instance_report_path, reports_dir,
    timing_report_path, trajectory_path, Manifest, ManifestEntry,
};
use crate::jobs::run_jobs;
use crate::train::{load_eval_episodes, load_inputs, select_instances};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub instance: String,
    pub pattern: String,
    pub penalty: String,
    pub policy: String,
    pub episode: usize,
    pub policy_cost: f64,
    pub anticipative_cost: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct TimingRow {
    pub instance: String,
    pub policy: String,
    pub decisions: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
}

struct TimedPolicy<P> {
    inner: P,
    samples_ms: Vec<f64>,
}

impl<P: Policy<f64>> Policy<f64> for TimedPolicy<P> {
    fn decide(&mut self, instance: &Instance, state: &State) -> dsirp_core::Result<Tour> {
        let started = Instant::now();
        let tour = self.inner.decide(instance, state)?;
        self.samples_ms.push(started.elapsed().as_secs_f64() * 1e3);
        Ok(tour)
    }
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

struct InstanceReport {
    rows: Vec<EvalRow>,
    timing: Vec<TimingRow>,
}

fn evaluate_instance(
    out: &Path,
    config: &ExperimentConfig,
    entry: &ManifestEntry,
    policies: &[PolicyKind],
) -> Result<InstanceReport> {
    let (instance, history, _) = load_inputs(out, entry, config.validation_episodes)?;
    let episodes = load_eval_episodes(out, entry, config.eval_episodes)?;
    let periods = config.horizon;
    let lookahead = config.lookahead;

    // one shared tour-cost cache for the baselines of this instance
    let mut cache = TourCostCache::new(&instance.gamma)?;
    let mut baseline_costs = Vec::with_capacity(episodes.len());
    for (k, episode) in episodes.iter().enumerate() {
        let x0 = initial_state(&instance, &history, episode, lookahead)?;
        let (_, trajectory) =
            anticipative_baseline(&instance, episode, &x0, periods, &mut cache)?;
        if config.dump_trajectories {
            let path = trajectory_path(out, &entry.id, "anticipative", k);
            fs::create_dir_all(path.parent().unwrap())?;
            let mut file = fs::File::create(path)?;
            write_trajectory_csv(&trajectory, &mut file)?;
        }
        baseline_costs.push(trajectory.total.total);
    }

    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for &kind in policies {
        if kind == PolicyKind::Anticipative {
            for (k, &cost) in baseline_costs.iter().enumerate() {
                rows.push(EvalRow {
                    instance: entry.id.clone(),
                    pattern: entry.pattern.name().into(),
                    penalty: entry.penalty.name().into(),
                    policy: kind.name().into(),
                    episode: k,
                    policy_cost: cost,
                    anticipative_cost: cost,
                    gap: 0.0,
                });
            }
            continue;
        }
        let mut spec = PolicySpec::new(kind, lookahead);
        spec.ls = config.ls_config();
        spec.continuation_ls = dsirp_core::det_irp::LocalSearchConfig {
            budget: config.continuation_budget,
            restarts: 1,
            seed: config.seed,
        };
        if kind == PolicyKind::Mlco {
            let paradigm = config.parsed_paradigm()?.name();
            let path = best_checkpoint_path(out, &entry.id, paradigm);
            if !path.exists() {
                anyhow::bail!(
                    "missing checkpoint {} for the mlco policy; run `train` first",
                    path.display()
                );
            }
            let (params, qconfig) = load_checkpoint(&path)?;
            spec = spec.with_params(params, qconfig);
        }
        let mut policy =
            TimedPolicy { inner: dsirp_core::RollingPolicy::new(&instance, spec)?, samples_ms: Vec::new() };
        for (k, episode) in episodes.iter().enumerate() {
            let x0 = initial_state(&instance, &history, episode, lookahead)?;
            let trajectory = rollout(&instance, &mut policy, episode, &x0, periods)?;
            if config.dump_trajectories {
                let path = trajectory_path(out, &entry.id, kind.name(), k);
                fs::create_dir_all(path.parent().unwrap())?;
                let mut file = fs::File::create(path)?;
                write_trajectory_csv(&trajectory, &mut file)?;
            }
            let cost = trajectory.total.total;
            rows.push(EvalRow {
                instance: entry.id.clone(),
                pattern: entry.pattern.name().into(),
                penalty: entry.penalty.name().into(),
                policy: kind.name().into(),
                episode: k,
                policy_cost: cost,
                anticipative_cost: baseline_costs[k],
                gap: relative_gap(cost, baseline_costs[k])?,
            });
        }
        let mut samples = policy.samples_ms;
        let mean = if samples.is_empty() {
            0.0
        } else {
            samples.iter().sum::<f64>() / samples.len() as f64
        };
        timing.push(TimingRow {
            instance: entry.id.clone(),
            policy: kind.name().into(),
            decisions: samples.len(),
            median_ms: median(&mut samples),
            mean_ms: mean,
        });
    }
    Ok(InstanceReport { rows, timing })
}

pub fn per_instance_csv(rows: &[EvalRow]) -> String {
    let mut text = String::from(
        "instance,pattern,penalty,policy,episode,policy_cost,anticipative_cost,gap\n",
    );
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.instance,
            r.pattern,
            r.penalty,
            r.policy,
            r.episode,
            r.policy_cost,
            r.anticipative_cost,
            r.gap
        ));
    }
    text
}

/// Aggregate per (pattern, penalty, policy): the mean and sample standard
/// deviation over the per-instance mean gaps, in first-appearance order.
pub fn aggregate_csv(rows: &[EvalRow]) -> String {
    let mut groups: Vec<(String, String, String)> = Vec::new();
    for r in rows {
        let key = (r.pattern.clone(), r.penalty.clone(), r.policy.clone());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let mut text = String::from("pattern,penalty,policy,instances,mean_gap,std_gap\n");
    for (pattern, penalty, policy) in groups {
        let mut instance_means: Vec<f64> = Vec::new();
        let mut instances: Vec<&str> = Vec::new();
        for r in rows {
            if r.pattern == pattern
                && r.penalty == penalty
                && r.policy == policy
                && !instances.contains(&r.instance.as_str())
            {
                instances.push(&r.instance);
            }
        }
        for id in &instances {
            let gaps: Vec<f64> = rows
                .iter()
                .filter(|r| {
                    r.instance == *id
                        && r.pattern == pattern
                        && r.penalty == penalty
                        && r.policy == policy
                })
                .map(|r| r.gap)
                .collect();
            instance_means.push(gaps.iter().sum::<f64>() / gaps.len() as f64);
        }
        let count = instance_means.len();
        let mean = instance_means.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            let var = instance_means.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>()
                / (count - 1) as f64;
            var.sqrt()
        } else {
            0.0
        };
        text.push_str(&format!("{pattern},{penalty},{policy},{count},{mean},{std}\n"));
    }
    text
}

fn timing_csv(rows: &[TimingRow]) -> String {
    let mut text = String::from("instance,policy,decisions,median_ms,mean_ms\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.instance, r.policy, r.decisions, r.median_ms, r.mean_ms
        ));
    }
    text
}

pub fn parse_per_instance_csv(text: &str) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for (ix, line) in text.lines().enumerate() {
        if ix == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            anyhow::bail!("malformed per-instance row: {line}");
        }
        rows.push(EvalRow {
            instance: fields[0].into(),
            pattern: fields[1].into(),
            penalty: fields[2].into(),
            policy: fields[3].into(),
            episode: fields[4].parse()?,
            policy_cost: fields[5].parse()?,
            anticipative_cost: fields[6].parse()?,
            gap: fields[7].parse()?,
        });
    }
    Ok(rows)
}

/// Re-derive the aggregate table from the per-instance rows on disk and
/// check it matches byte for byte.
pub fn verify_reports(out: &Path) -> Result<()> {
    let per_instance = fs::read_to_string(per_instance_report_path(out))?;
    let aggregate = fs::read_to_string(aggregate_report_path(out))?;
    let rows = parse_per_instance_csv(&per_instance)?;
    let recomputed = aggregate_csv(&rows);
    if recomputed != aggregate {
        anyhow::bail!("aggregate report does not match its per-instance rows");
    }
    Ok(())
}

pub fn cmd_evaluate(config: &ExperimentConfig) -> Result<()> {
    let manifest = Manifest::load(&config.out)?;
    let selected = select_instances(&manifest, config)?;
    if selected.is_empty() {
        anyhow::bail!("no instances in the manifest match the requested patterns/penalty");
    }
    let policies = config.parsed_policies()?;
    fs::create_dir_all(reports_dir(&config.out))?;

    let reports = run_jobs(selected, config.jobs, |entry| {
        evaluate_instance(&config.out, config, entry, &policies)
    })?;

    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for report in reports {
        rows.extend(report.rows);
        timing.extend(report.timing);
    }
    fs::write(per_instance_report_path(&config.out), per_instance_csv(&rows))?;
    fs::write(aggregate_report_path(&config.out), aggregate_csv(&rows))?;
    fs::write(timing_report_path(&config.out), timing_csv(&timing))?;
    verify_reports(&config.out).context("report self-check")?;
    println!(
        "evaluated {} policies on {} instances ({} rows) into {}",
        policies.len(),
        rows.iter().map(|r| &r.instance).collect::<std::collections::BTreeSet<_>>().len(),
        rows.len(),
        reports_dir(&config.out).display()
    );
    Ok(())
}
