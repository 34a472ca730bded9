//! Imitation learning of the prize model.
//!
//! The trainer imitates the anticipative policy (the deterministic IRP
//! solved with known future demands) through a perturbed non-optimality
//! loss: perturb the predicted prizes with Gaussian noise, resolve the
//! oracle, and push the expected visit indicators toward the target's.
//! Four dataset paradigms are supported: a-priori datasets (all trajectory
//! pairs, or first-period pairs only) and two DAgger variants that mix the
//! expert with the learned policy while aggregating labels; the voting
//! variant labels every visited state with decisions from several
//! bootstrap futures.

use std::time::Instant;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::cpctsp::{routing_cost, solve_scored, PrizeVector, TourCostCache};
use crate::det_irp::{anticipative_first_decision, solve_deterministic, LocalSearchConfig};
use crate::instance::{sample_episode, Episode, Instance};
use crate::mdp::{initial_state, rollout, transition, visit_vector, State, Tour};
use crate::model::{
    prize_backward, prize_forward, ModelParams, ParamGrad, QuantileConfig,
};
use crate::policies::mlco_decide;
use crate::rng::{derive_u64, stream, StreamId};
use crate::scalar::Scalar;
use crate::{Error, Result};

// Sub-stream tags within StreamId::Training.
const TAG_EPISODE: u64 = 1;
const TAG_MIX: u64 = 2;
const TAG_VOTE: u64 = 3;
const TAG_NONCE: u64 = 4;
const TAG_FIT: u64 = 5;
const TAG_APRIORI_STATE: u64 = 6;
const TAG_APRIORI_EPISODE: u64 = 7;
const TAG_RETAIN: u64 = 8;

/// Samples older than this many epochs are dropped outright.
const AGING_HORIZON: usize = 9;

/// Dataset-generation paradigm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    /// Sample initial states, solve once, keep every pair along the
    /// anticipative trajectory.
    AllPairs,
    /// Sample initial states, solve once, keep only the first-period pair.
    Sampling,
    /// DAgger rollouts under the expert/policy mixture, one anticipative
    /// label per visited state.
    AnticipativeDagger,
    /// DAgger rollouts with `M` bootstrap-future labels per visited state.
    VotingDagger,
}

impl Paradigm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all_pairs" => Ok(Paradigm::AllPairs),
            "sampling" => Ok(Paradigm::Sampling),
            "anticipative_dagger" => Ok(Paradigm::AnticipativeDagger),
            "voting_dagger" => Ok(Paradigm::VotingDagger),
            other => Err(Error::invalid(format!("unknown paradigm `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Paradigm::AllPairs => "all_pairs",
            Paradigm::Sampling => "sampling",
            Paradigm::AnticipativeDagger => "anticipative_dagger",
            Paradigm::VotingDagger => "voting_dagger",
        }
    }

    pub fn is_dagger(self) -> bool {
        matches!(self, Paradigm::AnticipativeDagger | Paradigm::VotingDagger)
    }
}

/// One imitation pair: the state snapshot and the decision to imitate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample<F> {
    pub state: State<F>,
    pub target: Tour,
    pub epoch_tag: usize,
    /// Per-sample nonce; its derived coin decides subsampling retention once
    /// and for all, so a kept sample stays until it ages out.
    pub nonce: u64,
}

/// Trainer configuration. Defaults follow the experimental protocol:
/// look-ahead 6, five voting scenarios, five quantile levels, early
/// stopping on five validation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub paradigm: Paradigm,
    /// Epoch budget `K`.
    pub epochs: usize,
    /// Expert-mixture weights per epoch; `None` uses the linear decay
    /// `alpha_i = max(0, 1 - 2i/K)`.
    pub alpha_schedule: Option<Vec<F>>,
    /// Bootstrap futures per state for the voting paradigm (`M`).
    pub voting_trajectories: usize,
    /// Monte-Carlo perturbations per gradient estimate.
    pub n_pert: usize,
    /// Standard deviation of the Gaussian prize perturbation; 0 switches to
    /// the unperturbed (Z = 0) gradient.
    pub pert_scale: F,
    pub step_size: F,
    pub batch_size: usize,
    /// Mini-batch steps per refit call.
    pub opt_steps: usize,
    /// Consecutive non-improving epochs tolerated before halting.
    pub patience: usize,
    /// Look-ahead horizon `H` of both the model and the expert solves.
    pub lookahead: usize,
    pub quantile_levels: Vec<F>,
    /// Labels added per DAgger epoch.
    pub samples_per_epoch: usize,
    /// Dataset size for the a-priori paradigms.
    pub static_dataset_size: usize,
    /// Rollout horizon `T` of the DAgger episodes.
    pub train_horizon: usize,
    pub seed: u64,
    /// Fallback solver settings outside the exhaustive guard.
    pub ls: LocalSearchConfig,
}

impl<F: Scalar> TrainConfig<F> {
    pub fn new(paradigm: Paradigm) -> Self {
        TrainConfig {
            paradigm,
            epochs: 20,
            alpha_schedule: None,
            voting_trajectories: 5,
            n_pert: 20,
            pert_scale: F::one(),
            step_size: F::c(1e-2),
            batch_size: 32,
            opt_steps: 200,
            patience: 5,
            lookahead: 6,
            quantile_levels: QuantileConfig::<F>::default_levels(1).levels,
            samples_per_epoch: 110,
            static_dataset_size: 600,
            train_horizon: 10,
            seed: 0,
            ls: LocalSearchConfig::default(),
        }
    }

    pub fn quantile_config(&self) -> Result<QuantileConfig<F>> {
        QuantileConfig::new(self.quantile_levels.clone(), self.lookahead)
    }

    /// Expert weight for a 1-based epoch index.
    pub fn alpha(&self, epoch: usize) -> F {
        if let Some(schedule) = &self.alpha_schedule {
            return schedule[(epoch - 1).min(schedule.len() - 1)];
        }
        let k = F::from_count(self.epochs.max(1));
        let i = F::from_count(epoch);
        (F::one() - F::c(2.0) * i / k).max(F::zero())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.voting_trajectories == 0
            || self.n_pert == 0
            || self.batch_size == 0
            || self.train_horizon == 0
            || self.samples_per_epoch == 0
            || self.static_dataset_size == 0
        {
            return Err(Error::invalid("train config counts must be positive"));
        }
        if let Some(schedule) = &self.alpha_schedule {
            if schedule.is_empty() {
                return Err(Error::invalid("alpha schedule must not be empty"));
            }
            for w in schedule.windows(2) {
                if w[0] < w[1] {
                    return Err(Error::invalid("alpha schedule must be non-increasing"));
                }
            }
            if schedule.iter().any(|&a| a < F::zero() || a > F::one()) {
                return Err(Error::invalid("alpha weights must lie in [0, 1]"));
            }
        }
        self.quantile_config().map(|_| ())
    }
}

/// Rollout length an episode file supports: episodes carry `lookahead - 1`
/// extra periods so every visited state still sees a full look-ahead.
pub fn episode_rollout_periods(episode_periods: usize, lookahead: usize) -> usize {
    episode_periods.saturating_sub(lookahead.saturating_sub(1)).max(1)
}

/// Oracle inputs fixed by a state: replenishment quantities and capacity.
pub struct OracleContext<'a, F> {
    pub quantities: Vec<F>,
    pub vehicle_capacity: F,
    pub cache: &'a mut TourCostCache<F>,
}

impl<'a, F: Scalar> OracleContext<'a, F> {
    pub fn for_state(
        instance: &Instance<F>,
        state: &State<F>,
        cache: &'a mut TourCostCache<F>,
    ) -> Self {
        OracleContext {
            quantities: state.quantities(instance),
            vehicle_capacity: instance.vehicle_capacity,
            cache,
        }
    }
}

/// Stochastic gradient of the perturbed imitation loss with respect to the
/// prizes: mean visit vector of the perturbed oracle solutions minus the
/// target's visit vector. `pert_scale = 0` gives the unperturbed
/// subgradient from a single solve.
pub fn fy_gradient_theta<F: Scalar>(
    theta: &PrizeVector<F>,
    target: &Tour,
    ctx: &mut OracleContext<'_, F>,
    n_pert: usize,
    pert_scale: F,
    seed: u64,
) -> Result<Vec<F>> {
    let n = theta.len();
    let draws = if pert_scale == F::zero() { 1 } else { n_pert.max(1) };
    let mut rng = stream(seed, StreamId::Perturbation, &[]);
    let mut mean_z = vec![F::zero(); n];
    for _ in 0..draws {
        let perturbed = PrizeVector::new(
            theta
                .theta
                .iter()
                .map(|&t| t + pert_scale * F::standard_normal(&mut rng))
                .collect(),
        );
        let (tour, _) =
            solve_scored(&perturbed, &ctx.quantities, ctx.vehicle_capacity, ctx.cache)?;
        for &i in tour.sequence() {
            mean_z[i - 1] = mean_z[i - 1] + F::one();
        }
    }
    let scale = F::one() / F::from_count(draws);
    let z_target = visit_vector(target, n);
    Ok((0..n)
        .map(|i| mean_z[i] * scale - if z_target[i] { F::one() } else { F::zero() })
        .collect())
}

/// Monte-Carlo estimate of the perturbed non-optimality loss: mean
/// perturbed oracle objective minus the target's unperturbed objective.
/// With `pert_scale = 0` this is the exact non-optimality gap of the
/// target (non-negative, zero iff the target is oracle-optimal).
pub fn fy_loss_estimate<F: Scalar>(
    theta: &PrizeVector<F>,
    target: &Tour,
    ctx: &mut OracleContext<'_, F>,
    n_pert: usize,
    pert_scale: F,
    seed: u64,
) -> Result<F> {
    let draws = if pert_scale == F::zero() { 1 } else { n_pert.max(1) };
    let mut rng = stream(seed, StreamId::Perturbation, &[]);
    let mut mean_value = F::zero();
    for _ in 0..draws {
        let perturbed = PrizeVector::new(
            theta
                .theta
                .iter()
                .map(|&t| t + pert_scale * F::standard_normal(&mut rng))
                .collect(),
        );
        let (_, value) =
            solve_scored(&perturbed, &ctx.quantities, ctx.vehicle_capacity, ctx.cache)?;
        mean_value = mean_value + value;
    }
    mean_value = mean_value / F::from_count(draws);
    let mut target_prizes = F::zero();
    for &i in target.sequence() {
        target_prizes = target_prizes + theta.theta[i - 1];
    }
    let target_value = target_prizes - routing_cost(target, ctx.cache.gamma());
    Ok(mean_value - target_value)
}

/// Mean unperturbed loss over a dataset; the fit loop tracks its best
/// parameters against this.
pub fn dataset_z0_loss<F: Scalar>(
    dataset: &[TrainingSample<F>],
    params: &ModelParams<F>,
    instance: &Instance<F>,
    qconfig: &QuantileConfig<F>,
    cache: &mut TourCostCache<F>,
) -> Result<F> {
    if dataset.is_empty() {
        return Err(Error::invalid("empty dataset has no loss"));
    }
    let mut total = F::zero();
    for sample in dataset {
        let theta = prize_forward(&sample.state, instance, params, qconfig)?;
        let mut ctx = OracleContext::for_state(instance, &sample.state, cache);
        total = total + fy_loss_estimate(&theta, &sample.target, &mut ctx, 1, F::zero(), 0)?;
    }
    Ok(total / F::from_count(dataset.len()))
}

/// Mean parameter gradient over a batch of samples.
fn batch_gradient<F: Scalar>(
    batch: &[&TrainingSample<F>],
    params: &ModelParams<F>,
    instance: &Instance<F>,
    qconfig: &QuantileConfig<F>,
    config: &TrainConfig<F>,
    cache: &mut TourCostCache<F>,
    seed: u64,
) -> Result<ParamGrad<F>> {
    let mut grad = ParamGrad::zeros_like(params);
    let weight = F::one() / F::from_count(batch.len());
    for (slot, sample) in batch.iter().enumerate() {
        let theta = prize_forward(&sample.state, instance, params, qconfig)?;
        let mut ctx = OracleContext::for_state(instance, &sample.state, cache);
        let dtheta = fy_gradient_theta(
            &theta,
            &sample.target,
            &mut ctx,
            config.n_pert,
            config.pert_scale,
            derive_u64(seed, StreamId::Perturbation, &[slot as u64, sample.nonce]),
        )?;
        let sample_grad =
            prize_backward(&sample.state, instance, params, qconfig, &dtheta)?;
        grad.add_scaled(&sample_grad, weight);
    }
    Ok(grad)
}

/// Minimize the summed imitation loss by mini-batch Adam; returns the
/// parameters with the best unperturbed training loss seen during the run.
pub fn fit_params<F: Scalar>(
    dataset: &[TrainingSample<F>],
    params0: &ModelParams<F>,
    instance: &Instance<F>,
    config: &TrainConfig<F>,
    cache: &mut TourCostCache<F>,
    seed: u64,
) -> Result<ModelParams<F>> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot fit on an empty dataset"));
    }
    let qconfig = config.quantile_config()?;
    let mut flat = params0.flatten();
    let dim = flat.len();
    let mut m = vec![F::zero(); dim];
    let mut v = vec![F::zero(); dim];
    let beta1 = F::c(0.9);
    let beta2 = F::c(0.999);
    let eps = F::c(1e-8);

    let mut best = params0.clone();
    let mut best_loss = dataset_z0_loss(dataset, params0, instance, &qconfig, cache)?;

    let pass_len = dataset.len().div_ceil(config.batch_size);
    let mut rng = stream(seed, StreamId::Training, &[TAG_FIT]);
    let mut order: Vec<usize> = Vec::new();

    let mut params = params0.clone();
    for step in 0..config.opt_steps {
        let mut batch = Vec::with_capacity(config.batch_size.min(dataset.len()));
        for _ in 0..config.batch_size.min(dataset.len()) {
            if order.is_empty() {
                order = (0..dataset.len()).collect();
                // Fisher-Yates from the step RNG
                for i in (1..order.len()).rev() {
                    let j = rng.random_range(0..=i);
                    order.swap(i, j);
                }
            }
            batch.push(&dataset[order.pop().unwrap()]);
        }
        let grad = batch_gradient(
            &batch,
            &params,
            instance,
            &qconfig,
            config,
            cache,
            derive_u64(seed, StreamId::Perturbation, &[step as u64]),
        )?;
        let flat_grad = grad.flatten();
        let t = F::from_count(step + 1);
        // cosine decay to a tenth of the base step: the loss is piecewise
        // linear, so a constant step keeps orbiting its minimizers
        let progress = F::from_count(step) / F::from_count(config.opt_steps.max(1));
        let lr = config.step_size
            * (F::c(0.55) + F::c(0.45) * (F::c(std::f64::consts::PI) * progress).cos());
        for k in 0..dim {
            m[k] = beta1 * m[k] + (F::one() - beta1) * flat_grad[k];
            v[k] = beta2 * v[k] + (F::one() - beta2) * flat_grad[k] * flat_grad[k];
            let m_hat = m[k] / (F::one() - beta1.powf(t));
            let v_hat = v[k] / (F::one() - beta2.powf(t));
            flat[k] = flat[k] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        params = params0.unflatten(&flat);
        let end_of_pass = (step + 1) % pass_len == 0 || step + 1 == config.opt_steps;
        if end_of_pass {
            let loss = dataset_z0_loss(dataset, &params, instance, &qconfig, cache)?;
            if loss < best_loss {
                best_loss = loss;
                best = params.clone();
            }
        }
    }
    Ok(best)
}

/// Keep the current epoch in full, drop anything older than ten epochs,
/// retain every strictly-past sample with probability one half. The
/// retention coin is a pure function of `(seed, nonce)`, so a sample
/// drawn once keeps its fate and the dataset grows linearly.
pub fn age_dataset<F: Scalar>(
    dataset: Vec<TrainingSample<F>>,
    current_epoch: usize,
    seed: u64,
) -> Vec<TrainingSample<F>> {
    dataset
        .into_iter()
        .filter(|sample| {
            let age = current_epoch.saturating_sub(sample.epoch_tag);
            if age == 0 {
                return true;
            }
            if age > AGING_HORIZON {
                return false;
            }
            derive_u64(seed, StreamId::Training, &[TAG_RETAIN, sample.nonce]) & 1 == 0
        })
        .collect()
}

/// Total learned-policy cost over the validation episodes (each rolled out
/// from the canonical initial state).
pub fn mlco_validation_cost<F: Scalar>(
    instance: &Instance<F>,
    params: &ModelParams<F>,
    qconfig: &QuantileConfig<F>,
    history: &Episode<F>,
    episodes: &[Episode<F>],
    cache: &mut TourCostCache<F>,
) -> Result<F> {
    let mut total = F::zero();
    for episode in episodes {
        let x0 = initial_state(instance, history, episode, qconfig.lookahead)?;
        let periods = episode_rollout_periods(episode.periods, qconfig.lookahead);
        let mut policy = |instance: &Instance<F>, state: &State<F>| {
            mlco_decide(instance, state, params, qconfig, cache)
        };
        let trajectory = rollout(instance, &mut policy, episode, &x0, periods)?;
        total = total + trajectory.total.total;
    }
    Ok(total)
}

/// Best-so-far tracker for early stopping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestTracker<F> {
    pub best_cost: F,
    pub best_params: ModelParams<F>,
    pub non_improve: usize,
}

/// Evaluate `params` on the validation episodes and update the tracker.
/// Returns the halt flag (`patience` consecutive epochs without strict
/// improvement) and the evaluated validation cost.
pub fn early_stop_check<F: Scalar>(
    params: &ModelParams<F>,
    tracker: &mut BestTracker<F>,
    validation: &[Episode<F>],
    instance: &Instance<F>,
    history: &Episode<F>,
    config: &TrainConfig<F>,
    cache: &mut TourCostCache<F>,
) -> Result<(bool, F)> {
    if validation.len() != 5 {
        return Err(Error::invalid(format!(
            "early stopping uses exactly 5 validation episodes, got {}",
            validation.len()
        )));
    }
    let qconfig = config.quantile_config()?;
    let cost = mlco_validation_cost(instance, params, &qconfig, history, validation, cache)?;
    if cost < tracker.best_cost {
        tracker.best_cost = cost;
        tracker.best_params = params.clone();
        tracker.non_improve = 0;
    } else {
        tracker.non_improve += 1;
    }
    Ok((tracker.non_improve >= config.patience, cost))
}

/// Per-epoch training log record (wall-clock is reported separately from
/// the deterministic columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog<F> {
    pub epoch: usize,
    pub dataset_size: usize,
    pub train_fy_loss: F,
    pub validation_cost: F,
    pub alpha: F,
    pub wallclock_ms: u64,
}

/// Complete serializable trainer state; training can resume from the last
/// persisted epoch and reproduce an uninterrupted run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState<F> {
    pub epoch: usize,
    pub params: ModelParams<F>,
    pub tracker: BestTracker<F>,
    pub dataset: Vec<TrainingSample<F>>,
    pub log: Vec<EpochLog<F>>,
    pub halted: bool,
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<F> {
    pub best_params: ModelParams<F>,
    pub best_validation_cost: F,
    pub final_params: ModelParams<F>,
    pub log: Vec<EpochLog<F>>,
    pub halted_early: bool,
}

/// Incremental trainer; the CLI persists [`TrainerState`] after every epoch
/// so interrupted runs resume exactly where they stopped.
pub struct Trainer<'a, F: Scalar> {
    instance: &'a Instance<F>,
    history: &'a Episode<F>,
    config: &'a TrainConfig<F>,
    validation: &'a [Episode<F>],
    cache: TourCostCache<F>,
    pub state: TrainerState<F>,
}

impl<'a, F: Scalar> Trainer<'a, F> {
    pub fn new(
        instance: &'a Instance<F>,
        history: &'a Episode<F>,
        config: &'a TrainConfig<F>,
        validation: &'a [Episode<F>],
    ) -> Result<Self> {
        config.validate()?;
        let qconfig = config.quantile_config()?;
        let n_features =
            if instance.is_contextual() { crate::instance::N_FEATURES } else { 0 };
        let params = ModelParams::init(n_features, &qconfig);
        let state = TrainerState {
            epoch: 0,
            tracker: BestTracker {
                best_cost: F::infinity(),
                best_params: params.clone(),
                non_improve: 0,
            },
            params,
            dataset: Vec::new(),
            log: Vec::new(),
            halted: false,
        };
        Ok(Trainer {
            instance,
            history,
            config,
            validation,
            cache: TourCostCache::new(&instance.gamma)?,
            state,
        })
    }

    pub fn from_state(
        instance: &'a Instance<F>,
        history: &'a Episode<F>,
        config: &'a TrainConfig<F>,
        validation: &'a [Episode<F>],
        state: TrainerState<F>,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Trainer {
            instance,
            history,
            config,
            validation,
            cache: TourCostCache::new(&instance.gamma)?,
            state,
        })
    }

    pub fn is_done(&self) -> bool {
        self.state.halted || self.state.epoch >= self.config.epochs
    }

    /// Anticipative label for a state: first decision of the deterministic
    /// solve over the episode's next `lookahead` periods.
    fn episode_target(
        &mut self,
        state: &State<F>,
        episode: &Episode<F>,
        t: usize,
    ) -> Result<Tour> {
        let horizon = self.config.lookahead;
        let demands: Vec<Vec<F>> =
            episode.demand.iter().map(|row| row[t..t + horizon].to_vec()).collect();
        anticipative_first_decision(
            self.instance,
            state,
            &demands,
            &mut self.cache,
            &self.config.ls,
        )
    }

    /// Bootstrap a demand future from the state's rolling history: one
    /// uniform draw per customer and period, or one shared draw per period
    /// for contextual instances so (feature, demand) pairs stay together.
    fn bootstrap_future(
        &self,
        state: &State<F>,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Vec<Vec<F>> {
        let horizon = self.config.lookahead;
        let window = state.history.window();
        let n = self.instance.n;
        let mut demands = vec![vec![F::zero(); horizon]; n];
        if self.instance.is_contextual() {
            for h in 0..horizon {
                let col = rng.random_range(0..window);
                for i in 0..n {
                    demands[i][h] = state.history.demand[i][col];
                }
            }
        } else {
            for h in 0..horizon {
                for (i, row) in demands.iter_mut().enumerate() {
                    let col = rng.random_range(0..window);
                    row[h] = state.history.demand[i][col];
                }
            }
        }
        demands
    }

    fn voting_targets(
        &mut self,
        state: &State<F>,
        epoch: usize,
        episode_ix: u64,
        t: usize,
    ) -> Result<Vec<Tour>> {
        let m = self.config.voting_trajectories;
        let mut targets = Vec::with_capacity(m);
        for j in 0..m {
            let mut rng = stream(
                self.config.seed,
                StreamId::Training,
                &[TAG_VOTE, epoch as u64, episode_ix, t as u64, j as u64],
            );
            let demands = self.bootstrap_future(state, &mut rng);
            targets.push(anticipative_first_decision(
                self.instance,
                state,
                &demands,
                &mut self.cache,
                &self.config.ls,
            )?);
        }
        Ok(targets)
    }

    /// Collect one DAgger epoch's worth of labeled states.
    fn collect_dagger_samples(&mut self, epoch: usize) -> Result<()> {
        let config = self.config;
        let horizon = config.lookahead;
        let t_max = config.train_horizon;
        let alpha = config.alpha(epoch);
        let voting = config.paradigm == Paradigm::VotingDagger;
        let mut added = 0usize;
        let mut episode_ix = 0u64;
        while added < config.samples_per_epoch {
            let episode_seed = derive_u64(
                config.seed,
                StreamId::Training,
                &[TAG_EPISODE, epoch as u64, episode_ix],
            );
            let episode =
                sample_episode(self.instance, t_max + horizon - 1, episode_seed)?;
            let mut state = initial_state(self.instance, self.history, &episode, horizon)?;
            let mut mix_rng = stream(
                config.seed,
                StreamId::Training,
                &[TAG_MIX, epoch as u64, episode_ix],
            );
            for t in 0..t_max {
                if added >= config.samples_per_epoch {
                    break;
                }
                let expert = self.episode_target(&state, &episode, t)?;
                let targets = if voting {
                    self.voting_targets(&state, epoch, episode_ix, t)?
                } else {
                    vec![expert.clone()]
                };
                for (j, target) in targets.into_iter().enumerate() {
                    self.state.dataset.push(TrainingSample {
                        state: state.clone(),
                        target,
                        epoch_tag: epoch,
                        nonce: derive_u64(
                            config.seed,
                            StreamId::Training,
                            &[TAG_NONCE, epoch as u64, episode_ix, t as u64, j as u64],
                        ),
                    });
                    added += 1;
                }
                let take_expert = F::uniform(&mut mix_rng, F::zero(), F::one()) < alpha;
                let action = if take_expert {
                    expert
                } else {
                    let qconfig = config.quantile_config()?;
                    mlco_decide(
                        self.instance,
                        &state,
                        &self.state.params,
                        &qconfig,
                        &mut self.cache,
                    )?
                };
                let demand = episode.demand_at(t);
                let next_context = episode.context_at(t + horizon);
                state = transition(
                    self.instance,
                    &state,
                    &action,
                    &demand,
                    next_context.as_deref(),
                )?;
            }
            episode_ix += 1;
        }
        Ok(())
    }

    /// One full epoch: gather labels (DAgger paradigms aggregate and age,
    /// a-priori paradigms build the dataset once), refit, validate.
    pub fn run_epoch(&mut self) -> Result<EpochLog<F>> {
        if self.is_done() {
            return Err(Error::invalid("training already finished"));
        }
        let started = Instant::now();
        let epoch = self.state.epoch + 1;
        if epoch == 1 && self.state.tracker.best_cost == F::infinity() {
            // the untrained initialization is itself a working policy;
            // count it as the epoch-0 incumbent
            let qconfig = self.config.quantile_config()?;
            self.state.tracker.best_cost = mlco_validation_cost(
                self.instance,
                &self.state.params,
                &qconfig,
                self.history,
                self.validation,
                &mut self.cache,
            )?;
        }
        let alpha;
        if self.config.paradigm.is_dagger() {
            alpha = self.config.alpha(epoch);
            self.collect_dagger_samples(epoch)?;
            self.state.dataset =
                age_dataset(std::mem::take(&mut self.state.dataset), epoch, self.config.seed);
        } else {
            alpha = F::zero();
            if self.state.dataset.is_empty() {
                self.state.dataset = match self.config.paradigm {
                    Paradigm::AllPairs => {
                        build_dataset_all_pairs(self.instance, self.history, self.config)?
                    }
                    Paradigm::Sampling => {
                        build_dataset_sampling(self.instance, self.history, self.config)?
                    }
                    _ => unreachable!(),
                };
            }
        }
        let fit_seed =
            derive_u64(self.config.seed, StreamId::Training, &[TAG_FIT, epoch as u64]);
        self.state.params = fit_params(
            &self.state.dataset,
            &self.state.params,
            self.instance,
            self.config,
            &mut self.cache,
            fit_seed,
        )?;
        let qconfig = self.config.quantile_config()?;
        let train_fy_loss = dataset_z0_loss(
            &self.state.dataset,
            &self.state.params,
            self.instance,
            &qconfig,
            &mut self.cache,
        )?;
        let (halt, validation_cost) = early_stop_check(
            &self.state.params,
            &mut self.state.tracker,
            self.validation,
            self.instance,
            self.history,
            self.config,
            &mut self.cache,
        )?;
        let record = EpochLog {
            epoch,
            dataset_size: self.state.dataset.len(),
            train_fy_loss,
            validation_cost,
            alpha,
            wallclock_ms: started.elapsed().as_millis() as u64,
        };
        self.state.epoch = epoch;
        self.state.halted = halt;
        self.state.log.push(record.clone());
        Ok(record)
    }

    pub fn outcome(self) -> TrainOutcome<F> {
        let tracker = self.state.tracker;
        TrainOutcome {
            best_params: tracker.best_params,
            best_validation_cost: tracker.best_cost,
            final_params: self.state.params,
            log: self.state.log,
            halted_early: self.state.halted,
        }
    }
}

/// Train to completion under any paradigm.
pub fn train<F: Scalar>(
    instance: &Instance<F>,
    history: &Episode<F>,
    config: &TrainConfig<F>,
    validation: &[Episode<F>],
) -> Result<TrainOutcome<F>> {
    let mut trainer = Trainer::new(instance, history, config, validation)?;
    while !trainer.is_done() {
        trainer.run_epoch()?;
    }
    Ok(trainer.outcome())
}

/// DAgger entry point (anticipative or voting paradigm).
pub fn dagger_train<F: Scalar>(
    instance: &Instance<F>,
    history: &Episode<F>,
    config: &TrainConfig<F>,
    validation: &[Episode<F>],
) -> Result<TrainOutcome<F>> {
    if !config.paradigm.is_dagger() {
        return Err(Error::invalid("dagger_train requires a DAgger paradigm"));
    }
    train(instance, history, config, validation)
}

fn sample_apriori_state<F: Scalar>(
    instance: &Instance<F>,
    history: &Episode<F>,
    config: &TrainConfig<F>,
    episode: &Episode<F>,
    index: u64,
) -> Result<State<F>> {
    let mut state = initial_state(instance, history, episode, config.lookahead)?;
    let mut rng = stream(config.seed, StreamId::Training, &[TAG_APRIORI_STATE, index]);
    for i in 0..instance.n {
        state.inventories[i] = F::uniform(&mut rng, F::zero(), instance.capacity[i]);
    }
    Ok(state)
}

fn build_dataset_apriori<F: Scalar>(
    instance: &Instance<F>,
    history: &Episode<F>,
    config: &TrainConfig<F>,
    first_pair_only: bool,
) -> Result<Vec<TrainingSample<F>>> {
    let horizon = config.lookahead;
    let mut dataset = Vec::with_capacity(config.static_dataset_size);
    let mut cache = TourCostCache::new(&instance.gamma)?;
    let mut index = 0u64;
    while dataset.len() < config.static_dataset_size {
        let episode_seed =
            derive_u64(config.seed, StreamId::Training, &[TAG_APRIORI_EPISODE, index]);
        // 2H-1 periods keep every trajectory state's context window full
        let episode = sample_episode(instance, 2 * horizon - 1, episode_seed)?;
        let mut state = sample_apriori_state(instance, history, config, &episode, index)?;
        let demands: Vec<Vec<F>> =
            episode.demand.iter().map(|row| row[..horizon].to_vec()).collect();
        let schedule =
            solve_deterministic(instance, &state, &demands, &mut cache, &config.ls)?;
        let pairs = if first_pair_only { 1 } else { horizon };
        for j in 0..pairs {
            dataset.push(TrainingSample {
                state: state.clone(),
                target: schedule.tours[j].clone(),
                epoch_tag: 0,
                nonce: derive_u64(
                    config.seed,
                    StreamId::Training,
                    &[TAG_NONCE, index, j as u64],
                ),
            });
            if dataset.len() >= config.static_dataset_size {
                break;
            }
            if j + 1 < pairs {
                let demand = episode.demand_at(j);
                let next_context = episode.context_at(j + horizon);
                state = transition(
                    instance,
                    &state,
                    &schedule.tours[j],
                    &demand,
                    next_context.as_deref(),
                )?;
            }
        }
        index += 1;
    }
    Ok(dataset)
}

/// A-priori dataset: every pair along each anticipative trajectory.
pub fn build_dataset_all_pairs<F: Scalar>(
    instance: &Instance<F>,
    history: &Episode<F>,
    config: &TrainConfig<F>,
) -> Result<Vec<TrainingSample<F>>> {
    build_dataset_apriori(instance, history, config, false)
}

/// A-priori dataset: only the first-period pair of each solve, with
/// uniformly sampled initial inventories.
pub fn build_dataset_sampling<F: Scalar>(
    instance: &Instance<F>,
    history: &Episode<F>,
    config: &TrainConfig<F>,
) -> Result<Vec<TrainingSample<F>>> {
    build_dataset_apriori(instance, history, config, true)
}
