//! Rolling-horizon benchmark policies and the learned policy.
//!
//! All benchmarks share one pattern: build a deterministic demand forecast
//! over the look-ahead horizon from the state's history, solve the
//! deterministic IRP, execute the first-period decision. They differ only
//! in the forecast. The learned policy replaces the whole look-ahead solve
//! with one prize prediction plus one oracle call. The anticipative
//! baseline (full knowledge of the episode) provides the denominator of
//! every reported gap.

use serde::{Deserialize, Serialize};

use crate::cpctsp::{solve, TourCostCache};
use crate::det_irp::{
    anticipative_first_decision, masks_total, solve_deterministic, solve_exhaustive_seeded,
    within_exhaustive_guard, LocalSearchConfig, VisitSchedule,
};
use crate::instance::{Episode, Instance};
use crate::mdp::{
    holding_and_stockout, mask_feasible, rollout, updated_inventories, State, Tour, Trajectory,
};
use crate::model::{prize_forward, ModelParams, QuantileConfig};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// SAA-3 enumerates every capacity-feasible first-period subset up to this
/// size; above it it falls back to a small candidate pool.
const SAA3_ENUMERATION_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Mean,
    Saa1,
    Saa3,
    Mlco,
    Anticipative,
}

impl PolicyKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PolicyKind::Mean),
            "saa1" => Ok(PolicyKind::Saa1),
            "saa3" => Ok(PolicyKind::Saa3),
            "mlco" => Ok(PolicyKind::Mlco),
            "anticipative" => Ok(PolicyKind::Anticipative),
            other => Err(Error::invalid(format!("unknown policy `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Mean => "mean",
            PolicyKind::Saa1 => "saa1",
            PolicyKind::Saa3 => "saa3",
            PolicyKind::Mlco => "mlco",
            PolicyKind::Anticipative => "anticipative",
        }
    }
}

/// Everything needed to instantiate a policy for one instance.
#[derive(Debug, Clone)]
pub struct PolicySpec<F> {
    pub kind: PolicyKind,
    pub lookahead: usize,
    /// Look-ahead solver fallback outside the exhaustive guard.
    pub ls: LocalSearchConfig,
    /// Budget for SAA-3 continuation solves (one per candidate and
    /// scenario, so this stays deliberately small).
    pub continuation_ls: LocalSearchConfig,
    /// SAA-1 variant: repeat the selected observation over the whole
    /// look-ahead instead of falling back to history means.
    pub saa1_repeat_observation: bool,
    /// Scenario count for SAA-3.
    pub scenario_count: usize,
    /// Trained weights for the learned policy.
    pub params: Option<(ModelParams<F>, QuantileConfig<F>)>,
}

impl<F: Scalar> PolicySpec<F> {
    pub fn new(kind: PolicyKind, lookahead: usize) -> Self {
        PolicySpec {
            kind,
            lookahead,
            ls: LocalSearchConfig::default(),
            continuation_ls: LocalSearchConfig { budget: 2_000, restarts: 1, seed: 0 },
            saa1_repeat_observation: false,
            scenario_count: 3,
            params: None,
        }
    }

    pub fn with_params(mut self, params: ModelParams<F>, config: QuantileConfig<F>) -> Self {
        self.params = Some((params, config));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookahead == 0 {
            return Err(Error::invalid("look-ahead must cover at least one period"));
        }
        if self.kind == PolicyKind::Saa3 && self.scenario_count != 3 {
            return Err(Error::invalid("saa3 uses exactly three scenarios"));
        }
        if self.kind == PolicyKind::Mlco && self.params.is_none() {
            return Err(Error::invalid("mlco policy needs model parameters"));
        }
        if self.kind == PolicyKind::Anticipative {
            return Err(Error::invalid(
                "the anticipative baseline is not a rolling policy; evaluate it per episode",
            ));
        }
        Ok(())
    }
}

/// Per-customer mean of the demand history.
fn history_means<F: Scalar>(state: &State<F>) -> Vec<F> {
    let window = F::from_count(state.history.window());
    state
        .history
        .demand
        .iter()
        .map(|row| row.iter().fold(F::zero(), |a, &b| a + b) / window)
        .collect()
}

fn forecast_from_first_column<F: Scalar>(
    first: &[F],
    fill: &[F],
    lookahead: usize,
) -> Vec<Vec<F>> {
    (0..first.len())
        .map(|i| {
            let mut row = Vec::with_capacity(lookahead);
            row.push(first[i]);
            for _ in 1..lookahead {
                row.push(fill[i]);
            }
            row
        })
        .collect()
}

/// Rolling-horizon policy on the history-mean forecast.
pub fn mean_policy<F: Scalar>(
    instance: &Instance<F>,
    state: &State<F>,
    lookahead: usize,
    cache: &mut TourCostCache<F>,
    ls: &LocalSearchConfig,
) -> Result<Tour> {
    let means = history_means(state);
    let demands: Vec<Vec<F>> = means.iter().map(|&m| vec![m; lookahead]).collect();
    anticipative_first_decision(instance, state, &demands, cache, ls)
}

/// Index of the history column closest to the current feature vector
/// (squared Euclidean distance, ties to the smaller index).
fn nearest_history_columns<F: Scalar>(state: &State<F>, count: usize) -> Result<Vec<usize>> {
    let window = state.history.window();
    let hist_ctx = state
        .history
        .context
        .as_ref()
        .ok_or_else(|| Error::invalid("contextual selection needs history features"))?;
    let current = state
        .context_window
        .as_ref()
        .and_then(|w| w.first())
        .ok_or_else(|| Error::invalid("contextual selection needs current-period features"))?;
    let mut scored: Vec<(F, usize)> = (0..window)
        .map(|k| {
            let mut dist = F::zero();
            for (f, row) in hist_ctx.iter().enumerate() {
                let d = row[k] - current[f];
                dist = dist + d * d;
            }
            (dist, k)
        })
        .collect();
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1))
    });
    Ok(scored.into_iter().take(count).map(|(_, k)| k).collect())
}

/// Historical observation columns used by the SAA policies: the most recent
/// ones, or the nearest-feature ones for contextual instances.
fn scenario_columns<F: Scalar>(
    instance: &Instance<F>,
    state: &State<F>,
    count: usize,
) -> Result<Vec<usize>> {
    let window = state.history.window();
    if window < count {
        return Err(Error::invalid(format!("history holds {window} observations, need {count}")));
    }
    if instance.is_contextual() {
        nearest_history_columns(state, count)
    } else {
        Ok((0..count).map(|k| window - 1 - k).collect())
    }
}

/// Rolling-horizon policy on a single historical observation (most recent,
/// or nearest by features), extended with history means.
pub fn saa1_policy<F: Scalar>(
    instance: &Instance<F>,
    state: &State<F>,
    lookahead: usize,
    cache: &mut TourCostCache<F>,
    ls: &LocalSearchConfig,
    repeat_observation: bool,
) -> Result<Tour> {
    let col = scenario_columns(instance, state, 1)?[0];
    let observation: Vec<F> = state.history.demand.iter().map(|row| row[col]).collect();
    let fill = if repeat_observation { observation.clone() } else { history_means(state) };
    let demands = forecast_from_first_column(&observation, &fill, lookahead);
    anticipative_first_decision(instance, state, &demands, cache, ls)
}

/// Value of playing `mask` now under one scenario: the period cost plus the
/// optimal continuation cost, folded exactly like a flat multi-period
/// solve so scenario values are comparable across candidates.
fn scenario_value<F: Scalar>(
    instance: &Instance<F>,
    state: &State<F>,
    mask: u32,
    scenario: &[Vec<F>],
    cache: &mut TourCostCache<F>,
    continuation_ls: &LocalSearchConfig,
) -> Result<F> {
    let lookahead = scenario[0].len();
    let first_demand: Vec<F> = scenario.iter().map(|row| row[0]).collect();
    let (holding, stockout) =
        holding_and_stockout(instance, &state.inventories, mask, &first_demand);
    let (routing, _) = cache.tour(mask);
    let step = holding + stockout + routing;
    if lookahead == 1 {
        return Ok(step);
    }
    let post_inv = updated_inventories(instance, &state.inventories, mask, &first_demand);
    let cont_demands: Vec<Vec<F>> = scenario.iter().map(|row| row[1..].to_vec()).collect();
    let cont_masks = if within_exhaustive_guard(instance.n, lookahead - 1) {
        solve_exhaustive_seeded(instance, &post_inv, &cont_demands, cache, step)?.0
    } else {
        crate::det_irp::local_search_from(instance, &post_inv, &cont_demands, cache, continuation_ls)?.0
    };
    let mut combined = vec![mask];
    combined.extend_from_slice(&cont_masks);
    masks_total(instance, &state.inventories, scenario, &combined, cache).ok_or_else(|| {
        Error::Infeasible { period: state.t, reason: "scenario continuation infeasible".into() }
    })
}

/// Sample-average policy over three historical observations for the
/// current period, with history means for the remaining look-ahead.
pub fn saa3_policy<F: Scalar>(
    instance: &Instance<F>,
    state: &State<F>,
    lookahead: usize,
    cache: &mut TourCostCache<F>,
    ls: &LocalSearchConfig,
    continuation_ls: &LocalSearchConfig,
) -> Result<Tour> {
    let cols = scenario_columns(instance, state, 3)?;
    let means = history_means(state);
    let scenarios: Vec<Vec<Vec<F>>> = cols
        .iter()
        .map(|&col| {
            let obs: Vec<F> = state.history.demand.iter().map(|row| row[col]).collect();
            forecast_from_first_column(&obs, &means, lookahead)
        })
        .collect();

    let candidates: Vec<u32> = if instance.n <= SAA3_ENUMERATION_LIMIT {
        (0u32..(1u32 << instance.n))
            .filter(|&mask| mask_feasible(instance, &state.inventories, mask))
            .collect()
    } else {
        // candidate pool: stay home, the mean decision, and each scenario's
        // anticipative first decision
        let mut pool = vec![0u32];
        pool.push(mean_policy(instance, state, lookahead, cache, ls)?.visit_mask());
        for scenario in &scenarios {
            pool.push(
                anticipative_first_decision(instance, state, scenario, cache, ls)?.visit_mask(),
            );
        }
        pool.sort_unstable();
        pool.dedup();
        pool
    };

    let mut best_mask = 0u32;
    let mut best_value = F::infinity();
    for &mask in &candidates {
        let mut value = F::zero();
        for scenario in &scenarios {
            value =
                value + scenario_value(instance, state, mask, scenario, cache, continuation_ls)?;
        }
        // ascending-mask scan with strict improvement: smallest optimal mask
        if value < best_value {
            best_value = value;
            best_mask = mask;
        }
    }
    let (_, order) = cache.tour(best_mask);
    Tour::new(order)
}

/// The learned policy: predict prizes, solve the prize-collecting oracle.
pub fn mlco_decide<F: Scalar>(
    instance: &Instance<F>,
    state: &State<F>,
    params: &ModelParams<F>,
    config: &QuantileConfig<F>,
    cache: &mut TourCostCache<F>,
) -> Result<Tour> {
    let prizes = prize_forward(state, instance, params, config)?;
    let quantities = state.quantities(instance);
    solve(&prizes, &quantities, instance.vehicle_capacity, cache)
}

/// Full-knowledge baseline: solve the deterministic IRP over the whole
/// remaining horizon with the episode's true demands and roll the schedule
/// out. Returns the schedule and the realized trajectory.
pub fn anticipative_baseline<F: Scalar>(
    instance: &Instance<F>,
    episode: &Episode<F>,
    x0: &State<F>,
    periods: usize,
    cache: &mut TourCostCache<F>,
) -> Result<(VisitSchedule<F>, Trajectory<F>)> {
    let demands: Vec<Vec<F>> =
        episode.demand.iter().map(|row| row[..periods].to_vec()).collect();
    let ls = LocalSearchConfig { restarts: 10, ..LocalSearchConfig::default() };
    let schedule = solve_deterministic(instance, x0, &demands, cache, &ls)?;
    let tours = schedule.tours.clone();
    let mut follower = move |_: &Instance<F>, state: &State<F>| Ok(tours[state.t].clone());
    let trajectory = rollout(instance, &mut follower, episode, x0, periods)?;
    Ok((schedule, trajectory))
}

/// A ready-to-roll policy object owning its tour-cost cache.
pub struct RollingPolicy<F> {
    spec: PolicySpec<F>,
    cache: TourCostCache<F>,
}

impl<F: Scalar> RollingPolicy<F> {
    pub fn new(instance: &Instance<F>, spec: PolicySpec<F>) -> Result<Self> {
        spec.validate()?;
        Ok(RollingPolicy { spec, cache: TourCostCache::new(&instance.gamma)? })
    }

    pub fn spec(&self) -> &PolicySpec<F> {
        &self.spec
    }
}

impl<F: Scalar> crate::mdp::Policy<F> for RollingPolicy<F> {
    fn decide(&mut self, instance: &Instance<F>, state: &State<F>) -> Result<Tour> {
        let lookahead = self.spec.lookahead;
        match self.spec.kind {
            PolicyKind::Mean => {
                mean_policy(instance, state, lookahead, &mut self.cache, &self.spec.ls)
            }
            PolicyKind::Saa1 => saa1_policy(
                instance,
                state,
                lookahead,
                &mut self.cache,
                &self.spec.ls,
                self.spec.saa1_repeat_observation,
            ),
            PolicyKind::Saa3 => saa3_policy(
                instance,
                state,
                lookahead,
                &mut self.cache,
                &self.spec.ls,
                &self.spec.continuation_ls,
            ),
            PolicyKind::Mlco => {
                let (params, config) = self.spec.params.as_ref().expect("validated");
                mlco_decide(instance, state, params, config, &mut self.cache)
            }
            PolicyKind::Anticipative => unreachable!("rejected by validate"),
        }
    }
}
