//! The decision process: states, feasible tours, per-period costs,
//! transitions and policy rollouts.
//!
//! Everything that touches money or inventory funnels through this module,
//! so the simulator, the deterministic solvers and the evaluation reports
//! all price a period with bit-identical arithmetic. Costs are positive
//! quantities to be minimized; rewards never appear with a negative sign
//! anywhere else in the crate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cpctsp::routing_cost;
use crate::instance::{Episode, Instance};
use crate::scalar::{neg, pos, Scalar};
use crate::{Error, Result};

/// A depot-rooted cycle over a distinct subset of customers (1-based
/// indices). The empty tour (stay at the depot) is a valid decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Tour {
    sequence: Vec<usize>,
}

impl Tour {
    pub fn empty() -> Self {
        Tour { sequence: Vec::new() }
    }

    /// Build a tour from a visiting order; customers must be distinct and
    /// 1-based.
    pub fn new(sequence: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &i in &sequence {
            if i == 0 {
                return Err(Error::invalid("tour contains the depot"));
            }
            if !seen.insert(i) {
                return Err(Error::invalid(format!("tour visits customer {i} twice")));
            }
        }
        Ok(Tour { sequence })
    }

    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn contains(&self, customer: usize) -> bool {
        self.sequence.contains(&customer)
    }

    /// Bitmask with bit `i - 1` set for every visited customer `i`.
    pub fn visit_mask(&self) -> u32 {
        self.sequence.iter().fold(0u32, |m, &i| m | (1 << (i - 1)))
    }
}

impl TryFrom<Vec<usize>> for Tour {
    type Error = Error;
    fn try_from(sequence: Vec<usize>) -> Result<Self> {
        Tour::new(sequence)
    }
}

impl From<Tour> for Vec<usize> {
    fn from(tour: Tour) -> Self {
        tour.sequence
    }
}

/// 0/1 visit indicator per customer (the function `g` applied to the edge
/// encoding of the tour).
pub fn visit_vector(tour: &Tour, n: usize) -> Vec<bool> {
    let mut z = vec![false; n];
    for &i in tour.sequence() {
        z[i - 1] = true;
    }
    z
}

/// Rolling demand history attached to a state: the `window` most recent
/// observations per customer, oldest first, plus the matching feature
/// columns when the instance is contextual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History<F> {
    /// `n x window`.
    pub demand: Vec<Vec<F>>,
    /// `8 x window`, aligned with `demand` columns.
    pub context: Option<Vec<Vec<F>>>,
}

impl<F: Scalar> History<F> {
    pub fn window(&self) -> usize {
        self.demand.first().map_or(0, |row| row.len())
    }

    /// Demands of customer `i` (0-based), oldest first.
    pub fn customer(&self, i: usize) -> &[F] {
        &self.demand[i]
    }

    /// Feature column at history position `k` (0 = oldest).
    pub fn context_at(&self, k: usize) -> Option<Vec<F>> {
        self.context
            .as_ref()
            .map(|rows| rows.iter().map(|row| row[k]).collect())
    }

    fn shifted(&self, new_demand: &[F], new_context: Option<&[F]>) -> History<F> {
        let demand = self
            .demand
            .iter()
            .zip(new_demand)
            .map(|(row, &d)| {
                let mut next = row[1..].to_vec();
                next.push(d);
                next
            })
            .collect();
        let context = match (&self.context, new_context) {
            (Some(rows), Some(col)) => Some(
                rows.iter()
                    .zip(col)
                    .map(|(row, &v)| {
                        let mut next = row[1..].to_vec();
                        next.push(v);
                        next
                    })
                    .collect(),
            ),
            (Some(rows), None) => Some(rows.clone()),
            (None, _) => None,
        };
        History { demand, context }
    }
}

impl<F: Scalar> From<&Episode<F>> for History<F> {
    fn from(ep: &Episode<F>) -> Self {
        History { demand: ep.demand.clone(), context: ep.context.clone() }
    }
}

/// The observable state before the decision of period `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State<F> {
    pub t: usize,
    pub inventories: Vec<F>,
    pub history: History<F>,
    /// Feature vectors for periods `t, t+1, ..., t+H-1`; `None` for
    /// non-contextual instances.
    pub context_window: Option<Vec<Vec<F>>>,
}

impl<F: Scalar> State<F> {
    pub fn n_customers(&self) -> usize {
        self.inventories.len()
    }

    /// Order-up-to replenishment quantity of every customer: `C_i - I_i`.
    pub fn quantities(&self, instance: &Instance<F>) -> Vec<F> {
        self.inventories
            .iter()
            .zip(&instance.capacity)
            .map(|(&inv, &cap)| cap - inv)
            .collect()
    }
}

/// Initial state: full initial inventories, the provided demand history,
/// and (for contextual instances) the episode's first `lookahead` feature
/// vectors.
pub fn initial_state<F: Scalar>(
    instance: &Instance<F>,
    history: &Episode<F>,
    episode: &Episode<F>,
    lookahead: usize,
) -> Result<State<F>> {
    if history.n_customers() != instance.n {
        return Err(Error::invalid("history does not match instance size"));
    }
    let context_window = match (&episode.context, instance.is_contextual()) {
        (Some(_), true) => {
            if episode.periods < lookahead {
                return Err(Error::invalid(format!(
                    "episode has {} periods, context window needs {lookahead}",
                    episode.periods
                )));
            }
            Some((0..lookahead).map(|t| episode.context_at(t).unwrap()).collect())
        }
        (None, true) => return Err(Error::invalid("contextual instance requires episode context")),
        (_, false) => None,
    };
    if instance.is_contextual() && history.context.is_none() {
        return Err(Error::invalid("contextual instance requires history context"));
    }
    Ok(State {
        t: 0,
        inventories: instance.initial_inventory.clone(),
        history: History::from(history),
        context_window,
    })
}

/// Cost of one period, split by source. `total` is always the exact sum
/// `holding + stockout + routing` as computed for that period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown<F> {
    pub holding: F,
    pub stockout: F,
    pub routing: F,
    pub total: F,
}

impl<F: Scalar> CostBreakdown<F> {
    pub fn zero() -> Self {
        CostBreakdown {
            holding: F::zero(),
            stockout: F::zero(),
            routing: F::zero(),
            total: F::zero(),
        }
    }

    /// Accumulate another period. The aggregate `total` telescopes the
    /// per-period totals (it is not re-derived from the aggregate
    /// components, so it matches a one-pass accumulation bit for bit).
    pub fn accumulate(&mut self, step: &CostBreakdown<F>) {
        self.holding = self.holding + step.holding;
        self.stockout = self.stockout + step.stockout;
        self.routing = self.routing + step.routing;
        self.total = self.total + step.total;
    }
}

/// Replenishment load of a visit set: sum of `C_i - I_i` over set bits,
/// ascending customer index.
pub fn visit_load<F: Scalar>(instance: &Instance<F>, inventories: &[F], visit_mask: u32) -> F {
    let mut load = F::zero();
    for i in 0..instance.n {
        if visit_mask & (1 << i) != 0 {
            load = load + (instance.capacity[i] - inventories[i]);
        }
    }
    load
}

/// Capacity feasibility of a visit set in a given inventory position.
pub fn mask_feasible<F: Scalar>(instance: &Instance<F>, inventories: &[F], visit_mask: u32) -> bool {
    visit_load(instance, inventories, visit_mask) <= instance.vehicle_capacity
}

/// Is the tour a feasible decision in `state`?
pub fn is_feasible<F: Scalar>(instance: &Instance<F>, state: &State<F>, tour: &Tour) -> bool {
    if tour.sequence().iter().any(|&i| i > instance.n) {
        return false;
    }
    mask_feasible(instance, &state.inventories, tour.visit_mask())
}

/// Holding and stock-out cost of one period given the visit set.
///
/// A visited customer is refilled to capacity before demand hits; leftover
/// inventory pays `kappa_i` per unit, unmet demand pays `rho * kappa_i`
/// per unit.
pub fn holding_and_stockout<F: Scalar>(
    instance: &Instance<F>,
    inventories: &[F],
    visit_mask: u32,
    demand: &[F],
) -> (F, F) {
    let mut holding = F::zero();
    let mut stockout = F::zero();
    for i in 0..instance.n {
        let level = if visit_mask & (1 << i) != 0 { instance.capacity[i] } else { inventories[i] };
        let after = level - demand[i];
        holding = holding + instance.holding_cost[i] * pos(after);
        stockout = stockout + instance.shortage_penalty * instance.holding_cost[i] * neg(after);
    }
    (holding, stockout)
}

/// Post-demand inventories (order-up-to, no backlogging).
pub fn updated_inventories<F: Scalar>(
    instance: &Instance<F>,
    inventories: &[F],
    visit_mask: u32,
    demand: &[F],
) -> Vec<F> {
    (0..instance.n)
        .map(|i| {
            let level =
                if visit_mask & (1 << i) != 0 { instance.capacity[i] } else { inventories[i] };
            pos(level - demand[i])
        })
        .collect()
}

/// Full cost of one period for a feasible tour.
pub fn step_cost<F: Scalar>(
    instance: &Instance<F>,
    state: &State<F>,
    tour: &Tour,
    demand: &[F],
) -> Result<CostBreakdown<F>> {
    if !is_feasible(instance, state, tour) {
        return Err(Error::Infeasible {
            period: state.t,
            reason: "tour exceeds vehicle capacity".into(),
        });
    }
    let (holding, stockout) =
        holding_and_stockout(instance, &state.inventories, tour.visit_mask(), demand);
    let routing = routing_cost(tour, &instance.gamma);
    Ok(CostBreakdown { holding, stockout, routing, total: holding + stockout + routing })
}

/// Deterministic transition to the next state.
///
/// `next_context` is the feature vector of the period that enters the
/// look-ahead window (period `t + H`); pass `None` when the episode ends,
/// in which case the window shrinks (only terminal states do this).
pub fn transition<F: Scalar>(
    instance: &Instance<F>,
    state: &State<F>,
    tour: &Tour,
    demand: &[F],
    next_context: Option<&[F]>,
) -> Result<State<F>> {
    if !is_feasible(instance, state, tour) {
        return Err(Error::Infeasible {
            period: state.t,
            reason: "tour exceeds vehicle capacity".into(),
        });
    }
    if state.context_window.as_ref().is_some_and(|w| w.is_empty()) {
        return Err(Error::invalid(
            "context window exhausted: the state is past its supported horizon",
        ));
    }
    let mask = tour.visit_mask();
    let inventories = updated_inventories(instance, &state.inventories, mask, demand);
    // The feature vector of the period that just realized moves into the
    // history next to its demand column.
    let current_context: Option<Vec<F>> =
        state.context_window.as_ref().map(|w| w[0].clone());
    let history = state.history.shifted(demand, current_context.as_deref());
    let context_window = state.context_window.as_ref().map(|w| {
        let mut next: Vec<Vec<F>> = w[1..].to_vec();
        if let Some(col) = next_context {
            next.push(col.to_vec());
        }
        next
    });
    Ok(State { t: state.t + 1, inventories, history, context_window })
}

/// Anything that maps states to tours.
pub trait Policy<F: Scalar> {
    fn decide(&mut self, instance: &Instance<F>, state: &State<F>) -> Result<Tour>;
}

impl<F: Scalar, T> Policy<F> for T
where
    T: FnMut(&Instance<F>, &State<F>) -> Result<Tour>,
{
    fn decide(&mut self, instance: &Instance<F>, state: &State<F>) -> Result<Tour> {
        self(instance, state)
    }
}

/// One period of a realized trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep<F> {
    pub period: usize,
    /// The state the decision was taken in.
    pub state: State<F>,
    pub tour: Tour,
    pub demand: Vec<F>,
    /// Units delivered this period: `sum (C_i - I_i)` over visited customers.
    pub delivered: F,
    pub cost: CostBreakdown<F>,
}

/// A full rollout: per-period records plus the telescoped total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<F> {
    pub steps: Vec<TrajectoryStep<F>>,
    pub total: CostBreakdown<F>,
}

/// Roll a policy over the first `periods` periods of an episode.
pub fn rollout<F: Scalar, P: Policy<F> + ?Sized>(
    instance: &Instance<F>,
    policy: &mut P,
    episode: &Episode<F>,
    x0: &State<F>,
    periods: usize,
) -> Result<Trajectory<F>> {
    if episode.periods < periods {
        return Err(Error::invalid(format!(
            "episode has {} periods, rollout needs {periods}",
            episode.periods
        )));
    }
    if episode.n_customers() != instance.n {
        return Err(Error::invalid("episode does not match instance size"));
    }
    let lookahead = x0.context_window.as_ref().map_or(0, |w| w.len());
    let mut state = x0.clone();
    let mut steps = Vec::with_capacity(periods);
    let mut total = CostBreakdown::zero();
    for t in 0..periods {
        let tour = policy.decide(instance, &state)?;
        if !is_feasible(instance, &state, &tour) {
            return Err(Error::Infeasible {
                period: t,
                reason: format!(
                    "policy tour {:?} exceeds vehicle capacity {}",
                    tour.sequence(),
                    instance.vehicle_capacity
                ),
            });
        }
        let demand = episode.demand_at(t);
        let delivered = visit_load(instance, &state.inventories, tour.visit_mask());
        let cost = step_cost(instance, &state, &tour, &demand)?;
        total.accumulate(&cost);
        let next_context = if state.context_window.is_some() {
            let source = t + lookahead;
            if source < episode.periods {
                episode.context_at(source)
            } else {
                None
            }
        } else {
            None
        };
        let next = transition(instance, &state, &tour, &demand, next_context.as_deref())?;
        steps.push(TrajectoryStep { period: t, state, tour, demand, delivered, cost });
        state = next;
    }
    Ok(Trajectory { steps, total })
}

/// Relative performance gap against the anticipative baseline:
/// `(policy - baseline) / baseline`.
pub fn relative_gap<F: Scalar>(policy_cost: F, anticipative_cost: F) -> Result<F> {
    if anticipative_cost <= F::zero() {
        return Err(Error::invalid("anticipative baseline cost must be positive"));
    }
    Ok((policy_cost - anticipative_cost) / anticipative_cost)
}

/// Trajectory export: one CSV row per period.
pub fn write_trajectory_csv<F: Scalar, W: Write>(
    trajectory: &Trajectory<F>,
    writer: &mut W,
) -> std::io::Result<()> {
    writeln!(
        writer,
        "period,customer_visits,delivered_units_total,holding,stockout,routing,total"
    )?;
    for step in &trajectory.steps {
        writeln!(
            writer,
            "{},{},{},{},{},{},{}",
            step.period,
            step.tour.visit_mask(),
            step.delivered,
            step.cost.holding,
            step.cost.stockout,
            step.cost.routing,
            step.cost.total
        )?;
    }
    Ok(())
}
