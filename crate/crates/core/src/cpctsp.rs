//! Exact capacitated prize-collecting TSP oracle.
//!
//! The oracle maximizes `sum theta_i z_i - routing cost` over all
//! capacity-feasible customer subsets, each routed optimally. Routing
//! optima come from a Held-Karp dynamic program memoized per subset, so a
//! full oracle call on n customers costs one table fill plus an O(2^n)
//! scored enumeration, and repeated calls (the training loop issues
//! thousands) are almost free.
//!
//! A permutation-based reference solver lives in this module as well; the
//! test suites hold the oracle to exact agreement with it.

use std::io::Write;

use crate::mdp::Tour;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Hard guard for the bitmask dynamic program.
pub const MAX_CUSTOMERS: usize = 20;

const DEPOT_PARENT: u8 = u8::MAX;

/// Per-customer prizes (currency) steering the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct PrizeVector<F> {
    pub theta: Vec<F>,
}

impl<F: Scalar> PrizeVector<F> {
    pub fn new(theta: Vec<F>) -> Self {
        PrizeVector { theta }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

impl<F> From<Vec<F>> for PrizeVector<F> {
    fn from(theta: Vec<F>) -> Self {
        PrizeVector { theta }
    }
}

/// Routing cost of a tour: depot -> sequence -> depot, summed left to
/// right. The empty tour costs zero.
pub fn routing_cost<F: Scalar>(tour: &Tour, gamma: &[Vec<F>]) -> F {
    let seq = tour.sequence();
    if seq.is_empty() {
        return F::zero();
    }
    let mut cost = gamma[0][seq[0]];
    for w in seq.windows(2) {
        cost = cost + gamma[w[0]][w[1]];
    }
    cost + gamma[*seq.last().unwrap()][0]
}

struct PathEntry<F> {
    /// Minimal cost of a depot-rooted path through the mask ending at each
    /// customer (0-based); infinity outside the mask.
    cost: Vec<F>,
    /// Predecessor customer per end point, `DEPOT_PARENT` for the first hop.
    parent: Vec<u8>,
}

struct CachedTour<F> {
    cost: F,
    order: Vec<usize>,
}

/// Memoized Held-Karp tour costs for one travel-cost matrix.
///
/// Entries are filled lazily: querying a subset computes (and keeps) the
/// optimal paths for exactly the sub-subsets it needs, so the table never
/// does more work than one eager sweep and much less when only feasible
/// subsets are ever asked for.
pub struct TourCostCache<F> {
    n: usize,
    gamma: Vec<Vec<F>>,
    paths: Vec<Option<Box<PathEntry<F>>>>,
    tours: Vec<Option<Box<CachedTour<F>>>>,
}

impl<F: Scalar> TourCostCache<F> {
    /// Build an empty cache for the given `(n+1) x (n+1)` travel matrix.
    pub fn new(gamma: &[Vec<F>]) -> Result<Self> {
        if gamma.is_empty() || gamma.len() != gamma[0].len() {
            return Err(Error::invalid("travel matrix must be square and non-empty"));
        }
        let n = gamma.len() - 1;
        if n > MAX_CUSTOMERS {
            return Err(Error::Capability(format!(
                "Held-Karp guard: {n} customers exceeds the {MAX_CUSTOMERS}-customer limit"
            )));
        }
        Ok(TourCostCache {
            n,
            gamma: gamma.to_vec(),
            paths: (0..1usize << n).map(|_| None).collect(),
            tours: (0..1usize << n).map(|_| None).collect(),
        })
    }

    pub fn n_customers(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> &[Vec<F>] {
        &self.gamma
    }

    fn ensure_paths(&mut self, mask: u32) {
        if self.paths[mask as usize].is_some() {
            return;
        }
        let mut cost = vec![F::infinity(); self.n];
        let mut parent = vec![DEPOT_PARENT; self.n];
        if mask.count_ones() == 1 {
            let i = mask.trailing_zeros() as usize;
            cost[i] = self.gamma[0][i + 1];
        } else {
            // members ascending; ties resolved toward the smaller index
            for k in 0..self.n {
                if mask & (1 << k) == 0 {
                    continue;
                }
                let rest = mask & !(1u32 << k);
                self.ensure_paths(rest);
                let rest_entry = self.paths[rest as usize].as_ref().unwrap();
                let mut best = F::infinity();
                let mut best_m = DEPOT_PARENT;
                for m in 0..self.n {
                    if rest & (1 << m) == 0 {
                        continue;
                    }
                    let c = rest_entry.cost[m] + self.gamma[m + 1][k + 1];
                    if c < best {
                        best = c;
                        best_m = m as u8;
                    }
                }
                cost[k] = best;
                parent[k] = best_m;
            }
        }
        self.paths[mask as usize] = Some(Box::new(PathEntry { cost, parent }));
    }

    /// Optimal depot-rooted cycle through exactly the masked customers:
    /// `(cost, visiting order)` with 1-based customer indices. The empty
    /// mask yields `(0, [])`.
    pub fn tour(&mut self, mask: u32) -> (F, Vec<usize>) {
        if mask == 0 {
            return (F::zero(), Vec::new());
        }
        debug_assert!(mask < (1u32 << self.n));
        if let Some(cached) = &self.tours[mask as usize] {
            return (cached.cost, cached.order.clone());
        }
        self.ensure_paths(mask);
        let entry = self.paths[mask as usize].as_ref().unwrap();
        let mut best = F::infinity();
        let mut best_k = usize::MAX;
        for k in 0..self.n {
            if mask & (1 << k) == 0 {
                continue;
            }
            let c = entry.cost[k] + self.gamma[k + 1][0];
            if c < best {
                best = c;
                best_k = k;
            }
        }
        // walk parents back to the depot
        let mut order = Vec::with_capacity(mask.count_ones() as usize);
        let mut cursor_mask = mask;
        let mut cursor = best_k;
        loop {
            order.push(cursor + 1);
            let entry = self.paths[cursor_mask as usize].as_ref().unwrap();
            let p = entry.parent[cursor];
            cursor_mask &= !(1u32 << cursor);
            if p == DEPOT_PARENT {
                break;
            }
            cursor = p as usize;
        }
        order.reverse();
        debug_assert_eq!(cursor_mask, 0);
        debug_assert_eq!(
            best,
            routing_cost(&Tour::new(order.clone()).unwrap(), &self.gamma),
            "cached cost must equal the left-to-right fold along the stored order"
        );
        self.tours[mask as usize] = Some(Box::new(CachedTour { cost: best, order: order.clone() }));
        (best, order)
    }

    /// Debug dump of all cached `(subset, cost, order)` rows as CSV.
    pub fn dump_csv<W: Write>(&self, writer: &mut W) -> std::io::Result<()> {
        writeln!(writer, "subset,cost,order")?;
        for (mask, entry) in self.tours.iter().enumerate() {
            if let Some(t) = entry {
                let order: Vec<String> = t.order.iter().map(|i| i.to_string()).collect();
                writeln!(writer, "{},{},{}", mask, t.cost, order.join(" "))?;
            }
        }
        Ok(())
    }
}

/// One-shot Held-Karp solve for a customer subset given a travel matrix.
pub fn held_karp<F: Scalar>(subset: u32, gamma: &[Vec<F>]) -> Result<(F, Vec<usize>)> {
    let mut cache = TourCostCache::new(gamma)?;
    if subset >= (1u32 << cache.n) {
        return Err(Error::invalid("subset mask references unknown customers"));
    }
    Ok(cache.tour(subset))
}

/// Exact oracle: the capacity-feasible, optimally routed subset maximizing
/// prizes minus routing cost. Ties go to the higher objective, then fewer
/// customers, then the lexicographically smallest bitmask. Customers with
/// non-positive prizes are never part of an optimal solution under metric
/// costs and are pruned up front.
pub fn solve<F: Scalar>(
    prizes: &PrizeVector<F>,
    quantities: &[F],
    vehicle_capacity: F,
    cache: &mut TourCostCache<F>,
) -> Result<Tour> {
    solve_scored(prizes, quantities, vehicle_capacity, cache).map(|(tour, _)| tour)
}

/// Like [`solve`], additionally returning the objective value.
pub fn solve_scored<F: Scalar>(
    prizes: &PrizeVector<F>,
    quantities: &[F],
    vehicle_capacity: F,
    cache: &mut TourCostCache<F>,
) -> Result<(Tour, F)> {
    let n = cache.n;
    if prizes.len() != n || quantities.len() != n {
        return Err(Error::invalid("prizes and quantities must have one entry per customer"));
    }
    if quantities.iter().any(|q| *q < F::zero()) {
        return Err(Error::invalid("replenishment quantities must be non-negative"));
    }
    let candidates: Vec<usize> =
        (0..n).filter(|&i| prizes.theta[i] > F::zero()).collect();
    let k = candidates.len();

    // the empty tour (objective 0, zero load) is the initial incumbent
    let mut best_obj = F::zero();
    let mut best_mask = 0u32;
    let mut best_count = 0u32;
    for sub in 1u32..(1u32 << k) {
        let mut mask = 0u32;
        let mut load = F::zero();
        let mut prize_sum = F::zero();
        for (b, &i) in candidates.iter().enumerate() {
            if sub & (1 << b) != 0 {
                mask |= 1 << i;
                load = load + quantities[i];
                prize_sum = prize_sum + prizes.theta[i];
            }
        }
        if load > vehicle_capacity {
            continue;
        }
        let (cost, _) = cache.tour(mask);
        let obj = prize_sum - cost;
        let count = mask.count_ones();
        let better = obj > best_obj
            || (obj == best_obj
                && (count < best_count || (count == best_count && mask < best_mask)));
        if better {
            best_obj = obj;
            best_mask = mask;
            best_count = count;
        }
    }
    let (_, order) = cache.tour(best_mask);
    Ok((Tour::new(order).expect("cache orders are valid tours"), best_obj))
}

/// Prize vector that forces the oracle to visit exactly `target`: +M inside
/// the target, -M outside, with `M = n * max travel cost`.
pub fn prizes_for_target<F: Scalar>(target: u32, gamma: &[Vec<F>]) -> PrizeVector<F> {
    let n = gamma.len() - 1;
    let mut max_gamma = F::zero();
    for row in gamma {
        for &g in row {
            if g > max_gamma {
                max_gamma = g;
            }
        }
    }
    let m = F::from_count(n) * max_gamma;
    let theta = (0..n)
        .map(|i| if target & (1 << i) != 0 { m } else { -m })
        .collect();
    PrizeVector { theta }
}

/// Reference solvers: straight permutation search, no dynamic program, no
/// cache. Exponential and factorial, for cross-checks on small cases only.
pub mod reference {
    use super::*;

    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.is_empty() {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for (k, &item) in items.iter().enumerate() {
            let mut rest = items.to_vec();
            rest.remove(k);
            for mut tail in permutations(&rest) {
                tail.insert(0, item);
                out.push(tail);
            }
        }
        out
    }

    /// Cheapest cycle through exactly the masked customers by trying every
    /// visiting order.
    pub fn tour_cost<F: Scalar>(mask: u32, gamma: &[Vec<F>]) -> (F, Vec<usize>) {
        let n = gamma.len() - 1;
        let members: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| i + 1).collect();
        if members.is_empty() {
            return (F::zero(), Vec::new());
        }
        let mut best = F::infinity();
        let mut best_order = Vec::new();
        for order in permutations(&members) {
            let tour = Tour::new(order.clone()).unwrap();
            let cost = routing_cost(&tour, gamma);
            if cost < best {
                best = cost;
                best_order = order;
            }
        }
        (best, best_order)
    }

    /// Oracle objective by full enumeration: every subset, every visiting
    /// order, same tie-breaks as [`super::solve_scored`].
    pub fn solve_scored<F: Scalar>(
        prizes: &PrizeVector<F>,
        quantities: &[F],
        vehicle_capacity: F,
        gamma: &[Vec<F>],
    ) -> (u32, F) {
        let n = gamma.len() - 1;
        let mut best_obj = F::zero();
        let mut best_mask = 0u32;
        let mut best_count = 0u32;
        for mask in 0u32..(1u32 << n) {
            let mut load = F::zero();
            let mut prize_sum = F::zero();
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    load = load + quantities[i];
                    prize_sum = prize_sum + prizes.theta[i];
                }
            }
            if load > vehicle_capacity {
                continue;
            }
            let (cost, _) = tour_cost(mask, gamma);
            let obj = prize_sum - cost;
            let count = mask.count_ones();
            if obj > best_obj
                || (obj == best_obj
                    && (count < best_count || (count == best_count && mask < best_mask)))
            {
                best_obj = obj;
                best_mask = mask;
                best_count = count;
            }
        }
        (best_mask, best_obj)
    }
}
