//! The statistical prize model.
//!
//! Prizes are built from interpretable pieces: per-customer demand quantiles
//! over the rolling history, an optional contextual demand-estimation layer
//! (linear plus pairwise feature effects under a ReLU), and two parallel
//! layers that score projected holding and stock-out exposure over the
//! look-ahead horizon. The model is piecewise linear in its weights, and
//! [`prize_backward`] returns exact reverse-mode gradients (ReLU derivative
//! 0 at the kink).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cpctsp::PrizeVector;
use crate::instance::{pair_index, Instance};
use crate::mdp::State;
use crate::scalar::{pos, Scalar};
use crate::{Error, Result};

const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Quantile levels and look-ahead horizon of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig<F> {
    /// Strictly increasing levels in (0, 1).
    pub levels: Vec<F>,
    /// Number of look-ahead periods scored by the holding/stock-out layers.
    pub lookahead: usize,
}

impl<F: Scalar> QuantileConfig<F> {
    pub fn new(levels: Vec<F>, lookahead: usize) -> Result<Self> {
        let config = QuantileConfig { levels, lookahead };
        config.validate()?;
        Ok(config)
    }

    /// Five levels covering tails and center.
    pub fn default_levels(lookahead: usize) -> Self {
        QuantileConfig {
            levels: vec![F::c(0.1), F::c(0.25), F::c(0.5), F::c(0.75), F::c(0.9)],
            lookahead,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookahead == 0 {
            return Err(Error::invalid("look-ahead must cover at least one period"));
        }
        if self.levels.is_empty() {
            return Err(Error::invalid("at least one quantile level required"));
        }
        for w in self.levels.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid("quantile levels must be strictly increasing"));
            }
        }
        if self.levels[0] <= F::zero() || *self.levels.last().unwrap() >= F::one() {
            return Err(Error::invalid("quantile levels must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Learnable weights.
///
/// `w2` is a symmetric feature-interaction matrix with zero diagonal,
/// parameterized by its strict upper triangle so that symmetry survives
/// every update path by construction. `w3`/`w4` are `H x P` matrices
/// weighting the holding and stock-out exposure blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<F> {
    pub n_features: usize,
    pub w1: Vec<F>,
    pub w2_upper: Vec<F>,
    pub w3: Vec<Vec<F>>,
    pub w4: Vec<Vec<F>>,
}

impl<F: Scalar> ModelParams<F> {
    /// Untrained initialization: the feature block starts at zero, the
    /// holding block at `-1/(P*H)` and the stock-out block at `+1/(P*H)`,
    /// so initial prizes reward customers whose projected stock-outs exceed
    /// their inventory and penalize overstock. All-zero weights would
    /// freeze the oracle at the empty tour.
    pub fn init(n_features: usize, config: &QuantileConfig<F>) -> Self {
        let h = config.lookahead;
        let p = config.n_levels();
        let scale = F::one() / (F::from_count(p) * F::from_count(h));
        ModelParams {
            n_features,
            w1: vec![F::zero(); n_features],
            w2_upper: vec![F::zero(); n_features * n_features.saturating_sub(1) / 2],
            w3: vec![vec![-scale; p]; h],
            w4: vec![vec![scale; p]; h],
        }
    }

    pub fn lookahead(&self) -> usize {
        self.w3.len()
    }

    pub fn n_levels(&self) -> usize {
        self.w3.first().map_or(0, |row| row.len())
    }

    /// Entry `(a, b)` of the symmetric zero-diagonal interaction matrix.
    pub fn w2_at(&self, a: usize, b: usize) -> F {
        if a == b {
            return F::zero();
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.w2_upper[pair_index(lo, hi, self.n_features)]
    }

    pub fn matches(&self, config: &QuantileConfig<F>) -> bool {
        self.lookahead() == config.lookahead && self.n_levels() == config.n_levels()
    }

    /// Pack all independent parameters into one vector
    /// (order: w1, w2 upper triangle, w3 row-major, w4 row-major).
    pub fn flatten(&self) -> Vec<F> {
        let mut flat = Vec::with_capacity(self.n_params());
        flat.extend_from_slice(&self.w1);
        flat.extend_from_slice(&self.w2_upper);
        for row in &self.w3 {
            flat.extend_from_slice(row);
        }
        for row in &self.w4 {
            flat.extend_from_slice(row);
        }
        flat
    }

    pub fn unflatten(&self, flat: &[F]) -> ModelParams<F> {
        assert_eq!(flat.len(), self.n_params());
        let mut params = self.clone();
        let mut k = 0;
        for v in params.w1.iter_mut() {
            *v = flat[k];
            k += 1;
        }
        for v in params.w2_upper.iter_mut() {
            *v = flat[k];
            k += 1;
        }
        for row in params.w3.iter_mut().chain(params.w4.iter_mut()) {
            for v in row.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        params
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.w2_upper.len() + 2 * self.lookahead() * self.n_levels()
    }
}

/// Gradient record with the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad<F> {
    pub w1: Vec<F>,
    pub w2_upper: Vec<F>,
    pub w3: Vec<Vec<F>>,
    pub w4: Vec<Vec<F>>,
}

impl<F: Scalar> ParamGrad<F> {
    pub fn zeros_like(params: &ModelParams<F>) -> Self {
        ParamGrad {
            w1: vec![F::zero(); params.w1.len()],
            w2_upper: vec![F::zero(); params.w2_upper.len()],
            w3: vec![vec![F::zero(); params.n_levels()]; params.lookahead()],
            w4: vec![vec![F::zero(); params.n_levels()]; params.lookahead()],
        }
    }

    pub fn add_scaled(&mut self, other: &ParamGrad<F>, factor: F) {
        for (a, b) in self.w1.iter_mut().zip(&other.w1) {
            *a = *a + factor * *b;
        }
        for (a, b) in self.w2_upper.iter_mut().zip(&other.w2_upper) {
            *a = *a + factor * *b;
        }
        for (ra, rb) in self.w3.iter_mut().zip(&other.w3) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a = *a + factor * *b;
            }
        }
        for (ra, rb) in self.w4.iter_mut().zip(&other.w4) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a = *a + factor * *b;
            }
        }
    }

    /// Same packing order as [`ModelParams::flatten`].
    pub fn flatten(&self) -> Vec<F> {
        let mut flat = Vec::new();
        flat.extend_from_slice(&self.w1);
        flat.extend_from_slice(&self.w2_upper);
        for row in &self.w3 {
            flat.extend_from_slice(row);
        }
        for row in &self.w4 {
            flat.extend_from_slice(row);
        }
        flat
    }
}

/// Empirical quantile: the smallest observation whose empirical CDF value
/// reaches `p`.
pub fn empirical_quantile<F: Scalar>(history: &[F], p: F) -> Result<F> {
    if history.is_empty() {
        return Err(Error::invalid("empty history has no quantiles"));
    }
    if p <= F::zero() || p >= F::one() {
        return Err(Error::invalid("quantile level must lie in (0, 1)"));
    }
    let mut sorted = history.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("demand observations are finite"));
    let len = F::from_count(sorted.len());
    let rank = (p * len).ceil();
    let idx = rank.to_usize().unwrap_or(1).max(1) - 1;
    Ok(sorted[idx.min(sorted.len() - 1)])
}

/// The demand-estimation layer: `ReLU(q + w1' phi + phi' W2 phi)`, or
/// `ReLU(q)` when the model carries no feature block.
pub fn demand_estimate<F: Scalar>(
    q: F,
    features: Option<&[F]>,
    params: &ModelParams<F>,
) -> Result<F> {
    match features {
        None => {
            if params.n_features != 0 {
                return Err(Error::invalid("contextual model needs a feature vector"));
            }
            Ok(pos(q))
        }
        Some(phi) => {
            if phi.len() != params.n_features {
                return Err(Error::invalid(format!(
                    "expected {} features, got {}",
                    params.n_features,
                    phi.len()
                )));
            }
            Ok(pos(q + feature_effect(phi, params)))
        }
    }
}

/// `w1' phi + phi' W2 phi` with the symmetric zero-diagonal interaction
/// matrix expanded from its upper triangle.
fn feature_effect<F: Scalar>(phi: &[F], params: &ModelParams<F>) -> F {
    let mut value = F::zero();
    for (a, &x) in phi.iter().enumerate() {
        value = value + params.w1[a] * x;
    }
    let two = F::c(2.0);
    for a in 0..params.n_features {
        for b in (a + 1)..params.n_features {
            value = value + two * params.w2_upper[pair_index(a, b, params.n_features)] * phi[a] * phi[b];
        }
    }
    value
}

struct ForwardIntermediates<F> {
    /// `lin[t]`: feature effect per look-ahead period (empty when
    /// non-contextual).
    lin: Vec<F>,
    /// `quantiles[i][p]`.
    quantiles: Vec<Vec<F>>,
    theta: Vec<F>,
}

fn forward_pass<F: Scalar>(
    state: &State<F>,
    instance: &Instance<F>,
    params: &ModelParams<F>,
    config: &QuantileConfig<F>,
) -> Result<ForwardIntermediates<F>> {
    config.validate()?;
    if !params.matches(config) {
        return Err(Error::invalid("parameter shape does not match quantile config"));
    }
    let horizon = config.lookahead;
    let contextual = instance.is_contextual();
    if contextual && params.n_features == 0 {
        return Err(Error::invalid("contextual instance needs a model with a feature block"));
    }
    let lin: Vec<F> = if contextual {
        let window = state
            .context_window
            .as_ref()
            .ok_or_else(|| Error::invalid("contextual state without a context window"))?;
        if window.len() < horizon {
            return Err(Error::invalid(format!(
                "context window covers {} periods, look-ahead needs {horizon}",
                window.len()
            )));
        }
        window[..horizon].iter().map(|phi| feature_effect(phi, params)).collect()
    } else {
        Vec::new()
    };

    let n = instance.n;
    let p_count = config.n_levels();
    let mut quantiles = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for i in 0..n {
        let history = state.history.customer(i);
        let qs: Vec<F> = config
            .levels
            .iter()
            .map(|&p| empirical_quantile(history, p))
            .collect::<Result<_>>()?;
        let inv = state.inventories[i];
        let kappa = instance.holding_cost[i];
        let rho = instance.shortage_penalty;
        let mut phi2 = F::zero();
        let mut phi3 = F::zero();
        for p_ix in 0..p_count {
            let mut cum = F::zero();
            for h in 0..horizon {
                let pre = if contextual { qs[p_ix] + lin[h] } else { qs[p_ix] };
                cum = cum + pos(pre);
                phi2 = phi2 + params.w3[h][p_ix] * (pos(inv - cum) * kappa);
                phi3 = phi3 + params.w4[h][p_ix] * (pos(cum - inv) * kappa * rho);
            }
        }
        theta.push(phi2 + phi3);
        quantiles.push(qs);
    }
    Ok(ForwardIntermediates { lin, quantiles, theta })
}

/// Smallest absolute ReLU pre-activation across the whole forward pass.
/// Gradient checks use this to stay away from the kinks, where one-sided
/// derivatives make finite differences meaningless.
pub fn kink_margin<F: Scalar>(
    state: &State<F>,
    instance: &Instance<F>,
    params: &ModelParams<F>,
    config: &QuantileConfig<F>,
) -> Result<F> {
    let fwd = forward_pass(state, instance, params, config)?;
    let contextual = instance.is_contextual();
    let mut margin = F::infinity();
    for i in 0..instance.n {
        let inv = state.inventories[i];
        for (p_ix, _) in config.levels.iter().enumerate() {
            let q = fwd.quantiles[i][p_ix];
            let mut cum = F::zero();
            for h in 0..config.lookahead {
                let pre = if contextual { q + fwd.lin[h] } else { q };
                margin = margin.min(pre.abs());
                cum = cum + pos(pre);
                margin = margin.min((inv - cum).abs());
            }
        }
    }
    Ok(margin)
}

/// Prize vector for every customer in the given state.
pub fn prize_forward<F: Scalar>(
    state: &State<F>,
    instance: &Instance<F>,
    params: &ModelParams<F>,
    config: &QuantileConfig<F>,
) -> Result<PrizeVector<F>> {
    forward_pass(state, instance, params, config).map(|f| PrizeVector::new(f.theta))
}

/// Exact reverse-mode gradient of `sum_i theta_i * dtheta_i` with respect
/// to all parameters. The symmetric zero-diagonal structure of the
/// interaction matrix is preserved because only its upper triangle is a
/// parameter.
pub fn prize_backward<F: Scalar>(
    state: &State<F>,
    instance: &Instance<F>,
    params: &ModelParams<F>,
    config: &QuantileConfig<F>,
    dtheta: &[F],
) -> Result<ParamGrad<F>> {
    if dtheta.len() != instance.n {
        return Err(Error::invalid("dtheta must have one entry per customer"));
    }
    let fwd = forward_pass(state, instance, params, config)?;
    let horizon = config.lookahead;
    let p_count = config.n_levels();
    let contextual = instance.is_contextual();
    let mut grad = ParamGrad::zeros_like(params);
    // dlin[t] collects, over customers and levels, the sensitivity of the
    // objective to the feature effect of look-ahead period t.
    let mut dlin = vec![F::zero(); if contextual { horizon } else { 0 }];

    for i in 0..instance.n {
        let d = dtheta[i];
        if d == F::zero() {
            continue;
        }
        let inv = state.inventories[i];
        let kappa = instance.holding_cost[i];
        let rho = instance.shortage_penalty;
        for p_ix in 0..p_count {
            let q = fwd.quantiles[i][p_ix];
            // replay the cumulative projections of this (i, p) pair
            let mut cum = F::zero();
            let mut dcum = vec![F::zero(); horizon];
            let mut pre_active = vec![false; horizon];
            for h in 0..horizon {
                let pre = if contextual { q + fwd.lin[h] } else { q };
                pre_active[h] = pre > F::zero();
                cum = cum + pos(pre);
                let hold = pos(inv - cum);
                let short = pos(cum - inv);
                grad.w3[h][p_ix] = grad.w3[h][p_ix] + d * (hold * kappa);
                grad.w4[h][p_ix] = grad.w4[h][p_ix] + d * (short * kappa * rho);
                let mut dc = F::zero();
                if inv - cum > F::zero() {
                    dc = dc - params.w3[h][p_ix] * kappa;
                }
                if cum - inv > F::zero() {
                    dc = dc + params.w4[h][p_ix] * kappa * rho;
                }
                dcum[h] = d * dc;
            }
            if contextual {
                // cum_h contains the phi1 of every period <= h, so the
                // sensitivity of phi1 at period t is the suffix sum over h.
                let mut suffix = F::zero();
                for t in (0..horizon).rev() {
                    suffix = suffix + dcum[t];
                    if pre_active[t] {
                        dlin[t] = dlin[t] + suffix;
                    }
                }
            }
        }
    }

    if contextual {
        let window = state.context_window.as_ref().unwrap();
        let two = F::c(2.0);
        for (t, &dl) in dlin.iter().enumerate() {
            if dl == F::zero() {
                continue;
            }
            let phi = &window[t];
            for a in 0..params.n_features {
                grad.w1[a] = grad.w1[a] + dl * phi[a];
            }
            for a in 0..params.n_features {
                for b in (a + 1)..params.n_features {
                    let k = pair_index(a, b, params.n_features);
                    grad.w2_upper[k] = grad.w2_upper[k] + dl * two * phi[a] * phi[b];
                }
            }
        }
    }
    Ok(grad)
}

/// On-disk checkpoint: parameters plus the quantile configuration they
/// were trained for.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile<F> {
    schema_version: u32,
    w1: Vec<F>,
    w2_upper_triangle: Vec<F>,
    w3: Vec<Vec<F>>,
    w4: Vec<Vec<F>>,
    #[serde(rename = "P")]
    levels: Vec<F>,
    #[serde(rename = "H")]
    lookahead: usize,
}

pub fn save_checkpoint<F: Scalar>(
    params: &ModelParams<F>,
    config: &QuantileConfig<F>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let file = CheckpointFile {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        w1: params.w1.clone(),
        w2_upper_triangle: params.w2_upper.clone(),
        w3: params.w3.clone(),
        w4: params.w4.clone(),
        levels: config.levels.clone(),
        lookahead: config.lookahead,
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::invalid(format!("serialize checkpoint: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint<F: Scalar>(
    path: impl AsRef<Path>,
) -> Result<(ModelParams<F>, QuantileConfig<F>)> {
    let text = fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let file: CheckpointFile<F> =
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    if file.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::Schema {
            path: "schema_version".into(),
            message: format!("unsupported version {}", file.schema_version),
        });
    }
    let config = QuantileConfig::new(file.levels, file.lookahead)?;
    let n_features = file.w1.len();
    let params = ModelParams {
        n_features,
        w1: file.w1,
        w2_upper: file.w2_upper_triangle,
        w3: file.w3,
        w4: file.w4,
    };
    if !params.matches(&config) {
        return Err(Error::Schema {
            path: "w3".into(),
            message: "weight shapes disagree with P and H".into(),
        });
    }
    if params.w2_upper.len() != n_features * n_features.saturating_sub(1) / 2 {
        return Err(Error::Schema {
            path: "w2_upper_triangle".into(),
            message: "upper triangle length disagrees with w1".into(),
        });
    }
    Ok((params, config))
}
