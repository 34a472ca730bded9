//! Synthetic instance and episode generation.
//!
//! Instances follow the common single-vehicle IRP conventions: customers on
//! an integer grid, Euclidean travel costs, order-up-to replenishment,
//! per-customer holding costs and a shared shortage-penalty multiplier.
//! Four demand patterns are supported: truncated-normal, uniform, bimodal
//! (two-component truncated-normal mixture) and contextual (demand driven by
//! a shared 8-feature stream through linear and pairwise effects).
//!
//! Everything is a pure function of `(inputs, seed)`; see [`crate::rng`].
//!
//! # File formats
//!
//! One JSON document per instance:
//! `{id, n, coords, gamma, C, I0, kappa, rho, B, demand_spec, context_spec?}`
//! and one per episode: `{T, demand, context?}` where `demand` is an `n x T`
//! matrix (row per customer) and `context` an `8 x T` matrix (row per
//! feature). Unknown fields are rejected. Demand histories use the episode
//! format with `T = window length`, stored oldest-first.

use std::fs;
use std::path::Path;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::rng::{stream, StreamId};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Number of contextual features per period.
pub const N_FEATURES: usize = 8;

/// Standard deviation of the truncated-normal feature distribution before
/// scaling (support [-1, 1]).
const FEATURE_TRUNCNORM_SIGMA: f64 = 0.5;

/// Attempts before a rejection sampler gives up and clamps.
const MAX_REJECTIONS: usize = 10_000;

/// Demand pattern selector for instance generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandPattern {
    Normal,
    Uniform,
    Bimodal,
    Contextual,
}

impl DemandPattern {
    pub const ALL: [DemandPattern; 4] = [
        DemandPattern::Normal,
        DemandPattern::Uniform,
        DemandPattern::Bimodal,
        DemandPattern::Contextual,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(DemandPattern::Normal),
            "uniform" => Ok(DemandPattern::Uniform),
            "bimodal" => Ok(DemandPattern::Bimodal),
            "contextual" => Ok(DemandPattern::Contextual),
            other => Err(Error::invalid(format!("unknown demand pattern `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DemandPattern::Normal => "normal",
            DemandPattern::Uniform => "uniform",
            DemandPattern::Bimodal => "bimodal",
            DemandPattern::Contextual => "contextual",
        }
    }

    fn tag(self) -> u64 {
        match self {
            DemandPattern::Normal => 1,
            DemandPattern::Uniform => 2,
            DemandPattern::Bimodal => 3,
            DemandPattern::Contextual => 4,
        }
    }
}

/// Shortage-penalty level: low maps to rho = 200, high to rho = 400.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    Low,
    High,
}

impl Penalty {
    pub fn rho<F: Scalar>(self) -> F {
        match self {
            Penalty::Low => F::c(200.0),
            Penalty::High => F::c(400.0),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Penalty::Low),
            "high" => Ok(Penalty::High),
            other => Err(Error::invalid(format!("unknown penalty level `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Penalty::Low => "low",
            Penalty::High => "high",
        }
    }
}

/// Per-customer demand law.
///
/// Normal and bimodal draws are truncated to `[0, C_i]`, contextual draws
/// are clamped to the same range, and uniform draws live on `[0, C_i/2]`
/// by construction (`upper = C_i/2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSpec<F> {
    Normal { mu: F, sigma: F },
    Uniform { upper: F },
    Bimodal { mu1: F, sigma1: F, mu2: F, sigma2: F, mix: F },
    Contextual { mu: F, noise_sigma: F },
}

impl<F: Scalar> DemandSpec<F> {
    pub fn is_contextual(&self) -> bool {
        matches!(self, DemandSpec::Contextual { .. })
    }

    /// Rough mean of the law: `mu` for single-mode laws, the mid-point of
    /// the two modes for the bimodal mixture, `upper/2` for the uniform
    /// law (whose sizing proxy is the drawn mean, recoverable as `C - I0`).
    pub fn mean_proxy(&self) -> F {
        match *self {
            DemandSpec::Normal { mu, .. } | DemandSpec::Contextual { mu, .. } => mu,
            DemandSpec::Uniform { upper } => upper / F::c(2.0),
            DemandSpec::Bimodal { mu1, mu2, .. } => (mu1 + mu2) / F::c(2.0),
        }
    }
}

/// Distribution family of one contextual feature (support [-1, 1] before
/// scaling).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureDist {
    Arcsin,
    Uniform,
    TruncNormal,
}

/// Shared contextual-demand structure of an instance.
///
/// `alpha_pair` stores the strict upper triangle of the symmetric pairwise
/// coefficient matrix, row-major over pairs `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSpec<F> {
    pub n_features: usize,
    pub informative: Vec<bool>,
    pub feature_dist: Vec<FeatureDist>,
    pub scale: Vec<F>,
    pub alpha_lin: Vec<F>,
    pub alpha_pair: Vec<F>,
}

/// Index of pair `(a, b)`, `a < b`, in a strict-upper-triangle layout over
/// `d` items.
pub fn pair_index(a: usize, b: usize, d: usize) -> usize {
    debug_assert!(a < b && b < d);
    a * d - a * (a + 1) / 2 + (b - a - 1)
}

impl<F: Scalar> ContextSpec<F> {
    pub fn n_pairs(&self) -> usize {
        self.n_features * (self.n_features - 1) / 2
    }

    pub fn alpha_pair_at(&self, a: usize, b: usize) -> F {
        if a == b {
            return F::zero();
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.alpha_pair[pair_index(lo, hi, self.n_features)]
    }

    fn validate(&self) -> Result<()> {
        let d = self.n_features;
        if self.informative.len() != d
            || self.feature_dist.len() != d
            || self.scale.len() != d
            || self.alpha_lin.len() != d
        {
            return Err(Error::Schema {
                path: "context_spec".into(),
                message: "per-feature arrays must have length n_features".into(),
            });
        }
        if self.alpha_pair.len() != d * (d - 1) / 2 {
            return Err(Error::Schema {
                path: "context_spec.alpha_pair".into(),
                message: format!("expected {} entries", d * (d - 1) / 2),
            });
        }
        Ok(())
    }
}

/// Static problem data for one DSIRP instance.
///
/// Vertex 0 is the depot; customers are 1..=n. `gamma` is the symmetric
/// Euclidean travel-cost matrix over all n+1 vertices. Per-customer vectors
/// (`C`, `I0`, `kappa`, `demand_spec`) are indexed 0..n, i.e. entry `i`
/// belongs to customer `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance<F> {
    pub id: String,
    pub n: usize,
    pub coords: Vec<[i64; 2]>,
    pub gamma: Vec<Vec<F>>,
    #[serde(rename = "C")]
    pub capacity: Vec<F>,
    #[serde(rename = "I0")]
    pub initial_inventory: Vec<F>,
    #[serde(rename = "kappa")]
    pub holding_cost: Vec<F>,
    #[serde(rename = "rho")]
    pub shortage_penalty: F,
    #[serde(rename = "B")]
    pub vehicle_capacity: F,
    pub demand_spec: Vec<DemandSpec<F>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_spec: Option<ContextSpec<F>>,
}

impl<F: Scalar> Instance<F> {
    pub fn is_contextual(&self) -> bool {
        self.context_spec.is_some()
    }

    /// Travel cost between vertices `i` and `j` (0 = depot).
    pub fn travel(&self, i: usize, j: usize) -> F {
        self.gamma[i][j]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid(format!("serialize instance: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let inst: Instance<F> = from_json(&text)?;
        inst.validate()?;
        Ok(inst)
    }

    /// Structural invariants beyond what the schema can express.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let schema = |path: &str, message: String| Error::Schema { path: path.into(), message };
        if n < 1 {
            return Err(schema("n", "at least one customer required".into()));
        }
        if self.coords.len() != n + 1 {
            return Err(schema("coords", format!("expected {} vertices", n + 1)));
        }
        if self.gamma.len() != n + 1 || self.gamma.iter().any(|row| row.len() != n + 1) {
            return Err(schema("gamma", format!("expected {0} x {0} matrix", n + 1)));
        }
        for (name, len) in [
            ("C", self.capacity.len()),
            ("I0", self.initial_inventory.len()),
            ("kappa", self.holding_cost.len()),
            ("demand_spec", self.demand_spec.len()),
        ] {
            if len != n {
                return Err(schema(name, format!("expected {n} customer entries")));
            }
        }
        for i in 0..=n {
            if self.gamma[i][i] != F::zero() {
                return Err(schema("gamma", format!("non-zero diagonal at {i}")));
            }
            for j in 0..=n {
                if self.gamma[i][j] < F::zero() || self.gamma[i][j] != self.gamma[j][i] {
                    return Err(schema("gamma", format!("asymmetry or negative cost at ({i},{j})")));
                }
            }
        }
        for i in 0..n {
            if self.initial_inventory[i] < F::zero() || self.initial_inventory[i] > self.capacity[i]
            {
                return Err(schema("I0", format!("customer {i} outside [0, C]")));
            }
        }
        if let Some(ctx) = &self.context_spec {
            ctx.validate()?;
            if self.demand_spec.iter().any(|s| !s.is_contextual()) {
                return Err(schema("demand_spec", "contextual instance mixes non-contextual laws".into()));
            }
        } else if self.demand_spec.iter().any(|s| s.is_contextual()) {
            return Err(schema("context_spec", "contextual demand law without context_spec".into()));
        }
        Ok(())
    }
}

/// One exogenous noise realization: demands (and features) over a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Episode<F> {
    #[serde(rename = "T")]
    pub periods: usize,
    /// `n x T`, row per customer.
    pub demand: Vec<Vec<F>>,
    /// `8 x T`, row per feature; present iff the instance is contextual.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<Vec<Vec<F>>>,
}

impl<F: Scalar> Episode<F> {
    pub fn n_customers(&self) -> usize {
        self.demand.len()
    }

    /// Demand column for period `t`.
    pub fn demand_at(&self, t: usize) -> Vec<F> {
        self.demand.iter().map(|row| row[t]).collect()
    }

    /// Feature column for period `t`, if the episode carries context.
    pub fn context_at(&self, t: usize) -> Option<Vec<F>> {
        self.context
            .as_ref()
            .map(|rows| rows.iter().map(|row| row[t]).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string(self)
            .map_err(|e| Error::invalid(format!("serialize episode: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let ep: Episode<F> = from_json(&text)?;
        ep.validate()?;
        Ok(ep)
    }

    pub fn validate(&self) -> Result<()> {
        if self.demand.iter().any(|row| row.len() != self.periods) {
            return Err(Error::Schema {
                path: "demand".into(),
                message: format!("every customer row must have T = {} entries", self.periods),
            });
        }
        if let Some(ctx) = &self.context {
            if ctx.len() != N_FEATURES || ctx.iter().any(|row| row.len() != self.periods) {
                return Err(Error::Schema {
                    path: "context".into(),
                    message: format!("expected {N_FEATURES} x {} matrix", self.periods),
                });
            }
        }
        Ok(())
    }
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Tunables the underlying references leave open.
#[derive(Debug, Clone)]
pub struct GenOptions<F> {
    /// Probability of the first bimodal component.
    pub bimodal_mix: F,
}

impl<F: Scalar> Default for GenOptions<F> {
    fn default() -> Self {
        GenOptions { bimodal_mix: F::c(0.5) }
    }
}

/// Generate one instance; a deterministic function of all four arguments.
///
/// Coordinates are integer points drawn uniformly on `[0, 500]^2`; travel
/// costs are their Euclidean distances. Capacities are `mean-proxy x m`
/// with `m` in {2, 3, 4}, initial inventories `C_i - proxy_i`, holding
/// costs uniform on [0.02, 0.10], and the vehicle capacity is 1.5 times the
/// summed mean proxies.
pub fn generate_instance<F: Scalar>(
    pattern: DemandPattern,
    n: usize,
    penalty: Penalty,
    seed: u64,
) -> Result<Instance<F>> {
    generate_instance_with(pattern, n, penalty, seed, &GenOptions::default())
}

pub fn generate_instance_with<F: Scalar>(
    pattern: DemandPattern,
    n: usize,
    penalty: Penalty,
    seed: u64,
    opts: &GenOptions<F>,
) -> Result<Instance<F>> {
    if n < 2 {
        return Err(Error::invalid("instance needs at least 2 customers"));
    }
    let penalty_tag = match penalty {
        Penalty::Low => 0,
        Penalty::High => 1,
    };
    let mut rng = stream(seed, StreamId::Instance, &[pattern.tag(), n as u64, penalty_tag]);

    // Draw order: coordinates, per-customer demand laws, capacities/costs,
    // then the shared context structure. Do not reorder: files regenerated
    // from a manifest must be bit-identical.
    let coords: Vec<[i64; 2]> = (0..=n)
        .map(|_| [rng.random_range(0..=500), rng.random_range(0..=500)])
        .collect();
    let mut gamma = vec![vec![F::zero(); n + 1]; n + 1];
    for i in 0..=n {
        for j in (i + 1)..=n {
            let dx = F::from_i64(coords[i][0] - coords[j][0]).unwrap();
            let dy = F::from_i64(coords[i][1] - coords[j][1]).unwrap();
            let d = (dx * dx + dy * dy).sqrt();
            gamma[i][j] = d;
            gamma[j][i] = d;
        }
    }

    // Each customer's mean proxy drives its capacity, initial inventory and
    // share of the vehicle capacity: the drawn mean for single-mode laws,
    // the mid-point of the two modes for the bimodal mixture.
    enum Law<F> {
        Normal { mu: F, sigma: F },
        Uniform { mu: F },
        Bimodal { mu1: F, sigma1: F, mu2: F, sigma2: F },
        Contextual { mu: F, noise_sigma: F },
    }
    let mut laws: Vec<Law<F>> = Vec::with_capacity(n);
    let mut proxies: Vec<F> = Vec::with_capacity(n);
    for _ in 0..n {
        let law = match pattern {
            DemandPattern::Normal => Law::Normal {
                mu: F::from_count(rng.random_range(10..=100u64) as usize),
                sigma: F::from_count(rng.random_range(2..=10u64) as usize),
            },
            DemandPattern::Uniform => {
                Law::Uniform { mu: F::from_count(rng.random_range(10..=100u64) as usize) }
            }
            DemandPattern::Bimodal => {
                let delta = rng.random_range(4..=20u64);
                let mu1 = rng.random_range(10..=(50 - delta));
                let mut mu2 = rng.random_range((50 - delta)..=100);
                if mu2 <= mu1 {
                    // only possible when both draws hit 50 - delta
                    mu2 = mu1 + 1;
                }
                Law::Bimodal {
                    mu1: F::from_count(mu1 as usize),
                    sigma1: F::from_count(rng.random_range(2..=10u64) as usize),
                    mu2: F::from_count(mu2 as usize),
                    sigma2: F::from_count(rng.random_range(2..=10u64) as usize),
                }
            }
            DemandPattern::Contextual => Law::Contextual {
                mu: F::from_count(rng.random_range(10..=100u64) as usize),
                noise_sigma: F::from_count(rng.random_range(2..=10u64) as usize),
            },
        };
        proxies.push(match &law {
            Law::Normal { mu, .. } | Law::Uniform { mu } | Law::Contextual { mu, .. } => *mu,
            Law::Bimodal { mu1, mu2, .. } => (*mu1 + *mu2) / F::c(2.0),
        });
        laws.push(law);
    }

    let mut capacity = Vec::with_capacity(n);
    let mut initial_inventory = Vec::with_capacity(n);
    let mut holding_cost = Vec::with_capacity(n);
    let mut demand_spec = Vec::with_capacity(n);
    for (law, &proxy) in laws.iter().zip(&proxies) {
        let mult = F::from_count(rng.random_range(2..=4u64) as usize);
        let cap = proxy * mult;
        capacity.push(cap);
        initial_inventory.push(cap - proxy);
        holding_cost.push(F::uniform(&mut rng, F::c(0.02), F::c(0.10)));
        demand_spec.push(match *law {
            Law::Normal { mu, sigma } => DemandSpec::Normal { mu, sigma },
            Law::Uniform { .. } => DemandSpec::Uniform { upper: cap / F::c(2.0) },
            Law::Bimodal { mu1, sigma1, mu2, sigma2 } => {
                DemandSpec::Bimodal { mu1, sigma1, mu2, sigma2, mix: opts.bimodal_mix }
            }
            Law::Contextual { mu, noise_sigma } => DemandSpec::Contextual { mu, noise_sigma },
        });
    }
    let total_proxy = proxies.iter().fold(F::zero(), |a, &b| a + b);
    let vehicle_capacity = F::c(1.5) * total_proxy;

    let context_spec = if pattern == DemandPattern::Contextual {
        let k = rng.random_range(2..=6u64) as usize;
        // choose k informative feature indices by partial Fisher-Yates
        let mut idx: Vec<usize> = (0..N_FEATURES).collect();
        for i in 0..k {
            let j = rng.random_range(i..N_FEATURES);
            idx.swap(i, j);
        }
        let mut informative = vec![false; N_FEATURES];
        for &f in &idx[..k] {
            informative[f] = true;
        }
        let feature_dist: Vec<FeatureDist> = (0..N_FEATURES)
            .map(|_| match rng.random_range(0..3u32) {
                0 => FeatureDist::Arcsin,
                1 => FeatureDist::Uniform,
                _ => FeatureDist::TruncNormal,
            })
            .collect();
        let scale: Vec<F> = (0..N_FEATURES)
            .map(|_| F::from_count(rng.random_range(10..=100u64) as usize).sqrt())
            .collect();
        let alpha_lin: Vec<F> = informative
            .iter()
            .map(|&inf| {
                let draw = F::uniform(&mut rng, -F::one(), F::one());
                if inf {
                    draw
                } else {
                    F::zero()
                }
            })
            .collect();
        let mut alpha_pair = Vec::with_capacity(N_FEATURES * (N_FEATURES - 1) / 2);
        for a in 0..N_FEATURES {
            for b in (a + 1)..N_FEATURES {
                let draw = F::uniform(&mut rng, -F::one(), F::one());
                let keep = rng.random_range(0..2u32) == 0;
                // a pair only acts when both features act and the coin keeps it
                if informative[a] && informative[b] && keep {
                    alpha_pair.push(draw);
                } else {
                    alpha_pair.push(F::zero());
                }
            }
        }
        Some(ContextSpec {
            n_features: N_FEATURES,
            informative,
            feature_dist,
            scale,
            alpha_lin,
            alpha_pair,
        })
    } else {
        None
    };

    let inst = Instance {
        id: format!("{}-{}-n{}-s{}", pattern.name(), penalty.name(), n, seed),
        n,
        coords,
        gamma,
        capacity,
        initial_inventory,
        holding_cost,
        shortage_penalty: penalty.rho(),
        vehicle_capacity,
        demand_spec,
        context_spec,
    };
    debug_assert!(inst.validate().is_ok());
    Ok(inst)
}

/// Normal draw truncated to `[lo, hi]` by rejection.
fn trunc_normal<F: Scalar, R: Rng + ?Sized>(rng: &mut R, mu: F, sigma: F, lo: F, hi: F) -> F {
    for _ in 0..MAX_REJECTIONS {
        let x = mu + sigma * F::standard_normal(rng);
        if x >= lo && x <= hi {
            return x;
        }
    }
    // Degenerate parametrizations only; keep the draw in range.
    mu.max(lo).min(hi)
}

/// One demand draw. `cap` is the customer's inventory capacity `C_i`;
/// `features` must be present iff the law is contextual.
pub fn sample_demand<F: Scalar, R: Rng + ?Sized>(
    spec: &DemandSpec<F>,
    cap: F,
    features: Option<&[F]>,
    ctx: Option<&ContextSpec<F>>,
    rng: &mut R,
) -> Result<F> {
    match *spec {
        DemandSpec::Normal { mu, sigma } => Ok(trunc_normal(rng, mu, sigma, F::zero(), cap)),
        DemandSpec::Uniform { upper } => Ok(F::uniform(rng, F::zero(), upper)),
        DemandSpec::Bimodal { mu1, sigma1, mu2, sigma2, mix } => {
            let first = F::uniform(rng, F::zero(), F::one()) < mix;
            let (mu, sigma) = if first { (mu1, sigma1) } else { (mu2, sigma2) };
            Ok(trunc_normal(rng, mu, sigma, F::zero(), cap))
        }
        DemandSpec::Contextual { mu, noise_sigma } => {
            let (features, ctx) = match (features, ctx) {
                (Some(f), Some(c)) => (f, c),
                _ => {
                    return Err(Error::invalid(
                        "contextual demand law requires features and a context spec",
                    ))
                }
            };
            if features.len() != ctx.n_features {
                return Err(Error::invalid(format!(
                    "expected {} features, got {}",
                    ctx.n_features,
                    features.len()
                )));
            }
            let mut value = mu;
            for (a, &lambda) in features.iter().enumerate() {
                value = value + ctx.alpha_lin[a] * lambda;
            }
            for a in 0..ctx.n_features {
                for b in (a + 1)..ctx.n_features {
                    value = value + ctx.alpha_pair_at(a, b) * features[a] * features[b];
                }
            }
            value = value + noise_sigma * F::standard_normal(rng);
            Ok(value.max(F::zero()).min(cap))
        }
    }
}

/// One shared feature vector (already scaled).
pub fn sample_context_features<F: Scalar, R: Rng + ?Sized>(
    ctx: &ContextSpec<F>,
    rng: &mut R,
) -> Vec<F> {
    (0..ctx.n_features)
        .map(|f| {
            let raw = match ctx.feature_dist[f] {
                FeatureDist::Arcsin => {
                    let u = F::uniform(rng, F::zero(), F::one());
                    (F::c(std::f64::consts::PI) * (u - F::c(0.5))).sin()
                }
                FeatureDist::Uniform => F::uniform(rng, -F::one(), F::one()),
                FeatureDist::TruncNormal => trunc_normal(
                    rng,
                    F::zero(),
                    F::c(FEATURE_TRUNCNORM_SIGMA),
                    -F::one(),
                    F::one(),
                ),
            };
            ctx.scale[f] * raw
        })
        .collect()
}

fn sample_periods<F: Scalar>(
    instance: &Instance<F>,
    periods: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Episode<F>> {
    let n = instance.n;
    let mut demand = vec![vec![F::zero(); periods]; n];
    let mut context = instance
        .context_spec
        .as_ref()
        .map(|_| vec![vec![F::zero(); periods]; N_FEATURES]);
    for t in 0..periods {
        let features = instance
            .context_spec
            .as_ref()
            .map(|ctx| sample_context_features(ctx, rng));
        if let (Some(rows), Some(f)) = (context.as_mut(), features.as_ref()) {
            for (row, &value) in rows.iter_mut().zip(f.iter()) {
                row[t] = value;
            }
        }
        for i in 0..n {
            demand[i][t] = sample_demand(
                &instance.demand_spec[i],
                instance.capacity[i],
                features.as_deref(),
                instance.context_spec.as_ref(),
                rng,
            )?;
        }
    }
    Ok(Episode { periods, demand, context })
}

/// Sample an episode of `periods` i.i.d. periods from the instance's demand
/// laws. For contextual instances one shared feature vector is drawn per
/// period and the demands are computed from it.
pub fn sample_episode<F: Scalar>(
    instance: &Instance<F>,
    periods: usize,
    seed: u64,
) -> Result<Episode<F>> {
    if periods == 0 {
        return Err(Error::invalid("episode needs at least one period"));
    }
    let mut rng = stream(seed, StreamId::Episode, &[]);
    sample_periods(instance, periods, &mut rng)
}

/// Sample a demand history (same law as [`sample_episode`], different
/// stream), stored oldest-first.
pub fn sample_history<F: Scalar>(
    instance: &Instance<F>,
    len: usize,
    seed: u64,
) -> Result<Episode<F>> {
    if len == 0 {
        return Err(Error::invalid("history needs at least one observation"));
    }
    let mut rng = stream(seed, StreamId::History, &[]);
    sample_periods(instance, len, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(pattern: DemandPattern) -> Instance<f64> {
        generate_instance(pattern, 4, Penalty::Low, 17).unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        for pattern in DemandPattern::ALL {
            let a = inst(pattern);
            let b = inst(pattern);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn penalty_maps_to_rho() {
        let low: Instance<f64> = generate_instance(DemandPattern::Normal, 3, Penalty::Low, 5).unwrap();
        let high: Instance<f64> = generate_instance(DemandPattern::Normal, 3, Penalty::High, 5).unwrap();
        assert_eq!(low.shortage_penalty, 200.0);
        assert_eq!(high.shortage_penalty, 400.0);
    }

    #[test]
    fn structural_invariants_hold() {
        for pattern in DemandPattern::ALL {
            let instance = inst(pattern);
            instance.validate().unwrap();
            // initial inventory encodes the sizing proxy: I0 = C - proxy
            let proxies: Vec<f64> = (0..instance.n)
                .map(|i| instance.capacity[i] - instance.initial_inventory[i])
                .collect();
            let total: f64 = proxies.iter().sum();
            assert!((instance.vehicle_capacity - 1.5 * total).abs() < 1e-9);
            for i in 0..instance.n {
                let m = instance.capacity[i] / proxies[i];
                assert!((m - m.round()).abs() < 1e-9 && (2.0..=4.0).contains(&m));
                assert!((0.02..=0.10).contains(&instance.holding_cost[i]));
                match &instance.demand_spec[i] {
                    DemandSpec::Uniform { upper } => {
                        assert!((upper - instance.capacity[i] / 2.0).abs() < 1e-9);
                    }
                    spec => assert!((spec.mean_proxy() - proxies[i]).abs() < 1e-9),
                }
            }
        }
    }

    #[test]
    fn bimodal_modes_are_ordered() {
        for seed in 0..50 {
            let instance: Instance<f64> =
                generate_instance(DemandPattern::Bimodal, 5, Penalty::High, seed).unwrap();
            for spec in &instance.demand_spec {
                match spec {
                    DemandSpec::Bimodal { mu1, mu2, sigma1, sigma2, mix } => {
                        assert!(mu1 < mu2);
                        assert!(*sigma1 > 0.0 && *sigma2 > 0.0);
                        assert!(*mix > 0.0 && *mix < 1.0);
                    }
                    other => panic!("expected bimodal law, got {other:?}"),
                }
            }
        }
    }

    #[test]
    fn gamma_matches_euclidean_distances() {
        let instance = inst(DemandPattern::Uniform);
        for i in 0..=instance.n {
            assert_eq!(instance.gamma[i][i], 0.0);
            for j in 0..=instance.n {
                let dx = (instance.coords[i][0] - instance.coords[j][0]) as f64;
                let dy = (instance.coords[i][1] - instance.coords[j][1]) as f64;
                assert_eq!(instance.gamma[i][j], (dx * dx + dy * dy).sqrt());
                assert_eq!(instance.gamma[i][j], instance.gamma[j][i]);
            }
        }
    }

    #[test]
    fn uniform_demands_stay_below_half_capacity() {
        let instance = inst(DemandPattern::Uniform);
        let ep = sample_episode(&instance, 200, 3).unwrap();
        for i in 0..instance.n {
            for t in 0..200 {
                assert!(ep.demand[i][t] <= instance.capacity[i] / 2.0);
            }
        }
    }

    #[test]
    fn contextual_demand_is_clamped() {
        // All alphas zero and no noise: demand equals mu exactly.
        let ctx = ContextSpec {
            n_features: N_FEATURES,
            informative: vec![false; N_FEATURES],
            feature_dist: vec![FeatureDist::Uniform; N_FEATURES],
            scale: vec![1.0; N_FEATURES],
            alpha_lin: vec![0.0; N_FEATURES],
            alpha_pair: vec![0.0; N_FEATURES * (N_FEATURES - 1) / 2],
        };
        let spec = DemandSpec::Contextual { mu: 50.0, noise_sigma: 0.0 };
        let mut rng = stream(1, StreamId::Episode, &[]);
        let feats = vec![0.3; N_FEATURES];
        let d = sample_demand(&spec, 100.0, Some(&feats), Some(&ctx), &mut rng).unwrap();
        assert_eq!(d, 50.0);

        // Strong negative linear effect drives the value to the lower clamp.
        let mut ctx2 = ctx.clone();
        ctx2.alpha_lin = vec![-1.0; N_FEATURES];
        let feats2 = vec![10.0; N_FEATURES];
        let d2 = sample_demand(&spec, 100.0, Some(&feats2), Some(&ctx2), &mut rng).unwrap();
        assert_eq!(d2, 0.0);

        // With pair coefficients zeroed and no noise, demand is affine in
        // the features before clamping: recompute it exactly.
        let mut ctx3 = ctx.clone();
        ctx3.alpha_lin = (0..N_FEATURES).map(|a| 0.1 * (a as f64 + 1.0) - 0.45).collect();
        let feats3: Vec<f64> = (0..N_FEATURES).map(|a| 3.0 - a as f64).collect();
        let expected: f64 =
            50.0 + ctx3.alpha_lin.iter().zip(&feats3).map(|(a, l)| a * l).sum::<f64>();
        let d3 = sample_demand(&spec, 100.0, Some(&feats3), Some(&ctx3), &mut rng).unwrap();
        assert!((d3 - expected.clamp(0.0, 100.0)).abs() < 1e-12);
    }

    #[test]
    fn contextual_requires_features() {
        let spec: DemandSpec<f64> = DemandSpec::Contextual { mu: 10.0, noise_sigma: 1.0 };
        let mut rng = stream(1, StreamId::Episode, &[]);
        assert!(matches!(
            sample_demand(&spec, 20.0, None, None, &mut rng),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn episode_shapes_and_determinism() {
        let instance = inst(DemandPattern::Contextual);
        assert!(sample_episode(&instance, 0, 9).is_err());
        let one = sample_episode(&instance, 1, 9).unwrap();
        assert_eq!(one.periods, 1);
        assert!(one.demand.iter().all(|row| row.len() == 1));
        let a = sample_episode(&instance, 6, 9).unwrap();
        let b = sample_episode(&instance, 6, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.context.as_ref().unwrap().len(), N_FEATURES);
    }

    #[test]
    fn history_lengths() {
        let instance = inst(DemandPattern::Normal);
        let h = sample_history(&instance, 50, 4).unwrap();
        assert_eq!(h.periods, 50);
        assert!(h.demand.iter().all(|row| row.len() == 50));
        let h1 = sample_history(&instance, 1, 4).unwrap();
        assert_eq!(h1.periods, 1);
    }

    #[test]
    fn distinct_seeds_give_distinct_histories() {
        let instance = inst(DemandPattern::Normal);
        let mut collisions = 0;
        for s in 0..100u64 {
            let a = sample_history(&instance, 50, 2 * s).unwrap();
            let b = sample_history(&instance, 50, 2 * s + 1).unwrap();
            if a == b {
                collisions += 1;
            }
        }
        assert_eq!(collisions, 0);
    }

    #[test]
    fn instance_roundtrip() {
        let dir = std::env::temp_dir().join("dsirp_instance_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        for pattern in DemandPattern::ALL {
            let instance = inst(pattern);
            let path = dir.join(format!("{}.json", pattern.name()));
            instance.save(&path).unwrap();
            let loaded = Instance::<f64>::load(&path).unwrap();
            assert_eq!(instance, loaded);
        }
    }

    #[test]
    fn episode_roundtrip_and_schema_errors() {
        let dir = std::env::temp_dir().join("dsirp_episode_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let instance = inst(DemandPattern::Bimodal);
        let ep = sample_episode(&instance, 4, 11).unwrap();
        let path = dir.join("ep.json");
        ep.save(&path).unwrap();
        assert_eq!(Episode::<f64>::load(&path).unwrap(), ep);

        // Truncated file: parse error, no partial object.
        let text = std::fs::read_to_string(&path).unwrap();
        let cut = dir.join("cut.json");
        std::fs::write(&cut, &text[..text.len() / 2]).unwrap();
        assert!(matches!(Episode::<f64>::load(&cut), Err(Error::Schema { .. })));

        // Unknown extra field is named in the error.
        let extra = text.replacen('{', "{\"bogus\": 1,", 1);
        let extra_path = dir.join("extra.json");
        std::fs::write(&extra_path, extra).unwrap();
        match Episode::<f64>::load(&extra_path) {
            Err(Error::Schema { message, .. }) => assert!(message.contains("bogus")),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn demand_draws_respect_capacity() {
        for pattern in DemandPattern::ALL {
            let instance = inst(pattern);
            let ep = sample_episode(&instance, 10_000, 21).unwrap();
            for i in 0..instance.n {
                for t in 0..10_000 {
                    assert!(ep.demand[i][t] >= 0.0 && ep.demand[i][t] <= instance.capacity[i]);
                }
            }
        }
    }

    #[test]
    fn truncated_normal_mean_matches_numeric_integration() {
        // independent oracle: Simpson quadrature of the truncated density
        let (mu, sigma, cap) = (50.0f64, 5.0, 100.0);
        let phi = |x: f64| (-0.5 * ((x - mu) / sigma).powi(2)).exp();
        let steps = 40_000;
        let h = cap / steps as f64;
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let mut acc = f(0.0) + f(cap);
            for k in 1..steps {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(k as f64 * h);
            }
            acc * h / 3.0
        };
        let mass = simpson(&|x| phi(x));
        let mean = simpson(&|x| x * phi(x)) / mass;

        let spec = DemandSpec::Normal { mu, sigma };
        let mut rng = stream(77, StreamId::Episode, &[]);
        let draws = 100_000;
        let mut total = 0.0;
        for _ in 0..draws {
            total += sample_demand(&spec, cap, None, None, &mut rng).unwrap();
        }
        let empirical = total / draws as f64;
        assert!(
            (empirical - mean).abs() < 0.5,
            "empirical {empirical} vs integrated {mean}"
        );
    }

    #[test]
    fn bimodal_histogram_shows_two_modes() {
        let (mu1, sigma1, mu2, sigma2) = (25.0f64, 4.0, 75.0, 5.0);
        let cap = 150.0;
        let spec = DemandSpec::Bimodal { mu1, sigma1, mu2, sigma2, mix: 0.5 };
        let mut rng = stream(78, StreamId::Episode, &[]);
        let mut bins = vec![0usize; 75]; // width 2
        for _ in 0..100_000 {
            let d = sample_demand(&spec, cap, None, None, &mut rng).unwrap();
            let bin = ((d / 2.0) as usize).min(bins.len() - 1);
            bins[bin] += 1;
        }
        let split = ((mu1 + mu2) / 2.0 / 2.0) as usize;
        let peak = |range: std::ops::Range<usize>| {
            let k = range.clone().max_by_key(|&k| bins[k]).unwrap();
            2.0 * k as f64 + 1.0
        };
        let low_mode = peak(0..split);
        let high_mode = peak(split..bins.len());
        assert!((low_mode - mu1).abs() <= 2.0 * sigma1, "low mode at {low_mode}");
        assert!((high_mode - mu2).abs() <= 2.0 * sigma2, "high mode at {high_mode}");
    }

    #[test]
    fn pair_index_is_a_bijection() {
        let d = N_FEATURES;
        let mut seen = vec![false; d * (d - 1) / 2];
        for a in 0..d {
            for b in (a + 1)..d {
                let k = pair_index(a, b, d);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
