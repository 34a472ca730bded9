//! Dynamic and stochastic inventory routing (DSIRP) research toolkit.
//!
//! The crate covers the full experimental loop for a single-vehicle,
//! order-up-to inventory routing problem with stochastic demand:
//!
//! * [`instance`] — synthetic instance and demand-episode generation for
//!   normal, uniform, bimodal and contextual demand patterns, with JSON
//!   persistence;
//! * [`mdp`] — the Markov decision process itself: states, feasibility,
//!   per-period costs, transitions and policy rollouts;
//! * [`cpctsp`] — an exact capacitated prize-collecting TSP oracle built on
//!   memoized Held-Karp tour costs;
//! * [`det_irp`] — deterministic multi-period IRP solvers (exhaustive and
//!   local search) used for anticipative decisions;
//! * [`model`] — the quantile-based prize model with exact gradients;
//! * [`training`] — Fenchel-Young imitation learning with DAgger-style
//!   dataset aggregation and voting targets;
//! * [`policies`] — rolling-horizon benchmark policies (mean, SAA-1, SAA-3),
//!   the learned policy and the full-knowledge anticipative baseline.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the type aliases at the crate root fix `f64`, which is what the CLI and
//! the test suites use.

pub mod cpctsp;
pub mod det_irp;
pub mod instance;
pub mod mdp;
pub mod model;
pub mod policies;
pub mod rng;
pub mod scalar;
pub mod training;

use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested computation exceeds a hard size guard.
    #[error("capability exceeded: {0}")]
    Capability(String),

    /// A decision violated the feasibility contract at a given period.
    #[error("infeasible decision at period {period}: {reason}")]
    Infeasible { period: usize, reason: String },

    /// A persisted file does not match its schema; `path` is the JSON field
    /// path of the offending value.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

// Concrete `f64` aliases. Library users who want `f32` (or another scalar)
// can name the generic types from the modules directly.
pub type Instance = instance::Instance<f64>;
pub type DemandSpec = instance::DemandSpec<f64>;
pub type ContextSpec = instance::ContextSpec<f64>;
pub type Episode = instance::Episode<f64>;
pub type State = mdp::State<f64>;
pub type CostBreakdown = mdp::CostBreakdown<f64>;
pub type Trajectory = mdp::Trajectory<f64>;
pub type PrizeVector = cpctsp::PrizeVector<f64>;
pub type TourCostCache = cpctsp::TourCostCache<f64>;
pub type VisitSchedule = det_irp::VisitSchedule<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type QuantileConfig = model::QuantileConfig<f64>;
pub type TrainingSample = training::TrainingSample<f64>;
pub type TrainConfig = training::TrainConfig<f64>;
pub type PolicySpec = policies::PolicySpec<f64>;
pub type RollingPolicy = policies::RollingPolicy<f64>;

pub use mdp::Tour;
