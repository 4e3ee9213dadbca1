//! Worst-case evaluation of plug-in treatment rules for binary clinical choice.
//!
//! A clinician chooses between surveillance and aggressive treatment for a
//! patient whose illness probability is unknown but constrained to a feasible
//! set. The rule under evaluation estimates that probability from binomial
//! count data and treats the estimate as if it were the truth. This crate
//! computes the expected welfare lost to such a rule — its regret — in every
//! feasible state, and maximizes over the state space to obtain the rule's
//! worst-case performance.
//!
//! The crate is organized around five building blocks:
//!
//! - [`decision`] — normalized welfare, the decision threshold, and
//!   per-realization regret.
//! - [`state_space`] — feasible probability sets (intervals, bounded-variation
//!   bands, ecological constraints) and the finite grids used to maximize
//!   over them.
//! - [`estimators`] — the probability estimators fed into the rule: constants,
//!   randomized two-point rules, sample rates, pooled and weighted averages,
//!   and constrained least squares under a known marginal.
//! - [`engine`] — expected regret per state by exact product-binomial
//!   enumeration or seeded Monte Carlo, maximization over a grid, and the
//!   search for the regret-minimizing pooling weight.
//! - [`analytic`] — closed-form minimax-regret values and large-deviation
//!   bounds that serve as independent checks on the engine.
//!
//! All evaluation paths are deterministic: exact enumeration has no random
//! element, and Monte Carlo runs draw each state's sample stream from a
//! counter-based generator keyed by `(seed, state index)`, so results do not
//! depend on thread scheduling.

pub mod analytic;
pub mod decision;
pub mod engine;
pub mod estimators;
pub mod state_space;

pub use decision::{FullWelfare, Treatment, WelfareSpec};
pub use engine::{EngineConfig, EngineMode, RegretReport, WeightSearch};
pub use estimators::{CountVector, Estimator, SamplingDesign};
pub use state_space::{
    duncan_davis, BoundedVariationFamily, BoundedVariationSpace, EcologicalSpace, IntervalSpace,
    StateGrid,
};

/// Absolute slack used when validating probabilities and feasibility
/// inequalities, absorbing rounding accumulated by weighted averages.
pub const PROB_SLACK: f64 = 1e-12;

/// Errors produced by construction, validation, and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Welfare values do not order the two options as required: aggressive
    /// treatment must beat surveillance for an ill patient and lose to it for
    /// a healthy one.
    #[error(
        "invalid welfare ordering: need aggressive_ill > surveillance_ill and \
         surveillance_healthy > aggressive_healthy"
    )]
    InvalidWelfare,

    /// Aggressive treatment must yield the same welfare whether or not the
    /// illness is present before normalization applies.
    #[error("aggressive treatment is not neutralizing: welfare {healthy} healthy vs {ill} ill")]
    NonNeutralizing { healthy: f64, ill: f64 },

    /// Surveillance welfare does not depend on the outcome, so no scale
    /// normalization exists.
    #[error("degenerate welfare scale: surveillance welfare is {0} for both outcomes")]
    DegenerateScale(f64),

    /// Normalized aggressive-treatment welfare must lie strictly inside (0, 1).
    #[error("normalized aggressive welfare must satisfy 0 < u < 1, got {0}")]
    WelfareOutOfRange(f64),

    /// A probability argument fell outside [0, 1] beyond slack.
    #[error("{name} must lie in [0, 1], got {value}")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    /// Interval endpoints are reversed.
    #[error("interval requires lo <= hi, got [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },

    /// Grid construction needs at least two points per non-degenerate axis.
    #[error("grid needs at least 2 points per axis, got {0}")]
    GridResolution(usize),

    /// The requested state space contains no feasible state.
    #[error("infeasible state space: {0}")]
    InfeasibleSpace(String),

    /// A data-using estimator was paired with an empty sample.
    #[error("estimator undefined: sample size for covariate {covariate} is zero")]
    UndefinedEstimator { covariate: usize },

    /// Estimator weights violate their domain.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// An observed count exceeds its sample size.
    #[error("count {count} exceeds sample size {size} for covariate {covariate}")]
    CountExceedsSize {
        covariate: usize,
        count: u32,
        size: u32,
    },

    /// Mismatched lengths between a state tuple, design, or weight vector.
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),

    /// Population shares must be positive and sum to one.
    #[error("population shares must be positive and sum to 1, got r0={share0}, r1={share1}")]
    InvalidShares { share0: f64, share1: f64 },

    /// Division by a zero population share.
    #[error("population share {name} must be positive")]
    ZeroShare { name: &'static str },

    /// A randomized estimator needs a unit-uniform noise draw.
    #[error("randomized estimator needs a unit-uniform noise draw")]
    MissingNoise,

    /// Exact enumeration would exceed the configured cell cap.
    #[error("exact enumeration needs {needed} cells, above the cap of {cap}; use monte-carlo mode")]
    EnumerationTooLarge { needed: u128, cap: u64 },

    /// Randomized estimators skip enumeration; expected regret has a closed form.
    #[error("randomized estimators are not enumerable; use the closed-form path")]
    RandomizedNotEnumerable,

    /// The feasible set lies entirely on one side of the decision threshold,
    /// so one option dominates and the problem is not a decision problem.
    #[error("one care option dominates: threshold {threshold} lies outside ({lo}, {hi})")]
    TrivialProblem { threshold: f64, lo: f64, hi: f64 },

    /// A bounded-variation spread parameter fell outside its admissible range.
    #[error("spread out of range: {0}")]
    SpreadOutOfRange(String),

    /// Explicit large-deviation margins must be positive.
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),

    /// Binomial mass requested for a count above the trial count.
    #[error("binomial count {count} exceeds trial count {trials}")]
    CountExceedsTrials { count: u32, trials: u32 },

    /// Monte Carlo runs need at least one draw.
    #[error("monte-carlo draws must be at least 1")]
    NoDraws,

    /// An empty grid cannot be maximized over.
    #[error("empty state grid")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;

/// Validates that `value` is a probability, tolerating `PROB_SLACK` of
/// rounding, and returns it clamped to [0, 1].
pub(crate) fn checked_probability(name: &'static str, value: f64) -> Result<f64> {
    if !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&value) {
        return Err(Error::ProbabilityOutOfRange { name, value });
    }
    Ok(value.clamp(0.0, 1.0))
}
