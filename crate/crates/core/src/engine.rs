//! Expected regret per state and its maximum over a grid.
//!
//! Counts are independent binomials per covariate group, so expected regret
//! in a state is the welfare gap times the probability that the estimate
//! crosses the threshold. Two evaluation paths compute that probability:
//!
//! - **Exact**: enumerate every count vector, weight the wrong-side ones by
//!   the product of binomial masses. The default cell cap keeps enumeration
//!   to designs with at most ten million count vectors.
//! - **Monte Carlo**: simulate count vectors and average the error
//!   indicator. Each state draws from a counter-based generator stream keyed
//!   by `(seed, state index)`, so per-state results are independent of
//!   thread scheduling and bit-reproducible at any parallelism level.
//!
//! Randomized estimators never enumerate or simulate under the exact mode:
//! their error probability is the induced aggressive-treatment probability,
//! known in closed form.
//!
//! Evaluation across grid states shares read-only inputs only and merges
//! deterministically; ties in the maximum resolve to the lexicographically
//! smallest state.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::{Treatment, WelfareSpec};
use crate::estimators::{CountVector, Estimator, RandomizedRule, SamplingDesign};
use crate::state_space::{BoundedVariationSpace, StateGrid};
use crate::{Error, Result};

/// Cell cap for exact enumeration when no engine config is in scope.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Default number of Monte Carlo draws per state.
pub const DEFAULT_DRAWS: u32 = 20_000;

/// How expected regret is evaluated per state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    Exact,
    #[serde(alias = "mc")]
    MonteCarlo,
}

/// Evaluation settings shared by every state of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: EngineMode,
    /// Monte Carlo draws per state; ignored by the exact path.
    #[serde(default = "default_draws")]
    pub draws: u32,
    #[serde(default)]
    pub seed: u64,
    /// Evaluate grid states across threads. Results are identical either way.
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    /// Maximum count-vector cells the exact path may enumerate.
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
}

fn default_draws() -> u32 {
    DEFAULT_DRAWS
}

fn default_parallel() -> bool {
    true
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: EngineMode::Exact,
            draws: DEFAULT_DRAWS,
            seed: 0,
            parallel: true,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl EngineConfig {
    pub fn exact() -> Self {
        EngineConfig::default()
    }

    pub fn monte_carlo(draws: u32, seed: u64) -> Self {
        EngineConfig {
            mode: EngineMode::MonteCarlo,
            draws,
            seed,
            ..EngineConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == EngineMode::MonteCarlo && self.draws == 0 {
            return Err(Error::NoDraws);
        }
        Ok(())
    }
}

/// Expected regret and error probability at a single state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEval {
    pub expected_regret: f64,
    pub error_probability: f64,
    /// Standard error of the regret estimate; `None` on exact paths.
    pub std_error: Option<f64>,
}

/// Per-state row of a regret report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRegret {
    pub state: Vec<f64>,
    pub expected_regret: f64,
    pub error_probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

/// Full outcome of maximizing expected regret over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub per_state: Vec<StateRegret>,
    pub max_regret: f64,
    pub argmax_state: Vec<f64>,
    pub engine: EngineConfig,
    /// Standard error at the argmax state for Monte Carlo runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_std_error: Option<f64>,
}

/// One point of a weight sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPoint {
    pub weight0: f64,
    pub max_regret: f64,
}

/// Result of searching the pooling weight that minimizes maximum regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSearch {
    /// Minimizing weight; ties resolve to the smallest.
    pub best_weight: f64,
    pub min_max_regret: f64,
    pub curve: Vec<WeightPoint>,
}

// ---------------------------------------------------------------------------
// Binomial mass
// ---------------------------------------------------------------------------

/// Binomial mass at `count` for `trials` draws with success probability
/// `prob`. Log-space evaluation stays accurate for trial counts well past
/// ten thousand.
pub fn binom_pmf(count: u32, prob: f64, trials: u32) -> Result<f64> {
    if count > trials {
        return Err(Error::CountExceedsTrials { count, trials });
    }
    let p = crate::checked_probability("prob", prob)?;
    Ok(binom_pmf_vec(p, trials)[count as usize])
}

/// Full binomial mass vector over `0..=trials`.
pub fn binom_pmf_vec(prob: f64, trials: u32) -> Vec<f64> {
    let n = trials as usize;
    let p = prob.clamp(0.0, 1.0);
    if n == 0 {
        return vec![1.0];
    }
    if p == 0.0 {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        return v;
    }
    if p == 1.0 {
        let mut v = vec![0.0; n + 1];
        v[n] = 1.0;
        return v;
    }
    // ln k! for k = 0..=n.
    let mut ln_fact = vec![0.0f64; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    (0..=n)
        .map(|k| {
            let ln_mass = ln_fact[n] - ln_fact[k] - ln_fact[n - k]
                + k as f64 * ln_p
                + (n - k) as f64 * ln_q;
            ln_mass.exp()
        })
        .collect()
}

fn cumulative(masses: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    masses
        .iter()
        .map(|&m| {
            total += m;
            total
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Exact path
// ---------------------------------------------------------------------------

/// Decision of the plug-in rule at every count vector of a design, stored
/// row-major with the last covariate fastest. Built once per run and shared
/// read-only across states.
struct DecisionTable {
    dims: Vec<usize>,
    chooses_aggressive: Vec<bool>,
}

impl DecisionTable {
    fn build(estimator: &Estimator, welfare: WelfareSpec, design: &SamplingDesign) -> Result<Self> {
        let dims: Vec<usize> = design.sizes.iter().map(|&n| n as usize + 1).collect();
        let cells = design.enumeration_cells() as usize;
        let mut chooses_aggressive = Vec::with_capacity(cells);
        let mut counts = CountVector::new(vec![0; dims.len()]);
        'outer: loop {
            let estimate = estimator.estimate(&counts, design, None)?;
            chooses_aggressive.push(welfare.decide(estimate) == Treatment::Aggressive);
            let mut axis = dims.len();
            while axis > 0 {
                axis -= 1;
                counts.counts[axis] += 1;
                if (counts.counts[axis] as usize) < dims[axis] {
                    continue 'outer;
                }
                counts.counts[axis] = 0;
            }
            break;
        }
        debug_assert_eq!(chooses_aggressive.len(), cells);
        Ok(DecisionTable {
            dims,
            chooses_aggressive,
        })
    }

    /// Probability that the rule picks aggressive treatment when counts are
    /// drawn from the given per-covariate mass vectors.
    fn aggressive_probability(&self, pmfs: &[Vec<f64>]) -> f64 {
        match pmfs.len() {
            1 => self
                .chooses_aggressive
                .iter()
                .zip(&pmfs[0])
                .filter_map(|(&b, &m)| b.then_some(m))
                .sum(),
            2 => {
                let inner = self.dims[1];
                let mut total = 0.0;
                for (i, &mass0) in pmfs[0].iter().enumerate() {
                    if mass0 == 0.0 {
                        continue;
                    }
                    let row = &self.chooses_aggressive[i * inner..(i + 1) * inner];
                    let mut row_sum = 0.0;
                    for (&b, &mass1) in row.iter().zip(&pmfs[1]) {
                        if b {
                            row_sum += mass1;
                        }
                    }
                    total += mass0 * row_sum;
                }
                total
            }
            _ => {
                let mut total = 0.0;
                self.recurse(pmfs, 0, 0, 1.0, &mut total);
                total
            }
        }
    }

    fn recurse(&self, pmfs: &[Vec<f64>], axis: usize, index: usize, partial: f64, acc: &mut f64) {
        if axis == pmfs.len() {
            if self.chooses_aggressive[index] {
                *acc += partial;
            }
            return;
        }
        let base = index * self.dims[axis];
        for (n, &mass) in pmfs[axis].iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            self.recurse(pmfs, axis + 1, base + n, partial * mass, acc);
        }
    }
}

fn eval_from_aggressive_probability(
    welfare: WelfareSpec,
    target_prob: f64,
    prob_aggressive: f64,
) -> StateEval {
    let error_probability = match welfare.decide(target_prob) {
        Treatment::Surveillance => prob_aggressive,
        Treatment::Aggressive => 1.0 - prob_aggressive,
    }
    .clamp(0.0, 1.0);
    StateEval {
        expected_regret: welfare.welfare_gap(target_prob) * error_probability,
        error_probability,
        std_error: None,
    }
}

fn exact_eval(
    table: &DecisionTable,
    welfare: WelfareSpec,
    state: &[f64],
    design: &SamplingDesign,
) -> StateEval {
    let pmfs: Vec<Vec<f64>> = state
        .iter()
        .zip(&design.sizes)
        .map(|(&p, &n)| binom_pmf_vec(p, n))
        .collect();
    eval_from_aggressive_probability(welfare, state[0], table.aggressive_probability(&pmfs))
}

fn check_state_arity(state: &[f64], design: &SamplingDesign) -> Result<()> {
    if state.len() != design.arity() {
        return Err(Error::ArityMismatch(format!(
            "state with {} coordinates for a {}-group design",
            state.len(),
            design.arity()
        )));
    }
    if state.is_empty() {
        return Err(Error::ArityMismatch("empty state tuple".to_string()));
    }
    Ok(())
}

/// Exact expected regret at one state by product-binomial enumeration.
///
/// Deterministic estimators only; randomized rules have a closed form (see
/// [`expected_regret_randomized`]) and are rejected here. Uses the default
/// enumeration cap — drive large designs through the Monte Carlo path.
pub fn expected_regret_exact(
    estimator: &Estimator,
    welfare: WelfareSpec,
    state: &[f64],
    design: &SamplingDesign,
) -> Result<StateEval> {
    if estimator.is_randomized() {
        return Err(Error::RandomizedNotEnumerable);
    }
    check_state_arity(state, design)?;
    let cells = design.enumeration_cells();
    if cells > u128::from(DEFAULT_ENUMERATION_CAP) {
        return Err(Error::EnumerationTooLarge {
            needed: cells,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    let table = DecisionTable::build(estimator, welfare, design)?;
    Ok(exact_eval(&table, welfare, state, design))
}

/// Closed-form expected regret of a randomized rule at one state: welfare
/// gap times the induced probability of the wrong side.
pub fn expected_regret_randomized(
    rule: &RandomizedRule,
    welfare: WelfareSpec,
    state: &[f64],
) -> StateEval {
    eval_from_aggressive_probability(welfare, state[0], rule.aggressive_probability(welfare))
}

// ---------------------------------------------------------------------------
// Monte Carlo path
// ---------------------------------------------------------------------------

/// Uniform draw in [0, 1) with 53 random bits.
fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn sample_from_cdf(cdf: &[f64], u: f64) -> u32 {
    let idx = cdf.partition_point(|&c| c <= u);
    idx.min(cdf.len() - 1) as u32
}

/// Monte Carlo expected regret at one state.
///
/// Simulates count vectors from the state's binomials via inverse-CDF
/// sampling, feeds a fresh uniform to randomized estimators, and averages
/// the error indicator. The generator stream is keyed by `(seed,
/// state_index)`, making every state's draw sequence independent of
/// evaluation order.
pub fn expected_regret_mc(
    estimator: &Estimator,
    welfare: WelfareSpec,
    state: &[f64],
    design: &SamplingDesign,
    cfg: &EngineConfig,
    state_index: u64,
) -> Result<StateEval> {
    if cfg.draws == 0 {
        return Err(Error::NoDraws);
    }
    check_state_arity(state, design)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(state_index);
    let cdfs: Vec<Vec<f64>> = state
        .iter()
        .zip(&design.sizes)
        .map(|(&p, &n)| cumulative(&binom_pmf_vec(p, n)))
        .collect();
    let needs_noise = estimator.is_randomized();
    let target_prob = state[0];
    let side = welfare.decide(target_prob);
    let mut counts = CountVector::new(vec![0; design.arity()]);
    let mut errors: u64 = 0;
    for _ in 0..cfg.draws {
        for (slot, cdf) in counts.counts.iter_mut().zip(&cdfs) {
            *slot = sample_from_cdf(cdf, unit_uniform(&mut rng));
        }
        let noise = needs_noise.then(|| unit_uniform(&mut rng));
        let estimate = estimator.estimate(&counts, design, noise)?;
        if welfare.decide(estimate) != side {
            errors += 1;
        }
    }
    let fraction = errors as f64 / f64::from(cfg.draws);
    let gap = welfare.welfare_gap(target_prob);
    let std_error = gap * (fraction * (1.0 - fraction) / f64::from(cfg.draws)).sqrt();
    Ok(StateEval {
        expected_regret: gap * fraction,
        error_probability: fraction,
        std_error: Some(std_error),
    })
}

// ---------------------------------------------------------------------------
// Maximization
// ---------------------------------------------------------------------------

enum EvalPath {
    Exact(DecisionTable),
    Randomized(RandomizedRule),
    MonteCarlo,
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    a.len() < b.len()
}

/// Maximizes expected regret over a state grid.
///
/// Deterministic given the config seed: per-state Monte Carlo streams do not
/// depend on the parallelism degree, and ties in the maximum resolve to the
/// lexicographically smallest state tuple.
pub fn max_regret(
    estimator: &Estimator,
    welfare: WelfareSpec,
    grid: &StateGrid,
    design: &SamplingDesign,
    cfg: &EngineConfig,
) -> Result<RegretReport> {
    cfg.validate()?;
    estimator.validate()?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.arity() != design.arity() {
        return Err(Error::ArityMismatch(format!(
            "grid of {}-coordinate states for a {}-group design",
            grid.arity(),
            design.arity()
        )));
    }

    let path = match cfg.mode {
        EngineMode::Exact => match estimator {
            Estimator::Randomized(rule) => EvalPath::Randomized(*rule),
            _ => {
                let cells = design.enumeration_cells();
                if cells > u128::from(cfg.enumeration_cap) {
                    return Err(Error::EnumerationTooLarge {
                        needed: cells,
                        cap: cfg.enumeration_cap,
                    });
                }
                EvalPath::Exact(DecisionTable::build(estimator, welfare, design)?)
            }
        },
        EngineMode::MonteCarlo => EvalPath::MonteCarlo,
    };

    let eval_one = |(index, state): (usize, &Vec<f64>)| -> Result<StateRegret> {
        let eval = match &path {
            EvalPath::Exact(table) => exact_eval(table, welfare, state, design),
            EvalPath::Randomized(rule) => expected_regret_randomized(rule, welfare, state),
            EvalPath::MonteCarlo => {
                expected_regret_mc(estimator, welfare, state, design, cfg, index as u64)?
            }
        };
        Ok(StateRegret {
            state: state.clone(),
            expected_regret: eval.expected_regret,
            error_probability: eval.error_probability,
            std_error: eval.std_error,
        })
    };

    let per_state: Vec<StateRegret> = if cfg.parallel {
        grid.states
            .par_iter()
            .enumerate()
            .map(eval_one)
            .collect::<Result<_>>()?
    } else {
        grid.states
            .iter()
            .enumerate()
            .map(eval_one)
            .collect::<Result<_>>()?
    };

    let mut best = 0usize;
    for (i, row) in per_state.iter().enumerate().skip(1) {
        let incumbent = &per_state[best];
        if row.expected_regret > incumbent.expected_regret
            || (row.expected_regret == incumbent.expected_regret
                && lex_less(&row.state, &incumbent.state))
        {
            best = i;
        }
    }

    Ok(RegretReport {
        max_regret: per_state[best].expected_regret,
        argmax_state: per_state[best].state.clone(),
        mc_std_error: per_state[best].std_error,
        engine: *cfg,
        per_state,
    })
}

/// Sweeps the two-group pooling weight over `0.5, 0.5 + step, …, 1.0` and
/// reports the weight whose maximum regret is smallest (ties go to the
/// smaller weight) together with the whole curve.
pub fn optimal_weight(
    space: &BoundedVariationSpace,
    welfare: WelfareSpec,
    design: &SamplingDesign,
    weight_step: f64,
    points0: usize,
    points1: usize,
    cfg: &EngineConfig,
) -> Result<WeightSearch> {
    if weight_step.is_nan() || weight_step <= 0.0 {
        return Err(Error::InvalidWeights(format!(
            "weight step must be positive, got {weight_step}"
        )));
    }
    let grid = space.grid(points0, points1)?;
    let mut weights = Vec::new();
    let mut k = 0u32;
    loop {
        let w0 = 0.5 + f64::from(k) * weight_step;
        if w0 >= 1.0 - 1e-9 {
            break;
        }
        weights.push(w0);
        k += 1;
    }
    weights.push(1.0);

    let mut curve = Vec::with_capacity(weights.len());
    for &weight0 in &weights {
        let estimator = Estimator::Weighted2 { weight0 };
        let report = max_regret(&estimator, welfare, &grid, design, cfg)?;
        curve.push(WeightPoint {
            weight0,
            max_regret: report.max_regret,
        });
    }

    let mut best = &curve[0];
    for point in &curve[1..] {
        if point.max_regret < best.max_regret {
            best = point;
        }
    }
    Ok(WeightSearch {
        best_weight: best.weight0,
        min_max_regret: best.max_regret,
        curve,
    })
}
