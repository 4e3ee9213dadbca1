//! Closed-form minimax-regret values and finite-sample upper bounds.
//!
//! These expressions cover the extreme cases that admit pencil-and-paper
//! analysis — no data, uninformative randomized data, a single draw — plus
//! large-deviation upper bounds for the sample-rate and pooled rules at any
//! sample size. The engine reproduces each of them numerically, so the two
//! routes check one another.

use serde::{Deserialize, Serialize};

use crate::decision::{Treatment, WelfareSpec};
use crate::{checked_probability, Error, Result};

/// Worst-case welfare gaps on the two sides of the threshold: how much a
/// wrong aggressive call can cost at the lowest feasible probability, and a
/// wrong surveillance call at the highest.
fn side_gaps(p_min: f64, p_max: f64, welfare: WelfareSpec) -> (f64, f64) {
    (
        (1.0 - p_min) - welfare.aggressive(),
        welfare.aggressive() - (1.0 - p_max),
    )
}

/// The decision problem is informative only when the feasible interval
/// straddles the threshold; otherwise one option dominates.
fn require_informative(p_min: f64, p_max: f64, welfare: WelfareSpec) -> Result<()> {
    let threshold = welfare.threshold();
    if p_min < threshold && threshold < p_max {
        Ok(())
    } else {
        Err(Error::TrivialProblem {
            threshold,
            lo: p_min,
            hi: p_max,
        })
    }
}

/// Minimax regret with a data-invariant estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoDataMmr {
    /// Smallest achievable maximum regret.
    pub value: f64,
    /// Which decision the optimal constant estimates produce. Every constant
    /// on that side of the threshold attains the value; ties between the
    /// sides report the aggressive one.
    pub optimal_choice: Treatment,
}

/// Minimax regret over constant estimates when the feasible interval
/// `[p_min, p_max]` straddles the threshold: the smaller of the two
/// worst-case side gaps, attained by any constant deciding toward the
/// smaller gap.
pub fn mmr_no_data(p_min: f64, p_max: f64, welfare: WelfareSpec) -> Result<NoDataMmr> {
    let lo = checked_probability("p_min", p_min)?;
    let hi = checked_probability("p_max", p_max)?;
    require_informative(lo, hi, welfare)?;
    let (gap_surveillance, gap_aggressive) = side_gaps(lo, hi, welfare);
    Ok(NoDataMmr {
        value: gap_surveillance.min(gap_aggressive),
        optimal_choice: if gap_surveillance <= gap_aggressive {
            Treatment::Aggressive
        } else {
            Treatment::Surveillance
        },
    })
}

/// Minimax regret with an uninformative randomized estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedMmr {
    /// Probability of selecting aggressive treatment that equalizes the two
    /// side maxima.
    pub prob_aggressive: f64,
    /// Smallest achievable maximum regret; strictly below the no-data value
    /// whenever the problem is informative.
    pub value: f64,
}

/// Minimax regret over randomized estimates built from data that carry no
/// information about the state. Randomizing the decision equalizes the two
/// side maxima and strictly improves on any constant.
pub fn mmr_randomized(p_min: f64, p_max: f64, welfare: WelfareSpec) -> Result<RandomizedMmr> {
    let lo = checked_probability("p_min", p_min)?;
    let hi = checked_probability("p_max", p_max)?;
    require_informative(lo, hi, welfare)?;
    let (gap_surveillance, gap_aggressive) = side_gaps(lo, hi, welfare);
    let width = hi - lo;
    Ok(RandomizedMmr {
        prob_aggressive: gap_aggressive / width,
        value: gap_surveillance * gap_aggressive / width,
    })
}

/// Exact maximum regret of deciding from a single observation over the full
/// interval: `max((1 - u)^2, u^2) / 4`.
pub fn single_draw_max_regret(welfare: WelfareSpec) -> f64 {
    let u = welfare.aggressive();
    0.25 * (1.0 - u).powi(2).max(u.powi(2))
}

/// Exact maximum regret of deciding from a single draw of the *neighboring*
/// group when the target group's probability may differ from it by at most
/// `max_diff` in either direction and the neighbor ranges over the full
/// interval: `max((1 - u + d)^2, (u + d)^2) / 4`.
///
/// Requires `0 <= max_diff <= min(u, 1 - u)`; wider spreads change the
/// worst-case geometry and are rejected rather than extrapolated.
pub fn neighbor_draw_max_regret(welfare: WelfareSpec, max_diff: f64) -> Result<f64> {
    let u = welfare.aggressive();
    let limit = u.min(1.0 - u);
    if !(0.0..=limit).contains(&max_diff) {
        return Err(Error::SpreadOutOfRange(format!(
            "need 0 <= max_diff <= {limit}, got {max_diff}"
        )));
    }
    Ok(0.25 * ((1.0 - u) + max_diff).powi(2).max((u + max_diff).powi(2)))
}

/// Illness-probability weights at which a single-draw rule and the
/// data-invariant constants trade places: below the first value the
/// always-surveil constant has smaller maximum regret, above the second the
/// always-treat constant does.
pub fn crossover_thresholds() -> (f64, f64) {
    let root2 = 2.0f64.sqrt();
    (3.0 - 2.0 * root2, 2.0 * (root2 - 1.0))
}

/// A large-deviation bound evaluated or minimized over its margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// Margin at which the bound was evaluated (the minimizer when none was
    /// supplied).
    pub delta_star: f64,
    /// Value of the bound at `delta_star`.
    pub bound_value: f64,
    /// The two worst-case side gaps entering the bound.
    pub side_gaps: (f64, f64),
}

/// Upper bound on the maximum regret of the sample-rate rule over
/// `[p_min, p_max]` with `trials` observations:
/// `delta + worst_gap * exp(-2 * trials * delta^2)`.
///
/// With `delta` supplied the bound is evaluated there; otherwise it is
/// minimized over the margin numerically.
pub fn hoeffding_bound(
    p_min: f64,
    p_max: f64,
    welfare: WelfareSpec,
    trials: u32,
    delta: Option<f64>,
) -> Result<BoundResult> {
    if trials == 0 {
        return Err(Error::UndefinedEstimator { covariate: 0 });
    }
    let lo = checked_probability("p_min", p_min)?;
    let hi = checked_probability("p_max", p_max)?;
    let gaps = side_gaps(lo, hi, welfare);
    bound_over_margin(gaps, f64::from(trials), 0.0, delta)
}

/// Upper bound on the maximum regret of the pooled rule when the two groups
/// may differ by at most `max_diff` and the neighbor ranges over the full
/// interval: the sample-rate bound at the combined size plus the worst-case
/// pooling bias `size1 / (size0 + size1) * max_diff`.
pub fn pooled_bound(
    p_min0: f64,
    p_max0: f64,
    welfare: WelfareSpec,
    size0: u32,
    size1: u32,
    max_diff: f64,
    delta: Option<f64>,
) -> Result<BoundResult> {
    if max_diff < 0.0 {
        return Err(Error::SpreadOutOfRange(format!(
            "pooling bias needs max_diff >= 0, got {max_diff}"
        )));
    }
    let combined = u64::from(size0) + u64::from(size1);
    if combined == 0 {
        return Err(Error::UndefinedEstimator { covariate: 0 });
    }
    let lo = checked_probability("p_min0", p_min0)?;
    let hi = checked_probability("p_max0", p_max0)?;
    let gaps = side_gaps(lo, hi, welfare);
    let share1 = size1 as f64 / combined as f64;
    bound_over_margin(gaps, combined as f64, share1 * max_diff, delta)
}

fn bound_over_margin(
    gaps: (f64, f64),
    effective_size: f64,
    bias: f64,
    delta: Option<f64>,
) -> Result<BoundResult> {
    let worst_gap = gaps.0.max(gaps.1).max(0.0);
    let objective =
        |d: f64| bias + d + worst_gap * (-2.0 * effective_size * d * d).exp();
    let (delta_star, bound_value) = match delta {
        Some(d) => {
            if d <= 0.0 {
                return Err(Error::NonPositiveDelta(d));
            }
            (d, objective(d))
        }
        None => minimize_margin(objective),
    };
    Ok(BoundResult {
        delta_star,
        bound_value,
        side_gaps: gaps,
    })
}

/// Minimizes `f` over the margin interval (0, 1].
///
/// The objective rises near zero before it falls toward the interior
/// minimum, so plain golden-section over the whole interval is not safe; a
/// coarse scan brackets the global minimum first and golden-section then
/// refines the margin to 1e-9.
fn minimize_margin(f: impl Fn(f64) -> f64) -> (f64, f64) {
    const LO: f64 = 1e-6;
    const HI: f64 = 1.0;
    const SCAN: usize = 4000;
    let step = (HI - LO) / SCAN as f64;
    let mut best_index = 0usize;
    let mut best_value = f64::INFINITY;
    for i in 0..=SCAN {
        let value = f(LO + step * i as f64);
        if value < best_value {
            best_value = value;
            best_index = i;
        }
    }
    let mut a = (LO + step * (best_index.saturating_sub(1)) as f64).max(LO);
    let mut b = (LO + step * (best_index + 1) as f64).min(HI);

    let ratio = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > 1e-9 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let delta = 0.5 * (a + b);
    (delta, f(delta))
}
