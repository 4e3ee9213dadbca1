//! Estimators mapping observed illness counts to a probability estimate.
//!
//! Samples are drawn per covariate group with predetermined sizes; the data
//! are the per-group counts of ill patients. An estimator turns those counts
//! into a single probability for the target group (covariate 0), which the
//! decision rule then treats as the truth. The families here range from
//! data-invariant constants through pooled and weighted averages to a
//! constrained least-squares estimate that exploits a known population
//! marginal.

use serde::{Deserialize, Serialize};

use crate::decision::{Treatment, WelfareSpec};
use crate::state_space::{duncan_davis, IntervalSpace};
use crate::{checked_probability, Error, Result, PROB_SLACK};

/// Predetermined number of sampled patients per covariate group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingDesign {
    pub sizes: Vec<u32>,
}

impl SamplingDesign {
    pub fn new(sizes: Vec<u32>) -> Self {
        SamplingDesign { sizes }
    }

    pub fn arity(&self) -> usize {
        self.sizes.len()
    }

    /// Total sample size across groups.
    pub fn total(&self) -> u64 {
        self.sizes.iter().map(|&n| u64::from(n)).sum()
    }

    /// Number of distinct count vectors the design can produce.
    pub fn enumeration_cells(&self) -> u128 {
        self.sizes
            .iter()
            .map(|&n| u128::from(n) + 1)
            .product()
    }
}

/// Observed illness counts, one per covariate group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    pub counts: Vec<u32>,
}

impl CountVector {
    pub fn new(counts: Vec<u32>) -> Self {
        CountVector { counts }
    }

    pub fn validate_against(&self, design: &SamplingDesign) -> Result<()> {
        if self.counts.len() != design.sizes.len() {
            return Err(Error::ArityMismatch(format!(
                "{} counts for a {}-group design",
                self.counts.len(),
                design.sizes.len()
            )));
        }
        for (k, (&n, &size)) in self.counts.iter().zip(&design.sizes).enumerate() {
            if n > size {
                return Err(Error::CountExceedsSize {
                    covariate: k,
                    count: n,
                    size,
                });
            }
        }
        Ok(())
    }
}

/// Two-point randomized estimate: report `high` with probability
/// `prob_high`, otherwise `low`. The draw comes from caller-supplied noise,
/// so the estimator itself holds no generator state. Only the induced
/// probability of selecting aggressive treatment matters for regret, which
/// is why two support points suffice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedRule {
    pub low: f64,
    pub high: f64,
    pub prob_high: f64,
}

impl RandomizedRule {
    pub fn new(low: f64, high: f64, prob_high: f64) -> Result<Self> {
        let rule = RandomizedRule {
            low,
            high,
            prob_high,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        checked_probability("low", self.low)?;
        checked_probability("high", self.high)?;
        checked_probability("prob_high", self.prob_high)?;
        if self.low > self.high + PROB_SLACK {
            return Err(Error::InvalidWeights(format!(
                "randomized support reversed: low {} > high {}",
                self.low, self.high
            )));
        }
        Ok(())
    }

    /// Probability that the realized estimate selects aggressive treatment:
    /// `prob_high` when only the high point crosses the threshold, 0 when
    /// neither does, 1 when both do.
    pub fn aggressive_probability(&self, welfare: WelfareSpec) -> f64 {
        let mut q = 0.0;
        if welfare.decide(self.high) == Treatment::Aggressive {
            q += self.prob_high;
        }
        if welfare.decide(self.low) == Treatment::Aggressive {
            q += 1.0 - self.prob_high;
        }
        q
    }
}

/// A rule mapping observed counts to a probability estimate for the target
/// group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Estimator {
    /// Data-invariant estimate.
    Constant { value: f64 },
    /// Two-point randomized estimate driven by caller-supplied noise.
    Randomized(RandomizedRule),
    /// Sample illness rate of one group: `n_k / N_k`.
    SampleRate { covariate: usize },
    /// Combined rate across all groups: `sum(n) / sum(N)`.
    Pooled,
    /// Two-group weighted average with target weight in [1/2, 1]:
    /// `(w0 n0 + (1-w0) n1) / (w0 N0 + (1-w0) N1)`.
    Weighted2 { weight0: f64 },
    /// General nonnegative weights summing to 1 across groups.
    WeightedK { weights: Vec<f64> },
    /// Least-squares estimate constrained by a known population marginal,
    /// clipped to the marginal's sharp bound when the interior solution
    /// escapes it.
    ConstrainedLs {
        marginal: f64,
        share0: f64,
        share1: f64,
    },
}

impl Estimator {
    pub fn weighted2(weight0: f64) -> Result<Self> {
        let e = Estimator::Weighted2 { weight0 };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Estimator::Constant { value } => {
                checked_probability("constant estimate", *value)?;
            }
            Estimator::Randomized(rule) => rule.validate()?,
            Estimator::SampleRate { .. } | Estimator::Pooled => {}
            Estimator::Weighted2 { weight0 } => {
                if !(*weight0 >= 0.5 && *weight0 <= 1.0) {
                    return Err(Error::InvalidWeights(format!(
                        "target-group weight must lie in [0.5, 1], got {weight0}"
                    )));
                }
            }
            Estimator::WeightedK { weights } => {
                if weights.iter().any(|&w| w < 0.0) {
                    return Err(Error::InvalidWeights(
                        "weights must be nonnegative".to_string(),
                    ));
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidWeights(format!(
                        "weights must sum to 1, got {sum}"
                    )));
                }
            }
            Estimator::ConstrainedLs {
                marginal,
                share0,
                share1,
            } => {
                checked_probability("marginal", *marginal)?;
                if !(*share0 > 0.0 && *share1 > 0.0)
                    || (share0 + share1 - 1.0).abs() > PROB_SLACK
                {
                    return Err(Error::InvalidShares {
                        share0: *share0,
                        share1: *share1,
                    });
                }
            }
        }
        Ok(())
    }

    /// Whether the rule consumes a noise draw instead of (or in addition to)
    /// the counts.
    pub fn is_randomized(&self) -> bool {
        matches!(self, Estimator::Randomized(_))
    }

    /// Maps observed counts to an estimate in [0, 1]. Randomized rules
    /// require `noise` (a unit-uniform draw) and are deterministic given it;
    /// all other rules ignore it.
    pub fn estimate(
        &self,
        counts: &CountVector,
        design: &SamplingDesign,
        noise: Option<f64>,
    ) -> Result<f64> {
        counts.validate_against(design)?;
        match self {
            Estimator::Constant { value } => Ok(*value),
            Estimator::Randomized(rule) => {
                let u = noise.ok_or(Error::MissingNoise)?;
                Ok(if u < rule.prob_high { rule.high } else { rule.low })
            }
            Estimator::SampleRate { covariate } => {
                let k = *covariate;
                if k >= design.sizes.len() {
                    return Err(Error::ArityMismatch(format!(
                        "covariate {k} outside a {}-group design",
                        design.sizes.len()
                    )));
                }
                if design.sizes[k] == 0 {
                    return Err(Error::UndefinedEstimator { covariate: k });
                }
                Ok(f64::from(counts.counts[k]) / f64::from(design.sizes[k]))
            }
            Estimator::Pooled => {
                let total = design.total();
                if total == 0 {
                    return Err(Error::UndefinedEstimator { covariate: 0 });
                }
                let ill: u64 = counts.counts.iter().map(|&n| u64::from(n)).sum();
                Ok(ill as f64 / total as f64)
            }
            Estimator::Weighted2 { weight0 } => {
                self.validate()?;
                if design.sizes.len() != 2 {
                    return Err(Error::ArityMismatch(format!(
                        "two-group weighting on a {}-group design",
                        design.sizes.len()
                    )));
                }
                let w0 = *weight0;
                let w1 = 1.0 - w0;
                let denom = w0 * f64::from(design.sizes[0]) + w1 * f64::from(design.sizes[1]);
                if denom <= 0.0 {
                    return Err(Error::UndefinedEstimator { covariate: 0 });
                }
                Ok((w0 * f64::from(counts.counts[0]) + w1 * f64::from(counts.counts[1])) / denom)
            }
            Estimator::WeightedK { weights } => {
                self.validate()?;
                if weights.len() != design.sizes.len() {
                    return Err(Error::ArityMismatch(format!(
                        "{} weights for a {}-group design",
                        weights.len(),
                        design.sizes.len()
                    )));
                }
                let denom: f64 = weights
                    .iter()
                    .zip(&design.sizes)
                    .map(|(&w, &n)| w * f64::from(n))
                    .sum();
                if denom <= 0.0 {
                    return Err(Error::InvalidWeights(
                        "some weighted sample size must be positive".to_string(),
                    ));
                }
                let numer: f64 = weights
                    .iter()
                    .zip(&counts.counts)
                    .map(|(&w, &n)| w * f64::from(n))
                    .sum();
                Ok(numer / denom)
            }
            Estimator::ConstrainedLs {
                marginal,
                share0,
                share1,
            } => Ok(cls_theta0(counts, design, *marginal, *share0, *share1)?.clipped),
        }
    }
}

/// Constrained least-squares solution for the target group's probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClsSolution {
    /// Stationary point of the constrained objective before clipping.
    pub unconstrained: f64,
    /// Solution after clipping to the marginal's sharp bound; this is the
    /// minimizer over the feasible set.
    pub clipped: f64,
    /// The sharp bound the solution was clipped to.
    pub bounds: IntervalSpace,
}

impl ClsSolution {
    /// Whether the stationary point escaped the feasible interval.
    pub fn hit_corner(&self) -> bool {
        self.unconstrained != self.clipped
    }

    /// Probability implied for the other group by the marginal constraint.
    pub fn implied_p1(&self, marginal: f64, share0: f64, share1: f64) -> f64 {
        (marginal - self.clipped * share0) / share1
    }
}

/// Minimizes total squared prediction error over both samples subject to the
/// population-marginal constraint `theta0 * share0 + theta1 * share1 =
/// marginal` with both coordinates in [0, 1].
///
/// Substituting the constraint into the objective makes it quadratic in
/// `theta0` alone; the stationary point is reported raw and clipped, so
/// corner hits remain observable.
pub fn cls_theta0(
    counts: &CountVector,
    design: &SamplingDesign,
    marginal: f64,
    share0: f64,
    share1: f64,
) -> Result<ClsSolution> {
    counts.validate_against(design)?;
    if design.sizes.len() != 2 {
        return Err(Error::ArityMismatch(format!(
            "constrained least squares needs 2 groups, got {}",
            design.sizes.len()
        )));
    }
    if share1 <= 0.0 {
        return Err(Error::ZeroShare { name: "share1" });
    }
    if share0 <= 0.0 {
        return Err(Error::ZeroShare { name: "share0" });
    }
    if design.total() == 0 {
        return Err(Error::UndefinedEstimator { covariate: 0 });
    }
    let p = checked_probability("marginal", marginal)?;
    let (n0, n1) = (f64::from(counts.counts[0]), f64::from(counts.counts[1]));
    let (size0, size1) = (f64::from(design.sizes[0]), f64::from(design.sizes[1]));
    let ratio = share0 / share1;
    let unconstrained =
        (n0 - ratio * n1 + p * share0 * size1 / (share1 * share1)) / (size0 + size1 * ratio * ratio);
    let bounds = duncan_davis(p, share0, share1)?;
    let clipped = unconstrained.clamp(bounds.p_min, bounds.p_max);
    Ok(ClsSolution {
        unconstrained,
        clipped,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn design(sizes: &[u32]) -> SamplingDesign {
        SamplingDesign::new(sizes.to_vec())
    }

    fn counts(values: &[u32]) -> CountVector {
        CountVector::new(values.to_vec())
    }

    #[test]
    fn equal_weights_reduce_to_pooling() {
        let d = design(&[10, 10]);
        let half = Estimator::weighted2(0.5).unwrap();
        for n0 in 0..=10u32 {
            for n1 in 0..=10u32 {
                let c = counts(&[n0, n1]);
                let pooled = Estimator::Pooled.estimate(&c, &d, None).unwrap();
                let weighted = half.estimate(&c, &d, None).unwrap();
                assert_eq!(weighted, pooled, "n0={n0}, n1={n1}");
            }
        }
    }

    #[test]
    fn full_weight_reduces_to_sample_rate() {
        let d = design(&[10, 10]);
        let full = Estimator::weighted2(1.0).unwrap();
        let rate = Estimator::SampleRate { covariate: 0 };
        for n0 in 0..=10u32 {
            for n1 in 0..=10u32 {
                let c = counts(&[n0, n1]);
                assert_eq!(
                    full.estimate(&c, &d, None).unwrap(),
                    rate.estimate(&c, &d, None).unwrap(),
                );
            }
        }
    }

    #[test]
    fn weighted_average_hand_value() {
        let e = Estimator::weighted2(0.8).unwrap();
        let got = e
            .estimate(&counts(&[4, 6]), &design(&[10, 10]), None)
            .unwrap();
        assert!((got - 0.44).abs() < 1e-15);
    }

    #[test]
    fn weight_domain_enforced() {
        assert!(Estimator::weighted2(0.4).is_err());
        assert!(Estimator::weighted2(1.1).is_err());
        assert!(Estimator::weighted2(0.5).is_ok());
        assert!(Estimator::weighted2(1.0).is_ok());
    }

    #[test]
    fn sample_rate_requires_observations() {
        let e = Estimator::SampleRate { covariate: 0 };
        assert_eq!(
            e.estimate(&counts(&[0, 3]), &design(&[0, 10]), None)
                .unwrap_err(),
            Error::UndefinedEstimator { covariate: 0 }
        );
    }

    #[test]
    fn weighted_k_needs_effective_sample() {
        let e = Estimator::WeightedK {
            weights: vec![1.0, 0.0],
        };
        // All weight on an empty group.
        assert!(matches!(
            e.estimate(&counts(&[0, 5]), &design(&[0, 10]), None)
                .unwrap_err(),
            Error::InvalidWeights(_)
        ));
        // Domain violations.
        assert!(Estimator::WeightedK {
            weights: vec![0.7, 0.7]
        }
        .validate()
        .is_err());
        assert!(Estimator::WeightedK {
            weights: vec![1.2, -0.2]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn randomized_needs_noise_and_obeys_it() {
        let rule = RandomizedRule::new(0.1, 0.9, 0.25).unwrap();
        let e = Estimator::Randomized(rule);
        let d = design(&[1]);
        let c = counts(&[0]);
        assert_eq!(e.estimate(&c, &d, None).unwrap_err(), Error::MissingNoise);
        assert_eq!(e.estimate(&c, &d, Some(0.1)).unwrap(), 0.9);
        assert_eq!(e.estimate(&c, &d, Some(0.25)).unwrap(), 0.1);
        assert_eq!(e.estimate(&c, &d, Some(0.9)).unwrap(), 0.1);
    }

    #[test]
    fn aggressive_probability_cases() {
        let w = WelfareSpec::new(0.5).unwrap();
        // Support straddles the threshold: probability of the high point.
        let straddle = RandomizedRule::new(0.0, 1.0, 0.3).unwrap();
        assert!((straddle.aggressive_probability(w) - 0.3).abs() < 1e-15);
        // Both points below the threshold.
        let low = RandomizedRule::new(0.0, 0.2, 0.9).unwrap();
        assert_eq!(low.aggressive_probability(w), 0.0);
        // Both above.
        let high = RandomizedRule::new(0.9, 1.0, 0.2).unwrap();
        assert_eq!(high.aggressive_probability(w), 1.0);
    }

    #[test]
    fn cls_symmetric_interior() {
        let sol = cls_theta0(&counts(&[5, 5]), &design(&[10, 10]), 0.5, 0.5, 0.5).unwrap();
        assert!((sol.unconstrained - 0.5).abs() < 1e-12);
        assert!(!sol.hit_corner());
        assert!((sol.clipped - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cls_zero_counts_high_marginal() {
        let sol = cls_theta0(&counts(&[0, 0]), &design(&[10, 10]), 0.9, 0.5, 0.5).unwrap();
        assert!((sol.unconstrained - 0.9).abs() < 1e-12);
        // Bound is [0.8, 1.0]; interior.
        assert!((sol.bounds.p_min - 0.8).abs() < 1e-12);
        assert!(!sol.hit_corner());
    }

    #[test]
    fn cls_corner_solutions() {
        // Stationary point above the upper bound clips down.
        let upper = cls_theta0(&counts(&[10, 0]), &design(&[10, 10]), 0.2, 0.5, 0.5).unwrap();
        assert!((upper.unconstrained - 0.7).abs() < 1e-12);
        assert!((upper.clipped - 0.4).abs() < 1e-12);
        assert!(upper.hit_corner());

        // Stationary point below the lower bound clips up.
        let lower = cls_theta0(&counts(&[0, 10]), &design(&[10, 10]), 0.8, 0.5, 0.5).unwrap();
        assert!((lower.unconstrained - 0.3).abs() < 1e-12);
        assert!((lower.clipped - 0.6).abs() < 1e-12);
        assert!(lower.hit_corner());
    }

    #[test]
    fn cls_rejects_degenerate_shares() {
        assert!(cls_theta0(&counts(&[1, 1]), &design(&[5, 5]), 0.5, 1.0, 0.0).is_err());
        assert!(cls_theta0(&counts(&[0, 0]), &design(&[0, 0]), 0.5, 0.5, 0.5).is_err());
    }

    /// Total squared prediction error at `theta0` given the marginal
    /// constraint, written directly from counts of ones and zeros.
    #[allow(clippy::too_many_arguments)]
    fn cls_objective(
        theta0: f64,
        n0: u32,
        size0: u32,
        n1: u32,
        size1: u32,
        marginal: f64,
        share0: f64,
        share1: f64,
    ) -> f64 {
        let theta1 = (marginal - theta0 * share0) / share1;
        let sq = |x: f64| x * x;
        f64::from(n0) * sq(1.0 - theta0)
            + f64::from(size0 - n0) * sq(theta0)
            + f64::from(n1) * sq(1.0 - theta1)
            + f64::from(size1 - n1) * sq(theta1)
    }

    #[test]
    fn cls_matches_brute_force_on_sample_instances() {
        // Spot check against the direct objective on a fine grid; the
        // acceptance suite runs the full randomized battery.
        let mut lcg = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (lcg >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let size0 = 1 + (next() * 20.0) as u32;
            let size1 = 1 + (next() * 20.0) as u32;
            let n0 = ((next() * f64::from(size0 + 1)) as u32).min(size0);
            let n1 = ((next() * f64::from(size1 + 1)) as u32).min(size1);
            let share0 = 0.1 + 0.8 * next();
            let share1 = 1.0 - share0;
            let marginal = next();
            let sol = cls_theta0(
                &counts(&[n0, n1]),
                &design(&[size0, size1]),
                marginal,
                share0,
                share1,
            )
            .unwrap();
            let grid_points = 10_001;
            let mut best = f64::INFINITY;
            let mut best_theta = sol.bounds.p_min;
            for i in 0..grid_points {
                let t = i as f64 / (grid_points - 1) as f64;
                let theta0 = sol.bounds.p_min * (1.0 - t) + sol.bounds.p_max * t;
                let value = cls_objective(
                    theta0,
                    n0,
                    size0,
                    n1,
                    size1,
                    marginal,
                    share0,
                    share1,
                );
                if value < best {
                    best = value;
                    best_theta = theta0;
                }
            }
            let spacing = sol.bounds.width() / (grid_points - 1) as f64;
            assert!(
                (sol.clipped - best_theta).abs() <= spacing + 1e-12,
                "clipped {} vs brute {}",
                sol.clipped,
                best_theta
            );
        }
    }

    proptest! {
        #[test]
        fn estimates_stay_in_unit_interval(
            n0 in 0u32..=15,
            n1 in 0u32..=15,
            w0 in 0.5f64..=1.0,
        ) {
            let d = design(&[15, 15]);
            let c = counts(&[n0, n1]);
            for e in [
                Estimator::Pooled,
                Estimator::SampleRate { covariate: 0 },
                Estimator::SampleRate { covariate: 1 },
                Estimator::Weighted2 { weight0: w0 },
            ] {
                let value = e.estimate(&c, &d, None).unwrap();
                prop_assert!((0.0..=1.0).contains(&value));
            }
        }

        #[test]
        fn cls_stays_in_bounds_and_implies_valid_p1(
            n0 in 0u32..=12,
            n1 in 0u32..=12,
            share0 in 0.05f64..0.95,
            marginal in 0.0f64..=1.0,
        ) {
            let share1 = 1.0 - share0;
            let sol = cls_theta0(
                &counts(&[n0, n1]),
                &design(&[12, 12]),
                marginal,
                share0,
                share1,
            )
            .unwrap();
            prop_assert!(sol.bounds.contains(sol.clipped));
            let p1 = sol.implied_p1(marginal, share0, share1);
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&p1));
        }
    }
}
