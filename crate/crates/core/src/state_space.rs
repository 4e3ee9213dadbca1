//! Feasible sets of illness probabilities and the finite grids used to
//! maximize regret over them.
//!
//! Three shapes of partial knowledge are covered: a plain interval for a
//! single group, a bounded-variation band tying a target group's probability
//! to a neighboring group's, and an ecological constraint that pins the
//! population marginal while leaving the group split free. Each space grids
//! into a [`StateGrid`] whose every state is feasible by construction.

use serde::{Deserialize, Serialize};

use crate::{checked_probability, Error, Result, PROB_SLACK};

/// Inclusive interval of feasible probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpace {
    pub p_min: f64,
    pub p_max: f64,
}

impl IntervalSpace {
    pub fn new(p_min: f64, p_max: f64) -> Result<Self> {
        let space = IntervalSpace { p_min, p_max };
        space.validate()?;
        Ok(space)
    }

    /// The full no-knowledge interval [0, 1].
    pub fn unit() -> Self {
        IntervalSpace {
            p_min: 0.0,
            p_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        checked_probability("p_min", self.p_min)?;
        checked_probability("p_max", self.p_max)?;
        if self.p_min > self.p_max + PROB_SLACK {
            return Err(Error::EmptyInterval {
                lo: self.p_min,
                hi: self.p_max,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.p_max - self.p_min
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.p_min - PROB_SLACK && p <= self.p_max + PROB_SLACK
    }

    /// Intersection with another interval, or `None` if disjoint beyond slack.
    pub fn intersect(&self, other: &IntervalSpace) -> Option<IntervalSpace> {
        let lo = self.p_min.max(other.p_min);
        let hi = self.p_max.min(other.p_max);
        if lo > hi + PROB_SLACK {
            None
        } else {
            Some(IntervalSpace {
                p_min: lo,
                p_max: hi.max(lo),
            })
        }
    }

    /// Uniform grid including both endpoints. A degenerate interval yields a
    /// singleton so point-mass states stay representable.
    pub fn grid(&self, points: usize) -> Result<StateGrid> {
        self.validate()?;
        let values = linspace(self.p_min, self.p_max, points)?;
        Ok(StateGrid {
            states: values.into_iter().map(|p| vec![p]).collect(),
            provenance: GridProvenance::Interval {
                space: *self,
                points,
            },
        })
    }
}

/// Pair of group probabilities tied by a bounded-variation band: the target
/// group's probability may differ from the neighbor's by at least `diff_min`
/// and at most `diff_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedVariationSpace {
    /// Feasible interval for the target group (covariate 0).
    pub interval0: IntervalSpace,
    /// Feasible interval for the neighboring group (covariate 1); defaults
    /// to the full interval when a scenario leaves it out.
    #[serde(default = "IntervalSpace::unit")]
    pub interval1: IntervalSpace,
    /// Lower bound on `p0 - p1`.
    pub diff_min: f64,
    /// Upper bound on `p0 - p1`.
    pub diff_max: f64,
}

impl BoundedVariationSpace {
    pub fn new(
        interval0: IntervalSpace,
        interval1: IntervalSpace,
        diff_min: f64,
        diff_max: f64,
    ) -> Result<Self> {
        let space = BoundedVariationSpace {
            interval0,
            interval1,
            diff_min,
            diff_max,
        };
        space.validate()?;
        Ok(space)
    }

    /// Band with the `[0, 1]` default for the neighboring group.
    pub fn with_unit_neighbor(interval0: IntervalSpace, diff_min: f64, diff_max: f64) -> Result<Self> {
        BoundedVariationSpace::new(interval0, IntervalSpace::unit(), diff_min, diff_max)
    }

    pub fn validate(&self) -> Result<()> {
        self.interval0.validate()?;
        self.interval1.validate()?;
        if self.diff_min.is_nan() || self.diff_max.is_nan() || self.diff_min > self.diff_max {
            return Err(Error::SpreadOutOfRange(format!(
                "need diff_min <= diff_max, got {} > {}",
                self.diff_min, self.diff_max
            )));
        }
        Ok(())
    }

    /// Feasible interval of `p1` values at a given `p0`, or `None` when the
    /// band misses `interval1` entirely.
    pub fn band_at(&self, p0: f64) -> Option<IntervalSpace> {
        let lo = (p0 - self.diff_max).max(self.interval1.p_min);
        let hi = (p0 - self.diff_min).min(self.interval1.p_max);
        if lo > hi + PROB_SLACK {
            None
        } else {
            Some(IntervalSpace {
                p_min: lo,
                p_max: hi.max(lo),
            })
        }
    }

    pub fn contains(&self, p0: f64, p1: f64) -> bool {
        self.interval0.contains(p0)
            && self.interval1.contains(p1)
            && p0 - p1 >= self.diff_min - PROB_SLACK
            && p0 - p1 <= self.diff_max + PROB_SLACK
    }

    /// Grids `p0` uniformly over its interval and, for each value, grids `p1`
    /// uniformly over the feasible band, so every emitted pair is feasible
    /// and the grid is densest where the band lives. `p0` values whose band
    /// is empty are skipped; an entirely empty grid is an error.
    pub fn grid(&self, points0: usize, points1: usize) -> Result<StateGrid> {
        self.validate()?;
        let p0_values = linspace(self.interval0.p_min, self.interval0.p_max, points0)?;
        let mut states = Vec::new();
        for p0 in p0_values {
            let Some(band) = self.band_at(p0) else {
                continue;
            };
            for p1 in linspace(band.p_min, band.p_max, points1)? {
                states.push(vec![p0, p1]);
            }
        }
        if states.is_empty() {
            return Err(Error::InfeasibleSpace(format!(
                "no (p0, p1) satisfies {} <= p0 - p1 <= {} with p0 in [{}, {}] and p1 in [{}, {}]",
                self.diff_min,
                self.diff_max,
                self.interval0.p_min,
                self.interval0.p_max,
                self.interval1.p_min,
                self.interval1.p_max,
            )));
        }
        Ok(StateGrid {
            states,
            provenance: GridProvenance::BoundedVariation {
                space: *self,
                points0,
                points1,
            },
        })
    }
}

/// Bounded-variation constraints tying a target group to several neighboring
/// groups at once: for each neighbor `k >= 1`, `p0 - pk` lies in
/// `diff_bounds[k - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedVariationFamily {
    /// Feasible interval per covariate group, target group first.
    pub intervals: Vec<IntervalSpace>,
    /// `(diff_min, diff_max)` bounds on `p0 - pk` for each neighbor.
    pub diff_bounds: Vec<(f64, f64)>,
}

impl BoundedVariationFamily {
    pub fn new(intervals: Vec<IntervalSpace>, diff_bounds: Vec<(f64, f64)>) -> Result<Self> {
        let family = BoundedVariationFamily {
            intervals,
            diff_bounds,
        };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals.len() != self.diff_bounds.len() + 1 {
            return Err(Error::ArityMismatch(format!(
                "{} intervals need {} difference bounds, got {}",
                self.intervals.len(),
                self.intervals.len().saturating_sub(1),
                self.diff_bounds.len()
            )));
        }
        for interval in &self.intervals {
            interval.validate()?;
        }
        for (k, (lo, hi)) in self.diff_bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::SpreadOutOfRange(format!(
                    "bounds for neighbor {} reversed: {} > {}",
                    k + 1,
                    lo,
                    hi
                )));
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, state: &[f64]) -> bool {
        if state.len() != self.intervals.len() {
            return false;
        }
        if !self
            .intervals
            .iter()
            .zip(state)
            .all(|(interval, &p)| interval.contains(p))
        {
            return false;
        }
        let p0 = state[0];
        self.diff_bounds
            .iter()
            .zip(&state[1..])
            .all(|(&(lo, hi), &pk)| p0 - pk >= lo - PROB_SLACK && p0 - pk <= hi + PROB_SLACK)
    }
}

/// Group probabilities constrained by a known population marginal: feasible
/// pairs satisfy `p0 * share0 + p1 * share1 = marginal` with both coordinates
/// in [0, 1] and `p0` additionally inside `base0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcologicalSpace {
    /// Marginal illness probability in the whole population.
    pub marginal: f64,
    /// Population share of the target group (covariate 0).
    pub share0: f64,
    /// Population share of the other group (covariate 1).
    pub share1: f64,
    /// Prior feasible interval for the target group's probability.
    pub base0: IntervalSpace,
}

impl EcologicalSpace {
    pub fn new(marginal: f64, share0: f64, share1: f64, base0: IntervalSpace) -> Result<Self> {
        let space = EcologicalSpace {
            marginal,
            share0,
            share1,
            base0,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        checked_probability("marginal", self.marginal)?;
        self.base0.validate()?;
        if !(self.share0 > 0.0 && self.share1 > 0.0)
            || (self.share0 + self.share1 - 1.0).abs() > PROB_SLACK
        {
            return Err(Error::InvalidShares {
                share0: self.share0,
                share1: self.share1,
            });
        }
        Ok(())
    }

    /// Sharp interval for the target group's probability implied by the
    /// marginal and the shares alone.
    pub fn duncan_davis(&self) -> IntervalSpace {
        duncan_davis(self.marginal, self.share0, self.share1)
            .expect("validated shares admit the bound")
    }

    /// Implied probability for the other group at a given `p0`.
    pub fn implied_p1(&self, p0: f64) -> f64 {
        ((self.marginal - p0 * self.share0) / self.share1).clamp(0.0, 1.0)
    }

    /// Grids `p0` uniformly over `base0` intersected with the marginal's
    /// sharp bound; each state carries the implied `p1`, which lands in
    /// [0, 1] by construction of the bound.
    pub fn grid(&self, points: usize) -> Result<StateGrid> {
        self.validate()?;
        let bound = self.duncan_davis();
        let Some(range) = self.base0.intersect(&bound) else {
            return Err(Error::InfeasibleSpace(format!(
                "base interval [{}, {}] misses the marginal bound [{}, {}]",
                self.base0.p_min, self.base0.p_max, bound.p_min, bound.p_max
            )));
        };
        let states = linspace(range.p_min, range.p_max, points)?
            .into_iter()
            .map(|p0| vec![p0, self.implied_p1(p0)])
            .collect();
        Ok(StateGrid {
            states,
            provenance: GridProvenance::Ecological {
                space: *self,
                points,
            },
        })
    }
}

/// Sharp bound on a group-conditional probability implied by the law of
/// total probability: knowing the marginal `p` and the shares alone,
/// `p0` must lie in `[max(0, (p - r1) / r0), min(1, p / r0)]`.
///
/// `share1 = 0` is admitted as a single-group limit; `share0` must be
/// positive.
pub fn duncan_davis(marginal: f64, share0: f64, share1: f64) -> Result<IntervalSpace> {
    let p = checked_probability("marginal", marginal)?;
    if share0 <= 0.0 {
        return Err(Error::ZeroShare { name: "share0" });
    }
    let lo = ((p - share1) / share0).max(0.0);
    let hi = (p / share0).min(1.0);
    Ok(IntervalSpace {
        p_min: lo,
        p_max: hi,
    })
}

/// Which space and resolution produced a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridProvenance {
    Interval {
        space: IntervalSpace,
        points: usize,
    },
    BoundedVariation {
        space: BoundedVariationSpace,
        points0: usize,
        points1: usize,
    },
    Ecological {
        space: EcologicalSpace,
        points: usize,
    },
}

/// Finite list of feasible states, ordered lexicographically by coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    /// One probability tuple per state; the first coordinate always belongs
    /// to the group being treated.
    pub states: Vec<Vec<f64>>,
    pub provenance: GridProvenance,
}

impl StateGrid {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of coordinates per state.
    pub fn arity(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }
}

/// `points` evenly spaced values including both endpoints. Degenerate spans
/// collapse to a singleton; otherwise at least two points are required.
fn linspace(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if lo == hi {
        return Ok(vec![lo]);
    }
    if points < 2 {
        return Err(Error::GridResolution(points));
    }
    let last = points - 1;
    Ok((0..points)
        .map(|i| {
            let t = i as f64 / last as f64;
            // Convex form keeps both endpoints exact.
            lo * (1.0 - t) + hi * t
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interval_grid_includes_endpoints() {
        let grid = IntervalSpace::new(0.0, 1.0).unwrap().grid(3).unwrap();
        let flat: Vec<f64> = grid.states.iter().map(|s| s[0]).collect();
        assert_eq!(flat, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn interval_grid_uniform_spacing() {
        let grid = IntervalSpace::new(0.2, 0.6).unwrap().grid(5).unwrap();
        let expected = [0.2, 0.3, 0.4, 0.5, 0.6];
        assert_eq!(grid.len(), 5);
        for (state, want) in grid.states.iter().zip(expected) {
            assert!((state[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_interval_yields_singleton() {
        let grid = IntervalSpace::new(0.4, 0.4).unwrap().grid(2).unwrap();
        assert_eq!(grid.states, vec![vec![0.4]]);
    }

    #[test]
    fn too_few_points_rejected() {
        assert_eq!(
            IntervalSpace::new(0.0, 1.0).unwrap().grid(1).unwrap_err(),
            Error::GridResolution(1)
        );
    }

    #[test]
    fn zero_band_forces_equal_coordinates() {
        let space = BoundedVariationSpace::with_unit_neighbor(
            IntervalSpace::new(0.1, 0.9).unwrap(),
            0.0,
            0.0,
        )
        .unwrap();
        let grid = space.grid(7, 5).unwrap();
        assert_eq!(grid.len(), 7);
        for state in &grid.states {
            assert_eq!(state[0], state[1]);
        }
    }

    #[test]
    fn band_grid_respects_spread() {
        // Parameters from the weighted-average illustration.
        let space = BoundedVariationSpace::with_unit_neighbor(
            IntervalSpace::new(0.2, 0.6).unwrap(),
            -0.1,
            0.1,
        )
        .unwrap();
        let grid = space.grid(50, 50).unwrap();
        assert_eq!(grid.len(), 2500);
        for state in &grid.states {
            assert!((state[0] - state[1]).abs() <= 0.1 + 1e-12);
            assert!(space.contains(state[0], state[1]));
        }
    }

    #[test]
    fn disjoint_band_is_infeasible() {
        let space = BoundedVariationSpace::new(
            IntervalSpace::new(0.0, 0.1).unwrap(),
            IntervalSpace::new(0.9, 1.0).unwrap(),
            -0.1,
            0.1,
        )
        .unwrap();
        assert!(matches!(
            space.grid(10, 10).unwrap_err(),
            Error::InfeasibleSpace(_)
        ));
    }

    #[test]
    fn duncan_davis_examples() {
        let b = duncan_davis(0.5, 0.7, 0.3).unwrap();
        assert!((b.p_min - 0.2857142857142857).abs() < 1e-12);
        assert!((b.p_max - 0.7142857142857143).abs() < 1e-12);

        let zero = duncan_davis(0.0, 0.5, 0.5).unwrap();
        assert_eq!((zero.p_min, zero.p_max), (0.0, 0.0));

        // Single-group limit.
        let single = duncan_davis(0.5, 1.0, 0.0).unwrap();
        assert!((single.p_min - 0.5).abs() < 1e-15);
        assert!((single.p_max - 0.5).abs() < 1e-15);

        assert!(duncan_davis(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn ecological_grid_stays_in_bound() {
        let space =
            EcologicalSpace::new(0.5, 0.7, 0.3, IntervalSpace::unit()).unwrap();
        let grid = space.grid(100).unwrap();
        assert_eq!(grid.len(), 100);
        let bound = space.duncan_davis();
        for state in &grid.states {
            assert!(bound.contains(state[0]));
            assert!((0.0..=1.0).contains(&state[1]));
            assert!((state[0] * 0.7 + state[1] * 0.3 - 0.5).abs() <= 1e-12);
        }
        // Symmetric split of the marginal.
        assert!((space.implied_p1(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ecological_infeasible_base() {
        let space = EcologicalSpace::new(
            0.9,
            0.5,
            0.5,
            IntervalSpace::new(0.0, 0.2).unwrap(),
        )
        .unwrap();
        // Bound is [0.8, 1.0]; base [0, 0.2] misses it.
        assert!(matches!(
            space.grid(10).unwrap_err(),
            Error::InfeasibleSpace(_)
        ));
    }

    #[test]
    fn family_feasibility() {
        let family = BoundedVariationFamily::new(
            vec![
                IntervalSpace::unit(),
                IntervalSpace::unit(),
                IntervalSpace::unit(),
            ],
            vec![(-0.1, 0.1), (-0.3, 0.0)],
        )
        .unwrap();
        assert!(family.contains(&[0.5, 0.45, 0.6]));
        assert!(!family.contains(&[0.5, 0.2, 0.6])); // first neighbor too far
        assert!(!family.contains(&[0.5, 0.45, 0.4])); // p0 - p2 must be <= 0
        assert!(!family.contains(&[0.5, 0.45]));
    }

    #[test]
    fn refining_a_grid_never_lowers_the_max() {
        // Doubling points (2n - 1) keeps the coarse grid as a subset, so the
        // grid maximum of any function is nondecreasing under refinement.
        let f = |p: f64| p * (1.0 - p) * (0.8 - p).abs();
        let space = IntervalSpace::new(0.0, 1.0).unwrap();
        let mut points = 11;
        let mut prev = f64::MIN;
        for _ in 0..5 {
            let max = space
                .grid(points)
                .unwrap()
                .states
                .iter()
                .map(|s| f(s[0]))
                .fold(f64::MIN, f64::max);
            assert!(max >= prev - 1e-15);
            prev = max;
            points = points * 2 - 1;
        }
    }

    proptest! {
        #[test]
        fn duncan_davis_contains_consistent_pairs(
            p0 in 0.0f64..=1.0,
            p1 in 0.0f64..=1.0,
            share0 in 0.05f64..0.95,
        ) {
            let share1 = 1.0 - share0;
            let marginal = p0 * share0 + p1 * share1;
            let bound = duncan_davis(marginal, share0, share1).unwrap();
            prop_assert!(bound.contains(p0));
            prop_assert!(bound.p_min <= bound.p_max + PROB_SLACK);
        }

        #[test]
        fn band_grid_states_feasible(
            lo0 in 0.0f64..0.5,
            width0 in 0.01f64..0.5,
            diff in 0.0f64..0.3,
            points0 in 2usize..12,
            points1 in 2usize..12,
        ) {
            let space = BoundedVariationSpace::with_unit_neighbor(
                IntervalSpace::new(lo0, lo0 + width0).unwrap(),
                -diff,
                diff,
            )
            .unwrap();
            let grid = space.grid(points0, points1).unwrap();
            for state in &grid.states {
                prop_assert!(space.contains(state[0], state[1]));
            }
        }

        #[test]
        fn ecological_grid_conserves_marginal(
            marginal in 0.0f64..=1.0,
            share0 in 0.05f64..0.95,
            points in 2usize..50,
        ) {
            let space = EcologicalSpace::new(
                marginal,
                share0,
                1.0 - share0,
                IntervalSpace::unit(),
            )
            .unwrap();
            let grid = space.grid(points).unwrap();
            for state in &grid.states {
                let recombined = state[0] * share0 + state[1] * (1.0 - share0);
                prop_assert!((recombined - marginal).abs() <= 1e-12);
            }
        }
    }
}
