//! Scenario documents: a single JSON object carrying welfare, state space,
//! sampling design, estimator, and engine settings.
//!
//! Parsing validates every domain invariant up front so later stages only
//! see consistent inputs. Serialization of a parsed scenario is canonical:
//! parse → serialize → parse is the identity.

use serde::{Deserialize, Serialize};

use maxregret_core::decision::{FullWelfare, WelfareSpec};
use maxregret_core::engine::{EngineConfig, EngineMode};
use maxregret_core::estimators::{Estimator, SamplingDesign};
use maxregret_core::state_space::{
    BoundedVariationSpace, EcologicalSpace, IntervalSpace, StateGrid,
};

use crate::CliError;

/// Default axis resolutions per space shape: a single interval gets a fine
/// grid, two-group spaces the standard 50-per-axis, the ecological
/// constraint 100 points along its one free axis.
const DEFAULT_INTERVAL_POINTS: usize = 1001;
const DEFAULT_BAND_POINTS: usize = 50;
const DEFAULT_ECO_POINTS: usize = 100;

/// Welfare section: either the normalized aggressive-treatment welfare or
/// the four raw values, which must be neutralizing. Values are validated in
/// [`resolve`](WelfareInput::resolve), not during deserialization, so the
/// violated inequality shows up in the error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WelfareInput {
    Normalized { aggressive: f64 },
    Full(FullWelfare),
}

impl WelfareInput {
    pub fn resolve(&self) -> Result<WelfareSpec, CliError> {
        match self {
            WelfareInput::Normalized { aggressive } => Ok(WelfareSpec::new(*aggressive)?),
            WelfareInput::Full(full) => Ok(full.normalize()?),
        }
    }
}

/// State-space section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpaceSpec {
    Interval(IntervalSpace),
    BoundedVariation(BoundedVariationSpace),
    Ecological(EcologicalSpace),
}

impl SpaceSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            SpaceSpec::Interval(space) => space.validate()?,
            SpaceSpec::BoundedVariation(space) => space.validate()?,
            SpaceSpec::Ecological(space) => space.validate()?,
        }
        Ok(())
    }

    /// Number of probability coordinates per state.
    pub fn arity(&self) -> usize {
        match self {
            SpaceSpec::Interval(_) => 1,
            SpaceSpec::BoundedVariation(_) | SpaceSpec::Ecological(_) => 2,
        }
    }

    /// Range of the target group's probability, for threshold checks.
    pub fn target_range(&self) -> Result<IntervalSpace, CliError> {
        match self {
            SpaceSpec::Interval(space) => Ok(*space),
            SpaceSpec::BoundedVariation(space) => Ok(space.interval0),
            SpaceSpec::Ecological(space) => space
                .base0
                .intersect(&space.duncan_davis())
                .ok_or_else(|| {
                    CliError::Core(maxregret_core::Error::InfeasibleSpace(
                        "base interval misses the marginal bound".to_string(),
                    ))
                }),
        }
    }

    pub fn grid(&self, points0: usize, points1: usize) -> Result<StateGrid, CliError> {
        Ok(match self {
            SpaceSpec::Interval(space) => space.grid(points0)?,
            SpaceSpec::BoundedVariation(space) => space.grid(points0, points1)?,
            SpaceSpec::Ecological(space) => space.grid(points0)?,
        })
    }
}

/// Engine overrides from the document; anything left out falls back to the
/// command-line flags and then to defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSpec {
    pub mode: Option<EngineMode>,
    pub draws: Option<u32>,
    pub seed: Option<u64>,
    pub parallel: Option<bool>,
    pub enumeration_cap: Option<u64>,
}

/// Grid overrides from the document.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub grid0: Option<usize>,
    pub grid1: Option<usize>,
}

/// A full scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub welfare: WelfareInput,
    pub space: SpaceSpec,
    pub design: SamplingDesign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<Estimator>,
    #[serde(default)]
    pub engine: EngineSpec,
    #[serde(default)]
    pub grids: GridSpec,
}

impl Scenario {
    /// Parses and fully validates a scenario document.
    pub fn parse(text: &str) -> Result<Scenario, CliError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(CliError::Parse)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Checks every cross-field invariant: welfare resolves, the space is
    /// well formed, the design matches the space arity, and the estimator
    /// (when present) is compatible with both.
    pub fn validate(&self) -> Result<(), CliError> {
        self.welfare.resolve()?;
        self.space.validate()?;

        let arity = self.space.arity();
        if self.design.sizes.is_empty() {
            return Err(CliError::Usage("design.sizes must not be empty".to_string()));
        }
        if self.design.sizes.len() != arity {
            return Err(CliError::Usage(format!(
                "design has {} groups but the space describes {} (sizes must match the state arity)",
                self.design.sizes.len(),
                arity
            )));
        }

        if let Some(estimator) = &self.estimator {
            estimator.validate()?;
            self.validate_estimator(estimator)?;
        }

        // Engine settings that can be rejected without running anything.
        if self.engine.draws == Some(0) {
            return Err(CliError::Core(maxregret_core::Error::NoDraws));
        }
        Ok(())
    }

    fn validate_estimator(&self, estimator: &Estimator) -> Result<(), CliError> {
        let groups = self.design.sizes.len();
        match estimator {
            Estimator::SampleRate { covariate } => {
                if *covariate >= groups {
                    return Err(CliError::Usage(format!(
                        "estimator covariate {covariate} outside the {groups}-group design"
                    )));
                }
            }
            Estimator::Weighted2 { .. } => {
                if groups != 2 {
                    return Err(CliError::Usage(format!(
                        "weighted2 needs a 2-group design, got {groups}"
                    )));
                }
            }
            Estimator::WeightedK { weights } => {
                if weights.len() != groups {
                    return Err(CliError::Usage(format!(
                        "weighted_k has {} weights for a {groups}-group design",
                        weights.len()
                    )));
                }
            }
            Estimator::ConstrainedLs {
                marginal,
                share0,
                share1,
            } => {
                let SpaceSpec::Ecological(space) = &self.space else {
                    return Err(CliError::Usage(
                        "constrained_ls needs an ecological space".to_string(),
                    ));
                };
                let consistent = (marginal - space.marginal).abs() <= 1e-9
                    && (share0 - space.share0).abs() <= 1e-9
                    && (share1 - space.share1).abs() <= 1e-9;
                if !consistent {
                    return Err(CliError::Usage(format!(
                        "constrained_ls parameters (marginal {marginal}, shares {share0}/{share1}) \
                         disagree with the ecological space ({}, {}/{})",
                        space.marginal, space.share0, space.share1
                    )));
                }
            }
            Estimator::Constant { .. } | Estimator::Randomized(_) | Estimator::Pooled => {}
        }
        Ok(())
    }

    pub fn welfare_spec(&self) -> Result<WelfareSpec, CliError> {
        self.welfare.resolve()
    }

    /// Rejects scenarios where the target group's feasible range does not
    /// straddle the decision threshold — one option dominates and there is
    /// no regret problem to solve.
    pub fn require_informative(&self) -> Result<(), CliError> {
        let welfare = self.welfare_spec()?;
        let range = self.space.target_range()?;
        let threshold = welfare.threshold();
        if range.p_min < threshold && threshold < range.p_max {
            Ok(())
        } else {
            Err(CliError::Core(maxregret_core::Error::TrivialProblem {
                threshold,
                lo: range.p_min,
                hi: range.p_max,
            }))
        }
    }

    /// Per-axis grid resolutions after applying overrides and the per-space
    /// defaults.
    pub fn resolve_grids(&self, flag0: Option<usize>, flag1: Option<usize>) -> (usize, usize) {
        let default0 = match self.space {
            SpaceSpec::Interval(_) => DEFAULT_INTERVAL_POINTS,
            SpaceSpec::BoundedVariation(_) => DEFAULT_BAND_POINTS,
            SpaceSpec::Ecological(_) => DEFAULT_ECO_POINTS,
        };
        let grid0 = flag0.or(self.grids.grid0).unwrap_or(default0);
        let grid1 = flag1.or(self.grids.grid1).unwrap_or(DEFAULT_BAND_POINTS);
        (grid0, grid1)
    }

    /// Final engine configuration: command-line flags win over the document,
    /// and the mode defaults to exact enumeration whenever the design fits
    /// under the cell cap.
    pub fn resolve_engine(&self, flags: &EngineOverrides) -> EngineConfig {
        let mut cfg = EngineConfig::default();
        cfg.enumeration_cap = flags
            .enumeration_cap
            .or(self.engine.enumeration_cap)
            .unwrap_or(cfg.enumeration_cap);
        cfg.mode = flags.mode.or(self.engine.mode).unwrap_or({
            if self.design.enumeration_cells() <= u128::from(cfg.enumeration_cap) {
                EngineMode::Exact
            } else {
                EngineMode::MonteCarlo
            }
        });
        cfg.draws = flags.draws.or(self.engine.draws).unwrap_or(cfg.draws);
        cfg.seed = flags.seed.or(self.engine.seed).unwrap_or(cfg.seed);
        cfg.parallel = flags
            .parallel
            .or(self.engine.parallel)
            .unwrap_or(cfg.parallel);
        cfg
    }
}

/// Engine-related command-line overrides, highest precedence.
#[derive(Debug, Clone, Copy, Default)]
pub struct EngineOverrides {
    pub mode: Option<EngineMode>,
    pub draws: Option<u32>,
    pub seed: Option<u64>,
    pub parallel: Option<bool>,
    pub enumeration_cap: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_scenario_json() -> &'static str {
        r#"{
            "welfare": {"aggressive": 0.6},
            "space": {
                "type": "bounded_variation",
                "interval0": {"p_min": 0.2, "p_max": 0.6},
                "diff_min": -0.1,
                "diff_max": 0.1
            },
            "design": {"sizes": [10, 10]},
            "estimator": {"type": "weighted2", "weight0": 0.8}
        }"#
    }

    #[test]
    fn parses_the_two_group_scenario() {
        let scenario = Scenario::parse(table_scenario_json()).unwrap();
        assert_eq!(scenario.welfare_spec().unwrap().aggressive(), 0.6);
        let SpaceSpec::BoundedVariation(space) = &scenario.space else {
            panic!("expected a bounded-variation space");
        };
        assert_eq!(space.interval0.p_min, 0.2);
        assert_eq!(space.interval0.p_max, 0.6);
        assert_eq!(space.interval1, IntervalSpace::unit());
        assert_eq!((space.diff_min, space.diff_max), (-0.1, 0.1));
        assert_eq!(scenario.resolve_grids(None, None), (50, 50));
    }

    #[test]
    fn round_trip_is_identity() {
        let scenario = Scenario::parse(table_scenario_json()).unwrap();
        let canonical = serde_json::to_string_pretty(&scenario).unwrap();
        let reparsed = Scenario::parse(&canonical).unwrap();
        assert_eq!(scenario, reparsed);
        // And canonical text is stable under a second round.
        assert_eq!(canonical, serde_json::to_string_pretty(&reparsed).unwrap());
    }

    #[test]
    fn rejects_welfare_outside_unit_interval() {
        let text = r#"{
            "welfare": {"aggressive": 1.2},
            "space": {"type": "interval", "p_min": 0.0, "p_max": 1.0},
            "design": {"sizes": [5]}
        }"#;
        let err = Scenario::parse(text).unwrap_err();
        assert!(err.to_string().contains("0 < u < 1"), "got: {err}");
    }

    #[test]
    fn rejects_inconsistent_shares() {
        let text = r#"{
            "welfare": {"aggressive": 0.5},
            "space": {
                "type": "ecological",
                "marginal": 0.5, "share0": 0.6, "share1": 0.3,
                "base0": {"p_min": 0.0, "p_max": 1.0}
            },
            "design": {"sizes": [10, 10]}
        }"#;
        let err = Scenario::parse(text).unwrap_err();
        assert!(err.to_string().contains("sum to 1"), "got: {err}");
    }

    #[test]
    fn rejects_arity_mismatch() {
        let text = r#"{
            "welfare": {"aggressive": 0.5},
            "space": {"type": "interval", "p_min": 0.0, "p_max": 1.0},
            "design": {"sizes": [5, 5]}
        }"#;
        assert!(Scenario::parse(text).is_err());
    }

    #[test]
    fn rejects_estimator_space_mismatch() {
        let text = r#"{
            "welfare": {"aggressive": 0.5},
            "space": {
                "type": "bounded_variation",
                "interval0": {"p_min": 0.2, "p_max": 0.6},
                "diff_min": -0.1, "diff_max": 0.1
            },
            "design": {"sizes": [10, 10]},
            "estimator": {"type": "constrained_ls", "marginal": 0.5, "share0": 0.7, "share1": 0.3}
        }"#;
        let err = Scenario::parse(text).unwrap_err();
        assert!(err.to_string().contains("ecological"), "got: {err}");
    }

    #[test]
    fn full_welfare_input_normalizes() {
        let text = r#"{
            "welfare": {
                "surveillance_healthy": 2.0, "surveillance_ill": 0.0,
                "aggressive_healthy": 1.2, "aggressive_ill": 1.2
            },
            "space": {"type": "interval", "p_min": 0.0, "p_max": 1.0},
            "design": {"sizes": [5]}
        }"#;
        let scenario = Scenario::parse(text).unwrap();
        assert!((scenario.welfare_spec().unwrap().aggressive() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn trivial_problem_detected() {
        let text = r#"{
            "welfare": {"aggressive": 0.6},
            "space": {"type": "interval", "p_min": 0.5, "p_max": 0.9},
            "design": {"sizes": [5]}
        }"#;
        let scenario = Scenario::parse(text).unwrap();
        assert!(matches!(
            scenario.require_informative().unwrap_err(),
            CliError::Core(maxregret_core::Error::TrivialProblem { .. })
        ));
    }

    #[test]
    fn engine_resolution_prefers_flags_then_document_then_auto() {
        let mut scenario = Scenario::parse(table_scenario_json()).unwrap();
        // Auto: enumerable design defaults to exact.
        let cfg = scenario.resolve_engine(&EngineOverrides::default());
        assert_eq!(cfg.mode, EngineMode::Exact);

        scenario.engine.mode = Some(EngineMode::MonteCarlo);
        scenario.engine.draws = Some(123);
        let cfg = scenario.resolve_engine(&EngineOverrides::default());
        assert_eq!(cfg.mode, EngineMode::MonteCarlo);
        assert_eq!(cfg.draws, 123);

        let flags = EngineOverrides {
            mode: Some(EngineMode::Exact),
            draws: Some(999),
            ..EngineOverrides::default()
        };
        let cfg = scenario.resolve_engine(&flags);
        assert_eq!(cfg.mode, EngineMode::Exact);
        assert_eq!(cfg.draws, 999);

        // A design too large to enumerate auto-selects Monte Carlo.
        scenario.engine = EngineSpec::default();
        scenario.design = SamplingDesign::new(vec![10_000, 10_000]);
        let cfg = scenario.resolve_engine(&EngineOverrides::default());
        assert_eq!(cfg.mode, EngineMode::MonteCarlo);
    }
}
