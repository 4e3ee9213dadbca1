//! Built-in scenarios for one-command reproduction runs.

use maxregret_core::decision::WelfareSpec;
use maxregret_core::estimators::Estimator;
use maxregret_core::state_space::{BoundedVariationSpace, EcologicalSpace, IntervalSpace};

use crate::scenario::{EngineSpec, GridSpec, Scenario, SpaceSpec, WelfareInput};

/// Sample-size pairs of the weighted-average study, in publication order.
pub const TABLE_DESIGNS: [(u32, u32); 6] = [(10, 10), (5, 15), (15, 5), (20, 20), (10, 30), (30, 10)];

/// The six weights whose maximum regrets are tabulated.
pub const TABLE_WEIGHTS: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Two-group weighted-average scenario: target group's probability in
/// [0.2, 0.6], groups within 0.1 of one another, aggressive welfare 0.6.
pub fn table_space() -> BoundedVariationSpace {
    BoundedVariationSpace::with_unit_neighbor(IntervalSpace::new(0.2, 0.6).unwrap(), -0.1, 0.1)
        .unwrap()
}

pub fn table_welfare() -> WelfareSpec {
    WelfareSpec::new(0.6).unwrap()
}

/// Ecological-inference scenario: marginal 1/2 split 0.7/0.3, no prior
/// restriction on the target group, aggressive welfare 1/2, constrained
/// least-squares estimation.
pub fn eco_scenario(size0: u32, size1: u32) -> Scenario {
    let space = EcologicalSpace::new(0.5, 0.7, 0.3, IntervalSpace::unit()).unwrap();
    Scenario {
        welfare: WelfareInput::Normalized { aggressive: 0.5 },
        space: SpaceSpec::Ecological(space),
        design: maxregret_core::estimators::SamplingDesign::new(vec![size0, size1]),
        estimator: Some(Estimator::ConstrainedLs {
            marginal: 0.5,
            share0: 0.7,
            share1: 0.3,
        }),
        engine: EngineSpec::default(),
        grids: GridSpec::default(),
    }
}
