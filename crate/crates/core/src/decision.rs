//! Welfare model, decision threshold, and per-realization regret.
//!
//! The patient's welfare depends on the care option and on whether the
//! illness is present. When aggressive treatment neutralizes the illness —
//! same welfare either way — welfare can be normalized so that surveillance
//! yields 1 for a healthy patient and 0 for an ill one. A single number in
//! (0, 1), the normalized welfare of aggressive treatment, then pins down the
//! whole problem: surveillance is optimal when the illness probability is at
//! most `1 - aggressive`, aggressive treatment when it is at least that.
//!
//! A plug-in rule decides from an estimated probability instead of the true
//! one. Its regret in a state is the welfare gap between the best option and
//! the chosen one, which is nonzero exactly when the estimate lands on the
//! wrong side of the threshold.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{checked_probability, Error, Result, PROB_SLACK};

/// The two care options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Treatment {
    /// Watchful waiting; better for a healthy patient.
    Surveillance,
    /// Immediate intervention; better for an ill patient.
    Aggressive,
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Treatment::Surveillance => write!(f, "A"),
            Treatment::Aggressive => write!(f, "B"),
        }
    }
}

/// Welfare of each care option by illness outcome, before normalization.
///
/// Valid instances satisfy `aggressive_ill > surveillance_ill` (treatment
/// helps the ill) and `surveillance_healthy > aggressive_healthy`
/// (treatment harms the healthy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullWelfare {
    /// Welfare of surveillance when the patient is healthy.
    pub surveillance_healthy: f64,
    /// Welfare of surveillance when the patient is ill.
    pub surveillance_ill: f64,
    /// Welfare of aggressive treatment when the patient is healthy.
    pub aggressive_healthy: f64,
    /// Welfare of aggressive treatment when the patient is ill.
    pub aggressive_ill: f64,
}

impl FullWelfare {
    pub fn new(
        surveillance_healthy: f64,
        surveillance_ill: f64,
        aggressive_healthy: f64,
        aggressive_ill: f64,
    ) -> Result<Self> {
        let w = FullWelfare {
            surveillance_healthy,
            surveillance_ill,
            aggressive_healthy,
            aggressive_ill,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.aggressive_ill > self.surveillance_ill
            && self.surveillance_healthy > self.aggressive_healthy;
        let finite = [
            self.surveillance_healthy,
            self.surveillance_ill,
            self.aggressive_healthy,
            self.aggressive_ill,
        ]
        .iter()
        .all(|v| v.is_finite());
        if ordered && finite {
            Ok(())
        } else {
            Err(Error::InvalidWelfare)
        }
    }

    /// Illness probability at which the two options have equal expected
    /// welfare. Strictly inside (0, 1) whenever the ordering invariants hold.
    pub fn threshold(&self) -> Result<f64> {
        self.validate()?;
        let healthy_gap = self.surveillance_healthy - self.aggressive_healthy;
        let ill_gap = self.aggressive_ill - self.surveillance_ill;
        Ok(healthy_gap / (healthy_gap + ill_gap))
    }

    /// Normalizes welfare so surveillance yields 1 when healthy and 0 when
    /// ill. Requires aggressive treatment to be neutralizing: equal welfare
    /// whether or not the illness is present.
    ///
    /// Decisions under the returned spec agree with expected-welfare
    /// comparisons under the original values for every estimate.
    pub fn normalize(&self) -> Result<WelfareSpec> {
        // Specific diagnoses first: a non-neutralizing or scale-free welfare
        // would otherwise surface as a generic ordering failure.
        if self.aggressive_healthy != self.aggressive_ill {
            return Err(Error::NonNeutralizing {
                healthy: self.aggressive_healthy,
                ill: self.aggressive_ill,
            });
        }
        let scale = self.surveillance_healthy - self.surveillance_ill;
        if scale == 0.0 {
            return Err(Error::DegenerateScale(self.surveillance_healthy));
        }
        self.validate()?;
        WelfareSpec::new((self.aggressive_healthy - self.surveillance_ill) / scale)
    }
}

/// Normalized welfare of aggressive treatment, strictly inside (0, 1).
///
/// Under the normalization the decision threshold is `1 - aggressive`:
/// surveillance is chosen when the (estimated) illness probability does not
/// exceed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WelfareSpec {
    aggressive: f64,
}

impl WelfareSpec {
    pub fn new(aggressive: f64) -> Result<Self> {
        if aggressive > 0.0 && aggressive < 1.0 {
            Ok(WelfareSpec { aggressive })
        } else {
            Err(Error::WelfareOutOfRange(aggressive))
        }
    }

    /// Normalized welfare of aggressive treatment.
    pub fn aggressive(&self) -> f64 {
        self.aggressive
    }

    /// Illness probability at which the two options tie.
    pub fn threshold(&self) -> f64 {
        1.0 - self.aggressive
    }

    /// Chooses a care option as if `estimate` were the true illness
    /// probability. The tie at the threshold resolves to surveillance, which
    /// keeps this rule consistent with [`error_indicator`]: an error toward
    /// aggressive treatment requires the estimate strictly past the threshold.
    ///
    /// [`error_indicator`]: WelfareSpec::error_indicator
    pub fn decide(&self, estimate: f64) -> Treatment {
        debug_assert!(
            (-PROB_SLACK..=1.0 + PROB_SLACK).contains(&estimate),
            "estimate out of [0, 1]: {estimate}"
        );
        if 1.0 - estimate >= self.aggressive {
            Treatment::Surveillance
        } else {
            Treatment::Aggressive
        }
    }

    /// Whether deciding from `estimate` errs relative to the true
    /// probability `illness_prob`, i.e. the two land on different sides of
    /// the threshold.
    pub fn error_indicator(&self, illness_prob: f64, estimate: f64) -> bool {
        self.decide(illness_prob) != self.decide(estimate)
    }

    /// Expected welfare of the better option at illness probability `p`.
    pub fn optimal_welfare(&self, p: f64) -> f64 {
        (1.0 - p).max(self.aggressive)
    }

    /// Welfare lost when deciding from `estimate` in a state with true
    /// probability `illness_prob`: the welfare gap between the options times
    /// the error indicator. Zero whenever both probabilities pick the same
    /// option, and never exceeds `max(1 - aggressive, aggressive)`.
    pub fn regret(&self, illness_prob: f64, estimate: f64) -> f64 {
        if self.error_indicator(illness_prob, estimate) {
            ((1.0 - illness_prob) - self.aggressive).abs()
        } else {
            0.0
        }
    }

    /// Welfare gap `|(1 - p) - aggressive|` between the two options at `p`.
    pub fn welfare_gap(&self, p: f64) -> f64 {
        ((1.0 - p) - self.aggressive).abs()
    }
}

impl TryFrom<f64> for WelfareSpec {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        WelfareSpec::new(value)
    }
}

impl From<WelfareSpec> for f64 {
    fn from(w: WelfareSpec) -> f64 {
        w.aggressive
    }
}

/// Validates a probability argument at an API boundary.
pub fn validate_probability(name: &'static str, value: f64) -> Result<f64> {
    checked_probability(name, value)
}
