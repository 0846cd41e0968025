//! Identification functionals and their end-to-end verification against
//! counterfactual estimands.

pub mod functionals;
mod verify;
mod weights;

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::HomogeneityCondition;
use crate::sampling::{AvailableData, MatchReference, PerStratum, SamplingScheme, SchemeFamily};
use crate::scalar::{ratio, Scalar};

pub use functionals::Functional;
pub use verify::{
    available_data, selection_check, verify_theorem, AssumptionReport, Comparison, HomogeneitySummary, SelectionCheck,
    VerificationRecord,
};
pub use weights::{
    baseline_weights, propensity_tables, timevarying_weights, weights_from_tables, HistoryKey, PropensityCell,
    PropensityForm, PropensityTables, WeightFunction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TheoremId {
    CaseBaseMarginalRr,
    CaseBaseConditionalRr,
    CollapsedRr,
    SurvivorConditionalOr,
    RiskSetMarginalHr,
    RiskSetConditionalHr,
    RiskSetPerProtocolHr,
    MatchedCaseBaseRr,
    MatchedSurvivorOr,
    MatchedRiskSetHr,
    MatchedRiskSetPerProtocolHr,
}

impl TheoremId {
    pub const ALL: [TheoremId; 11] = [
        TheoremId::CaseBaseMarginalRr,
        TheoremId::CaseBaseConditionalRr,
        TheoremId::CollapsedRr,
        TheoremId::SurvivorConditionalOr,
        TheoremId::RiskSetMarginalHr,
        TheoremId::RiskSetConditionalHr,
        TheoremId::RiskSetPerProtocolHr,
        TheoremId::MatchedCaseBaseRr,
        TheoremId::MatchedSurvivorOr,
        TheoremId::MatchedRiskSetHr,
        TheoremId::MatchedRiskSetPerProtocolHr,
    ];

    /// Short stable identifier used in reports and configuration files.
    pub fn code(&self) -> &'static str {
        match self {
            TheoremId::CaseBaseMarginalRr => "T1",
            TheoremId::CaseBaseConditionalRr => "T2",
            TheoremId::CollapsedRr => "T2c",
            TheoremId::SurvivorConditionalOr => "T3",
            TheoremId::RiskSetMarginalHr => "T4",
            TheoremId::RiskSetConditionalHr => "T5",
            TheoremId::RiskSetPerProtocolHr => "T6",
            TheoremId::MatchedCaseBaseRr => "T7",
            TheoremId::MatchedSurvivorOr => "T8",
            TheoremId::MatchedRiskSetHr => "T9",
            TheoremId::MatchedRiskSetPerProtocolHr => "T10",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            TheoremId::CaseBaseMarginalRr => "case-base, weighted, marginal risk ratio",
            TheoremId::CaseBaseConditionalRr => "case-base, conditional risk ratio",
            TheoremId::CollapsedRr => "case-base, collapsed conditional risk ratio",
            TheoremId::SurvivorConditionalOr => "survivor, conditional odds ratio",
            TheoremId::RiskSetMarginalHr => "risk-set, weighted, marginal hazard ratio",
            TheoremId::RiskSetConditionalHr => "risk-set, conditional hazard ratio",
            TheoremId::RiskSetPerProtocolHr => "risk-set, per-protocol hazard ratio",
            TheoremId::MatchedCaseBaseRr => "matched at baseline, risk ratio",
            TheoremId::MatchedSurvivorOr => "matched to survivors, odds ratio",
            TheoremId::MatchedRiskSetHr => "matched in risk set, hazard ratio",
            TheoremId::MatchedRiskSetPerProtocolHr => "matched in adherent risk set, per-protocol hazard ratio",
        }
    }

    pub fn family(&self) -> SchemeFamily {
        match self {
            TheoremId::CaseBaseMarginalRr | TheoremId::CaseBaseConditionalRr | TheoremId::CollapsedRr => {
                SchemeFamily::CaseBase
            }
            TheoremId::SurvivorConditionalOr => SchemeFamily::Survivor,
            TheoremId::RiskSetMarginalHr | TheoremId::RiskSetConditionalHr => SchemeFamily::RiskSetItt,
            TheoremId::RiskSetPerProtocolHr => SchemeFamily::RiskSetPp,
            TheoremId::MatchedCaseBaseRr => SchemeFamily::Matched(MatchReference::M1),
            TheoremId::MatchedSurvivorOr => SchemeFamily::Matched(MatchReference::M2),
            TheoremId::MatchedRiskSetHr => SchemeFamily::Matched(MatchReference::M3),
            TheoremId::MatchedRiskSetPerProtocolHr => SchemeFamily::Matched(MatchReference::M4),
        }
    }

    /// Constancy condition the equality relies on, if any.
    pub fn homogeneity(&self) -> Option<HomogeneityCondition> {
        use HomogeneityCondition::*;
        match self {
            TheoremId::CaseBaseMarginalRr | TheoremId::CaseBaseConditionalRr | TheoremId::SurvivorConditionalOr => {
                None
            }
            TheoremId::CollapsedRr => Some(H1),
            TheoremId::RiskSetMarginalHr => Some(H2),
            TheoremId::RiskSetConditionalHr => Some(H3),
            TheoremId::RiskSetPerProtocolHr => Some(H4),
            TheoremId::MatchedCaseBaseRr => Some(H1),
            TheoremId::MatchedSurvivorOr => Some(H5),
            TheoremId::MatchedRiskSetHr => Some(H6),
            TheoremId::MatchedRiskSetPerProtocolHr => Some(H7),
        }
    }

    /// Whether the functional is evaluated per baseline covariate stratum.
    pub fn is_stratified(&self) -> bool {
        matches!(
            self,
            TheoremId::CaseBaseConditionalRr
                | TheoremId::CollapsedRr
                | TheoremId::SurvivorConditionalOr
                | TheoremId::RiskSetConditionalHr
        )
    }

    /// A compatible scheme with default parameters.
    pub fn default_scheme(&self) -> SamplingScheme {
        let delta: BigRational = ratio(1, 10);
        match self.family() {
            SchemeFamily::CaseBase => SamplingScheme::CaseBase { delta },
            SchemeFamily::Survivor => SamplingScheme::Survivor { delta: PerStratum::Constant(delta) },
            SchemeFamily::RiskSetItt => SamplingScheme::RiskSetItt { delta, controls_per_case: None },
            SchemeFamily::RiskSetPp => {
                SamplingScheme::RiskSetPp { delta, controls_per_case: None, adherent_pool: false }
            }
            SchemeFamily::Matched(reference) => SamplingScheme::Matched { reference, m: 2, exact_coords: vec![] },
        }
    }

    pub fn check_scheme(&self, scheme: &SamplingScheme) -> Result<()> {
        if scheme.family() != self.family() {
            return Err(Error::SchemeMismatch(format!(
                "{} needs {} sampling, got {}",
                self.code(),
                self.family(),
                scheme.family()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown theorem id {s:?}")))
    }
}

impl Serialize for TheoremId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for TheoremId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Evaluate the identifying functional of `id` on an available-data law.
pub fn identify<T: Scalar>(avail: &AvailableData<T>, id: TheoremId) -> Result<Functional<T>> {
    id.check_scheme(avail.scheme())?;
    use functionals::*;
    match (avail, id) {
        (AvailableData::Cohort(law), TheoremId::CaseBaseMarginalRr) => scalar(weighted_case_base_ratio(law)),
        (AvailableData::Cohort(law), TheoremId::CaseBaseConditionalRr)
        | (AvailableData::Cohort(law), TheoremId::CollapsedRr)
        | (AvailableData::Cohort(law), TheoremId::SurvivorConditionalOr) => conditional_exposure_odds_ratio(law),
        (AvailableData::Cohort(law), TheoremId::RiskSetMarginalHr) => scalar(weighted_selection_count_ratio(law)),
        (AvailableData::Cohort(law), TheoremId::RiskSetConditionalHr) => conditional_selection_count_ratio(law),
        (AvailableData::Cohort(law), TheoremId::RiskSetPerProtocolHr) => scalar(per_protocol_weighted_ratio(law)),
        (AvailableData::Matched(law), _) => scalar(discordant_pair_ratio(law)),
        (AvailableData::Cohort(_), _) => Err(Error::SchemeMismatch(format!("{id} needs matched sets"))),
    }
}
