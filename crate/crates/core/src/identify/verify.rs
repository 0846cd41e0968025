use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::{identify, TheoremId};
use crate::model::{
    check_homogeneity, covariate_histories, enumerate, validate_spec, Counterfactuals, DgpSpec, EstimandKind,
    HistoryDistribution, HomogeneityCondition, Regime, DEFAULT_HOMOGENEITY_TOL,
};
use crate::sampling::{augment_selection, matched_distribution, selection_probabilities, AvailableData, SamplingScheme};
use crate::scalar::{NumericMode, Scalar};

pub const FLOAT_EQUALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCheck {
    pub holds: bool,
    pub max_deviation: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneitySummary {
    pub condition: HomogeneityCondition,
    pub holds: bool,
    pub max_deviation: f64,
    pub offending: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub positivity_ok: bool,
    pub exchangeability_by_construction: bool,
    pub selection: SelectionCheck,
    pub homogeneity: Option<HomogeneitySummary>,
    pub clean: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target: String,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs_exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs_exact: Option<String>,
    pub abs_diff: f64,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub theorem: TheoremId,
    pub description: String,
    pub scheme: SamplingScheme,
    pub mode: NumericMode,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs_exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs_exact: Option<String>,
    /// Largest |lhs - rhs| over all compared targets.
    pub abs_diff: f64,
    pub comparisons: Vec<Comparison>,
    pub skipped_targets: Vec<String>,
    pub assumptions: AssumptionReport,
    /// Every comparison agrees numerically.
    pub numerically_equal: bool,
    /// Agreement asserted only when the assumption report is clean.
    pub equal: bool,
}

fn constant_groups<T: Scalar>(groups: Vec<(String, Vec<(String, T)>)>, tol: f64) -> SelectionCheck {
    let mut max_deviation: f64 = 0.0;
    let mut worst = String::new();
    for (g, items) in &groups {
        let Some((_, first)) = items.first() else { continue };
        for (label, v) in items {
            let d = (v.clone() - first.clone()).to_f64().abs();
            let differs = !v.same_as(first, tol);
            if d > max_deviation || (differs && worst.is_empty()) {
                max_deviation = max_deviation.max(d);
                if differs {
                    worst = format!("{g}: {label} = {v} vs {first}");
                }
            }
        }
    }
    let holds = worst.is_empty();
    SelectionCheck { holds, max_deviation, detail: if holds { "constant".into() } else { worst } }
}

fn conditional_rate<T: Scalar>(
    law: &HistoryDistribution<T>,
    probs: &[Vec<T>],
    idx: usize,
    stratum: impl Fn(&crate::model::Trajectory) -> bool,
) -> Option<T> {
    let mut num = T::zero();
    let mut den = T::zero();
    for ((t, p), q) in law.entries.iter().zip(probs) {
        if stratum(t) {
            den = den + p.clone();
            num = num + p.clone() * q[idx].clone();
        }
    }
    (!den.is_zero()).then(|| num / den)
}

/// Checks that selection probabilities depend only on what the scheme
/// allows, computed on the factual law before conditioning on inclusion.
pub fn selection_check<T: Scalar>(
    law: &HistoryDistribution<T>,
    scheme: &SamplingScheme,
    covariate_levels: usize,
) -> Result<SelectionCheck> {
    if scheme.is_matched() {
        return Ok(SelectionCheck { holds: true, max_deviation: 0.0, detail: "by construction".into() });
    }
    let probs = selection_probabilities(law, scheme)?;
    let mut groups: Vec<(String, Vec<(String, T)>)> = Vec::new();
    match scheme {
        SamplingScheme::CaseBase { .. } => {
            let mut items = Vec::new();
            for l in 0..covariate_levels {
                for a in [0u8, 1] {
                    if let Some(v) = conditional_rate(law, &probs, 0, |t| t.l0() == l && t.a0() == a) {
                        items.push((format!("l0={l} a0={a}"), v));
                    }
                }
            }
            groups.push(("Pr(S=1|L0,A0)".into(), items));
        }
        SamplingScheme::Survivor { .. } => {
            for l in 0..covariate_levels {
                let mut items = Vec::new();
                for a in [0u8, 1] {
                    if let Some(v) =
                        conditional_rate(law, &probs, 0, |t| t.l0() == l && t.a0() == a && !t.is_event())
                    {
                        items.push((format!("a0={a}"), v));
                    }
                }
                groups.push((format!("Pr(S=1|L0={l},A0,Y_K=0)"), items));
            }
        }
        SamplingScheme::RiskSetItt { .. } => {
            let mut items = Vec::new();
            for k in 0..law.periods {
                for l in 0..covariate_levels {
                    for a in [0u8, 1] {
                        let st = |t: &crate::model::Trajectory| t.at_risk(k) && t.l0() == l && t.a0() == a;
                        if let Some(v) = conditional_rate(law, &probs, k, st) {
                            items.push((format!("k={k} l0={l} a0={a}"), v));
                        }
                    }
                }
            }
            groups.push(("Pr(S_k=1|Y_k=0,L0,A0)".into(), items));
        }
        SamplingScheme::RiskSetPp { adherent_pool, .. } => {
            let mut items = Vec::new();
            for k in 0..law.periods {
                for hist in covariate_histories(covariate_levels, k + 1) {
                    for a in [0u8, 1] {
                        let st = |t: &crate::model::Trajectory| {
                            t.at_risk(k)
                                && t.l[..=k] == hist[..]
                                && t.a[k] == a
                                && (!adherent_pool || t.adherent_through(k))
                        };
                        if let Some(v) = conditional_rate(law, &probs, k, st) {
                            items.push((format!("k={k} l={hist:?} a_k={a}"), v));
                        }
                    }
                }
            }
            groups.push(("Pr(S_k=1|Y_k=0,history)".into(), items));
        }
        SamplingScheme::Matched { .. } => unreachable!(),
    }
    Ok(constant_groups(groups, FLOAT_EQUALITY_TOL))
}

/// Evaluation targets: (estimand, stratum of the functional to compare).
fn targets(spec: &DgpSpec, id: TheoremId) -> Vec<(EstimandKind, Option<usize>)> {
    let levels = 0..spec.covariate_levels;
    let periods = 0..spec.periods;
    match id {
        TheoremId::CaseBaseMarginalRr | TheoremId::MatchedCaseBaseRr => vec![(EstimandKind::MarginalRiskRatio, None)],
        TheoremId::CaseBaseConditionalRr => {
            levels.map(|l0| (EstimandKind::ConditionalRiskRatio { l0 }, Some(l0))).collect()
        }
        TheoremId::CollapsedRr => levels.map(|l0| (EstimandKind::MarginalRiskRatio, Some(l0))).collect(),
        TheoremId::SurvivorConditionalOr => {
            levels.map(|l0| (EstimandKind::ConditionalOddsRatio { l0 }, Some(l0))).collect()
        }
        TheoremId::MatchedSurvivorOr => levels.map(|l0| (EstimandKind::ConditionalOddsRatio { l0 }, None)).collect(),
        TheoremId::RiskSetMarginalHr => periods.map(|k| (EstimandKind::MarginalHazardRatioItt { k }, None)).collect(),
        TheoremId::RiskSetConditionalHr => periods
            .flat_map(|k| levels.clone().map(move |l0| (EstimandKind::ConditionalHazardRatioItt { k, l0 }, Some(l0))))
            .collect(),
        TheoremId::RiskSetPerProtocolHr => periods.map(|k| (EstimandKind::MarginalHazardRatioPp { k }, None)).collect(),
        TheoremId::MatchedRiskSetHr => periods
            .flat_map(|k| levels.clone().map(move |l0| (EstimandKind::ConditionalHazardRatioItt { k, l0 }, None)))
            .collect(),
        TheoremId::MatchedRiskSetPerProtocolHr => periods
            .flat_map(|k| {
                covariate_histories(spec.covariate_levels, k + 1)
                    .into_iter()
                    .map(move |history| (EstimandKind::ConditionalHazardRatioPp { k, history }, None))
            })
            .collect(),
    }
}

/// Build the available law from `spec` under `scheme` and evaluate the
/// functional of `id`.
pub fn available_data<T: Scalar>(spec: &DgpSpec, scheme: &SamplingScheme) -> Result<AvailableData<T>> {
    scheme.check(spec)?;
    if scheme.is_matched() {
        Ok(AvailableData::Matched(matched_distribution(spec, scheme)?))
    } else {
        let law = enumerate::<T>(spec, Regime::Natural)?;
        Ok(AvailableData::Cohort(augment_selection(&law, scheme, spec.covariate_levels)?))
    }
}

/// Compare the identifying functional with its target estimand(s).
pub fn verify_theorem<T: Scalar>(spec: &DgpSpec, scheme: &SamplingScheme, id: TheoremId) -> Result<VerificationRecord> {
    id.check_scheme(scheme)?;
    scheme.check(spec)?;
    let validation = validate_spec(spec);
    let natural = enumerate::<T>(spec, Regime::Natural)?;
    let avail = if scheme.is_matched() {
        AvailableData::Matched(matched_distribution(spec, scheme)?)
    } else {
        AvailableData::Cohort(augment_selection(&natural, scheme, spec.covariate_levels)?)
    };
    let lhs = identify(&avail, id)?;
    let selection = selection_check(&natural, scheme, spec.covariate_levels)?;
    let homogeneity = match id.homogeneity() {
        Some(cond) => {
            let r = check_homogeneity::<T>(spec, cond, DEFAULT_HOMOGENEITY_TOL)?;
            Some(HomogeneitySummary {
                condition: cond,
                holds: r.holds,
                max_deviation: r.max_deviation,
                offending: r.offending,
            })
        }
        None => None,
    };
    let cf = Counterfactuals::<T>::new(spec);
    let mut comparisons = Vec::new();
    let mut skipped = Vec::new();
    for (kind, stratum) in targets(spec, id) {
        let label = match stratum {
            Some(l0) if !matches!(kind, EstimandKind::ConditionalRiskRatio { .. } | EstimandKind::ConditionalOddsRatio { .. } | EstimandKind::ConditionalHazardRatioItt { .. }) => {
                format!("{kind} vs stratum l0={l0}")
            }
            _ => kind.to_string(),
        };
        let rhs = match cf.evaluate(&kind) {
            Ok(v) => v,
            Err(Error::DegenerateEstimand(_)) => {
                skipped.push(label);
                continue;
            }
            Err(e) => return Err(e),
        };
        let lhs_v = match stratum {
            Some(l0) => match lhs.strata.iter().find(|(l, _)| *l == l0) {
                Some((_, v)) => v.clone(),
                None => {
                    skipped.push(label);
                    continue;
                }
            },
            None => lhs.value.clone(),
        };
        comparisons.push(Comparison {
            target: label,
            lhs: lhs_v.to_f64(),
            rhs: rhs.to_f64(),
            lhs_exact: lhs_v.to_rational().map(|r| r.to_string()),
            rhs_exact: rhs.to_rational().map(|r| r.to_string()),
            abs_diff: (lhs_v.clone() - rhs.clone()).to_f64().abs(),
            equal: lhs_v.same_as(&rhs, FLOAT_EQUALITY_TOL),
        });
    }
    if comparisons.is_empty() {
        return Err(Error::DegenerateEstimand(format!("{id}: no target with positive mass")));
    }
    let clean = validation.positivity_ok
        && validation.exchangeability_by_construction
        && selection.holds
        && homogeneity.as_ref().is_none_or(|h| h.holds);
    let numerically_equal = comparisons.iter().all(|c| c.equal);
    let first = &comparisons[0];
    Ok(VerificationRecord {
        theorem: id,
        description: id.description().to_string(),
        scheme: scheme.clone(),
        mode: T::MODE,
        lhs: first.lhs,
        rhs: first.rhs,
        lhs_exact: first.lhs_exact.clone(),
        rhs_exact: first.rhs_exact.clone(),
        abs_diff: comparisons.iter().map(|c| c.abs_diff).fold(0.0, f64::max),
        skipped_targets: skipped,
        assumptions: AssumptionReport {
            positivity_ok: validation.positivity_ok,
            exchangeability_by_construction: validation.exchangeability_by_construction,
            selection,
            homogeneity,
            clean,
        },
        numerically_equal,
        equal: clean && numerically_equal,
        comparisons,
    })
}
