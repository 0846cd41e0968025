use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use super::logistic::{logistic_timevarying_weights, PropensityModel};
use crate::identify::functionals::per_protocol_ratio_with;
use crate::identify::{
    identify, propensity_tables, Functional, HistoryKey, PropensityForm, PropensityTables, TheoremId,
};
use crate::sampling::{AvailableData, CaseControlDataset, Study};

/// Saturated control exposure frequencies. Every stratum a case or control
/// needs a weight for must have at least one selected control.
pub fn fit_propensities(data: &CaseControlDataset, form: PropensityForm) -> Result<PropensityTables<f64>> {
    let law = data.empirical_law();
    let tables = propensity_tables(&law, form);
    let mut missing = BTreeSet::new();
    for (rec, _) in &law.records {
        let t = &rec.traj;
        match form {
            PropensityForm::Baseline => {
                if tables.baseline.get(&t.l0()).is_none_or(|c| c.total == 0.0) {
                    missing.insert(format!("l0={}", t.l0()));
                }
            }
            PropensityForm::TimeVarying => {
                for k in 0..t.periods_observed() {
                    if !t.adherent_through(k.saturating_sub(1)) {
                        break;
                    }
                    let key = HistoryKey { k, l: t.l[..=k].to_vec(), a_past: t.a[..k].to_vec() };
                    if tables.time_varying.get(&key).is_none_or(|c| c.total == 0.0) {
                        missing.insert(format!("k={k} l={:?} a={:?}", key.l, key.a_past));
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::EmptyStratum(missing.into_iter().collect()));
    }
    Ok(tables)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub theorem: TheoremId,
    /// Headline value (first stratum for stratified functionals).
    pub value: f64,
    pub strata: Vec<(usize, f64)>,
    pub n_cases: usize,
    pub n_records: usize,
}

/// Plug-in analogue of the identifying functional: the same summation
/// applied to the empirical distribution of the study.
pub fn estimate_functional(study: &Study, id: TheoremId) -> Result<PointEstimate> {
    estimate_functional_with(study, id, &PropensityModel::Saturated)
}

/// [`identify`] on float data, with time-varying weights from `model`.
pub fn identify_with(avail: &AvailableData<f64>, id: TheoremId, model: &PropensityModel) -> Result<Functional<f64>> {
    match (avail, id, model) {
        (AvailableData::Cohort(law), TheoremId::RiskSetPerProtocolHr, PropensityModel::Logistic { terms }) => {
            id.check_scheme(avail.scheme())?;
            let w = logistic_timevarying_weights(law, terms)?;
            per_protocol_ratio_with(law, &w).map(Functional::scalar)
        }
        _ => identify(avail, id),
    }
}

pub fn estimate_functional_with(study: &Study, id: TheoremId, model: &PropensityModel) -> Result<PointEstimate> {
    id.check_scheme(study.scheme())?;
    let (avail, n_cases, n_records) = match study {
        Study::CaseControl(d) => (AvailableData::Cohort(d.empirical_law()), d.n_cases(), d.subjects.len()),
        Study::Matched(m) => (AvailableData::Matched(m.empirical_law()), m.sets.len(), m.sets.len()),
    };
    let f = identify_with(&avail, id, model)?;
    Ok(PointEstimate { theorem: id, value: f.value, strata: f.strata, n_cases, n_records })
}
