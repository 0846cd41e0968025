use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HistoryDistribution, Regime, Trajectory};
use crate::sampling::matched::MatchedLaw;
use crate::sampling::scheme::SamplingScheme;
use crate::scalar::Scalar;

/// A trajectory together with its selection counts. Baseline schemes carry
/// a single count (S); risk-set schemes carry one count per window (S_k).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AvailableRecord {
    pub traj: Trajectory,
    pub selections: Vec<u32>,
}

impl AvailableRecord {
    pub fn selected(&self) -> bool {
        self.selections.iter().any(|&s| s > 0)
    }

    pub fn s(&self, k: usize) -> u32 {
        self.selections.get(k).copied().unwrap_or(0)
    }

    pub fn times_selected(&self) -> u32 {
        self.selections.iter().sum()
    }
}

/// Law (or empirical distribution) of the records a non-matched study
/// observes, conditioned on inclusion.
#[derive(Debug, Clone)]
pub struct AvailableLaw<T> {
    pub scheme: SamplingScheme,
    pub periods: usize,
    pub covariate_levels: usize,
    pub records: Vec<(AvailableRecord, T)>,
}

impl<T: Scalar> AvailableLaw<T> {
    pub fn is_case(&self, rec: &AvailableRecord) -> bool {
        is_case(&self.scheme, &rec.traj)
    }

    pub fn total(&self) -> T {
        self.records.iter().fold(T::zero(), |acc, (_, p)| acc + p.clone())
    }

    pub fn prob(&self, pred: impl Fn(&AvailableRecord) -> bool) -> T {
        self.records
            .iter()
            .filter(|(r, _)| pred(r))
            .fold(T::zero(), |acc, (_, p)| acc + p.clone())
    }
}

/// What a study observes: cohort-style records or matched sets.
#[derive(Debug, Clone)]
pub enum AvailableData<T> {
    Cohort(AvailableLaw<T>),
    Matched(MatchedLaw<T>),
}

impl<T> AvailableData<T> {
    pub fn scheme(&self) -> &SamplingScheme {
        match self {
            AvailableData::Cohort(l) => &l.scheme,
            AvailableData::Matched(l) => &l.scheme,
        }
    }
}

pub fn is_case(scheme: &SamplingScheme, t: &Trajectory) -> bool {
    t.is_event() && (!scheme.per_protocol() || t.adherent())
}

/// Subjects eligible for control selection in window k.
pub(crate) fn eligible(scheme: &SamplingScheme, t: &Trajectory, k: usize) -> bool {
    match scheme {
        SamplingScheme::RiskSetPp { adherent_pool: true, .. } => t.at_risk(k) && t.adherent_through(k),
        _ => t.at_risk(k),
    }
}

/// Per-window selection probability among eligible subjects. Fixed-m
/// sampling is represented by its marginal inclusion rate m * (cases in
/// window k) / (eligible in window k).
fn window_rates<T: Scalar>(law: &HistoryDistribution<T>, scheme: &SamplingScheme) -> Result<Vec<T>> {
    let (delta, m) = match scheme {
        SamplingScheme::RiskSetItt { delta, controls_per_case } => (delta, controls_per_case),
        SamplingScheme::RiskSetPp { delta, controls_per_case, .. } => (delta, controls_per_case),
        _ => unreachable!("risk-set schemes only"),
    };
    (0..law.periods)
        .map(|k| match m {
            None => Ok(T::from_rational(delta)),
            Some(m) => {
                let cases = law.prob(|t| t.event == Some(k) && is_case(scheme, t));
                let pool = law.prob(|t| eligible(scheme, t, k));
                if pool.is_zero() {
                    return Ok(T::zero());
                }
                let rate = T::from_count(*m as u64) * cases / pool;
                if rate > T::one() {
                    return Err(Error::InvalidSpec(format!(
                        "{m} controls per case exceed the risk set in window {k}"
                    )));
                }
                Ok(rate)
            }
        })
        .collect()
}

/// Pr(indicator = 1) for each selection indicator of each trajectory of
/// the factual law, before conditioning on inclusion.
pub fn selection_probabilities<T: Scalar>(law: &HistoryDistribution<T>, scheme: &SamplingScheme) -> Result<Vec<Vec<T>>> {
    if scheme.is_matched() {
        return Err(Error::SchemeMismatch("matched schemes have no selection indicators".into()));
    }
    let rates = if scheme.is_risk_set() { window_rates(law, scheme)? } else { Vec::new() };
    Ok(law
        .entries
        .iter()
        .map(|(t, _)| match scheme {
            SamplingScheme::CaseBase { delta } => vec![T::from_rational(delta)],
            SamplingScheme::Survivor { delta } => {
                vec![if t.is_event() { T::zero() } else { T::from_rational(delta.at(t.l0())) }]
            }
            _ => (0..law.periods)
                .map(|k| if eligible(scheme, t, k) { rates[k].clone() } else { T::zero() })
                .collect(),
        })
        .collect())
}

/// Attach selection indicators to a factual law and condition on inclusion.
pub fn augment_selection<T: Scalar>(
    law: &HistoryDistribution<T>,
    scheme: &SamplingScheme,
    covariate_levels: usize,
) -> Result<AvailableLaw<T>> {
    if scheme.is_matched() {
        return Err(Error::SchemeMismatch("matched schemes use matched_distribution".into()));
    }
    if law.regime != Regime::Natural {
        return Err(Error::SchemeMismatch("selection applies to the factual law".into()));
    }
    let periods = law.periods;
    let all_probs = selection_probabilities(law, scheme)?;
    let mut records = Vec::new();
    for ((t, mass), probs) in law.entries.iter().zip(all_probs) {
        let mut patterns: Vec<(Vec<u32>, T)> = vec![(Vec::new(), mass.clone())];
        for p in &probs {
            let q = T::one() - p.clone();
            let mut next = Vec::with_capacity(patterns.len() * 2);
            for (sel, m) in patterns {
                if !q.is_zero() {
                    let mut s0 = sel.clone();
                    s0.push(0);
                    next.push((s0, m.clone() * q.clone()));
                }
                if !p.is_zero() {
                    let mut s1 = sel;
                    s1.push(1);
                    next.push((s1, m * p.clone()));
                }
            }
            patterns = next;
        }
        let case = is_case(scheme, t);
        for (selections, m) in patterns {
            let rec = AvailableRecord { traj: t.clone(), selections };
            if case || rec.selected() {
                records.push((rec, m));
            }
        }
    }
    let total = records.iter().fold(T::zero(), |acc, (_, p)| acc + p.clone());
    if total.is_zero() {
        return Err(Error::DegenerateFunctional("inclusion event has zero mass".into()));
    }
    for (_, p) in records.iter_mut() {
        *p = p.clone() / total.clone();
    }
    Ok(AvailableLaw { scheme: scheme.clone(), periods, covariate_levels, records })
}
