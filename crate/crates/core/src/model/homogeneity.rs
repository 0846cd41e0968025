//! Constancy conditions on hazards and effect ratios.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::estimand::{covariate_histories, Counterfactuals};
use crate::model::law::{enumerate, HistoryDistribution, Regime, Trajectory};
use crate::model::spec::DgpSpec;
use crate::scalar::Scalar;

pub const DEFAULT_HOMOGENEITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HomogeneityCondition {
    /// Factual risk ratio given L_0 constant across strata.
    H1,
    /// Counterfactual baseline-regime hazards constant over time.
    H2,
    /// Counterfactual baseline-regime hazards given L_0 constant over time and strata.
    H3,
    /// Counterfactual sustained-regime hazards constant over time.
    H4,
    /// Factual odds ratio given L_0 constant across strata.
    H5,
    /// Factual hazard ratio given L_0 and A_0 constant over time and strata.
    H6,
    /// Factual hazard ratio among adherent subjects given covariate history
    /// constant over time and histories.
    H7,
}

impl HomogeneityCondition {
    pub const ALL: [HomogeneityCondition; 7] = [
        HomogeneityCondition::H1,
        HomogeneityCondition::H2,
        HomogeneityCondition::H3,
        HomogeneityCondition::H4,
        HomogeneityCondition::H5,
        HomogeneityCondition::H6,
        HomogeneityCondition::H7,
    ];
}

impl fmt::Display for HomogeneityCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for HomogeneityCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown homogeneity condition {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityInstance {
    pub group: String,
    pub label: String,
    pub value: f64,
    pub exact: Option<String>,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub condition: HomogeneityCondition,
    pub tolerance: f64,
    pub instances: Vec<HomogeneityInstance>,
    pub max_deviation: f64,
    pub offending: Vec<String>,
    pub skipped: Vec<String>,
    pub holds: bool,
}

struct Collector<T> {
    groups: Vec<(String, Vec<(String, T)>)>,
    skipped: Vec<String>,
}

impl<T: Scalar> Collector<T> {
    fn add(&mut self, group: &str, label: String, value: Result<T>) -> Result<()> {
        match value {
            Ok(v) => {
                match self.groups.iter_mut().find(|(g, _)| g == group) {
                    Some((_, items)) => items.push((label, v)),
                    None => self.groups.push((group.to_string(), vec![(label, v)])),
                }
                Ok(())
            }
            Err(Error::DegenerateEstimand(_)) => {
                self.skipped.push(label);
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    fn finish(self, condition: HomogeneityCondition, tolerance: f64) -> HomogeneityReport {
        let mut instances = Vec::new();
        let mut offending = Vec::new();
        let mut max_deviation: f64 = 0.0;
        for (group, items) in self.groups {
            let reference = items[0].1.clone();
            for (label, v) in items {
                let deviation = (v.clone() - reference.clone()).to_f64().abs();
                max_deviation = max_deviation.max(deviation);
                if deviation > tolerance {
                    offending.push(label.clone());
                }
                instances.push(HomogeneityInstance {
                    group: group.clone(),
                    label,
                    value: v.to_f64(),
                    exact: v.to_rational().map(|r| r.to_string()),
                    deviation,
                });
            }
        }
        HomogeneityReport {
            condition,
            tolerance,
            holds: offending.is_empty(),
            instances,
            max_deviation,
            offending,
            skipped: self.skipped,
        }
    }
}

fn factual_ratio<T: Scalar>(
    law: &HistoryDistribution<T>,
    event: &dyn Fn(&Trajectory) -> bool,
    given: &dyn Fn(&Trajectory) -> bool,
    odds: bool,
) -> Result<T> {
    let arm = |a: u8| -> Result<T> {
        let p = law.cond(event, |t| given(t) && t.a0() == a, &format!("A_0={a}"))?;
        if odds {
            let q = T::one() - p.clone();
            if q.is_zero() {
                return Err(Error::DegenerateEstimand("odds of a certain event".into()));
            }
            Ok(p / q)
        } else {
            Ok(p)
        }
    };
    let num = arm(1)?;
    let den = arm(0)?;
    if den.is_zero() {
        return Err(Error::DegenerateEstimand("zero reference arm".into()));
    }
    Ok(num / den)
}

/// Evaluate every stratum and time instance of `condition`.
pub fn check_homogeneity<T: Scalar>(
    spec: &DgpSpec,
    condition: HomogeneityCondition,
    tolerance: f64,
) -> Result<HomogeneityReport> {
    let mut c = Collector::<T> { groups: Vec::new(), skipped: Vec::new() };
    let levels = spec.covariate_levels;
    let periods = spec.periods;
    use HomogeneityCondition::*;
    match condition {
        H1 | H5 => {
            let law = enumerate::<T>(spec, Regime::Natural)?;
            for l in 0..levels {
                let v = factual_ratio(&law, &|t| t.is_event(), &|t| t.l0() == l, condition == H5);
                c.add("ratio", format!("l0={l}"), v)?;
            }
        }
        H2 | H3 | H4 => {
            let cf = Counterfactuals::<T>::new(spec);
            for a in [1u8, 0] {
                let regime = if condition == H4 { Regime::SetAll(a) } else { Regime::SetBaseline(a) };
                let group = format!("a={a}");
                for k in 0..periods {
                    if condition == H3 {
                        for l in 0..levels {
                            let v = cf.hazard(regime, k, &|t| t.l0() == l);
                            c.add(&group, format!("a={a} k={k} l0={l}"), v)?;
                        }
                    } else {
                        let v = cf.hazard(regime, k, &|_| true);
                        c.add(&group, format!("a={a} k={k}"), v)?;
                    }
                }
            }
        }
        H6 => {
            let law = enumerate::<T>(spec, Regime::Natural)?;
            for k in 0..periods {
                for l in 0..levels {
                    let v = factual_ratio(
                        &law,
                        &|t| t.event == Some(k),
                        &|t| t.at_risk(k) && t.l0() == l,
                        false,
                    );
                    c.add("ratio", format!("k={k} l0={l}"), v)?;
                }
            }
        }
        H7 => {
            let law = enumerate::<T>(spec, Regime::Natural)?;
            for k in 0..periods {
                for hist in covariate_histories(levels, k + 1) {
                    let v = factual_ratio(
                        &law,
                        &|t| t.event == Some(k),
                        &|t| t.at_risk(k) && t.l[..=k] == hist[..] && t.adherent_through(k),
                        false,
                    );
                    let hs: Vec<String> = hist.iter().map(|x| x.to_string()).collect();
                    c.add("ratio", format!("k={k} l=[{}]", hs.join(",")), v)?;
                }
            }
        }
    }
    Ok(c.finish(condition, tolerance))
}
