//! Counterfactual target quantities computed from enumerated laws.

use std::fmt;
use std::sync::OnceLock;


use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::law::{enumerate, HistoryDistribution, Regime, Trajectory};
use crate::model::spec::DgpSpec;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimandKind {
    MarginalRiskRatio,
    ConditionalRiskRatio { l0: usize },
    MarginalOddsRatio,
    ConditionalOddsRatio { l0: usize },
    MarginalHazardRatioItt { k: usize },
    ConditionalHazardRatioItt { k: usize, l0: usize },
    MarginalHazardRatioPp { k: usize },
    /// Conditional on the covariate history l_0..l_k.
    ConditionalHazardRatioPp { k: usize, history: Vec<usize> },
}

impl fmt::Display for EstimandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimandKind::MarginalRiskRatio => write!(f, "RR"),
            EstimandKind::ConditionalRiskRatio { l0 } => write!(f, "RR|l0={l0}"),
            EstimandKind::MarginalOddsRatio => write!(f, "OR"),
            EstimandKind::ConditionalOddsRatio { l0 } => write!(f, "OR|l0={l0}"),
            EstimandKind::MarginalHazardRatioItt { k } => write!(f, "HR_itt(k={k})"),
            EstimandKind::ConditionalHazardRatioItt { k, l0 } => write!(f, "HR_itt(k={k})|l0={l0}"),
            EstimandKind::MarginalHazardRatioPp { k } => write!(f, "HR_pp(k={k})"),
            EstimandKind::ConditionalHazardRatioPp { k, history } => {
                let h: Vec<String> = history.iter().map(|x| x.to_string()).collect();
                write!(f, "HR_pp(k={k})|l=[{}]", h.join(","))
            }
        }
    }
}

fn ratio<T: Scalar>(num: T, den: T, what: &str) -> Result<T> {
    if den.is_zero() {
        return Err(Error::DegenerateEstimand(format!("zero denominator in {what}")));
    }
    Ok(num / den)
}

fn odds<T: Scalar>(p: T, what: &str) -> Result<T> {
    let q = T::one() - p.clone();
    ratio(p, q, what)
}

/// Lazily enumerated counterfactual laws of one spec.
pub struct Counterfactuals<'a, T> {
    spec: &'a DgpSpec,
    baseline: [OnceLock<HistoryDistribution<T>>; 2],
    sustained: [OnceLock<HistoryDistribution<T>>; 2],
}

impl<'a, T: Scalar> Counterfactuals<'a, T> {
    pub fn new(spec: &'a DgpSpec) -> Self {
        Counterfactuals {
            spec,
            baseline: [OnceLock::new(), OnceLock::new()],
            sustained: [OnceLock::new(), OnceLock::new()],
        }
    }

    fn get(&self, regime: Regime) -> Result<&HistoryDistribution<T>> {
        let cell = match regime {
            Regime::SetBaseline(a) => &self.baseline[a as usize],
            Regime::SetAll(a) => &self.sustained[a as usize],
            Regime::Natural => unreachable!("counterfactual laws only"),
        };
        if let Some(law) = cell.get() {
            return Ok(law);
        }
        let law = enumerate(self.spec, regime)?;
        Ok(cell.get_or_init(|| law))
    }

    /// Pr(Y_K(a)=1 | L_0 = l0), or unconditional when `l0` is None.
    pub fn risk(&self, a: u8, l0: Option<usize>) -> Result<T> {
        let law = self.get(Regime::SetBaseline(a))?;
        let in_stratum = move |t: &Trajectory| l0.is_none_or(|l| t.l0() == l);
        law.cond(|t| t.is_event(), in_stratum, &format!("L0 stratum {l0:?}"))
    }

    /// Pr(Y_{k+1}=1 | Y_k=0, stratum) under `regime`.
    pub fn hazard(&self, regime: Regime, k: usize, stratum: &dyn Fn(&Trajectory) -> bool) -> Result<T> {
        let law = self.get(regime)?;
        law.cond(|t| t.event == Some(k), |t| t.at_risk(k) && stratum(t), &format!("at risk at k={k}"))
    }

    pub fn evaluate(&self, kind: &EstimandKind) -> Result<T> {
        let periods = self.spec.periods;
        let check_k = |k: usize| {
            if k >= periods {
                Err(Error::DegenerateEstimand(format!("period {k} outside 0..{periods}")))
            } else {
                Ok(())
            }
        };
        let label = kind.to_string();
        match kind {
            EstimandKind::MarginalRiskRatio => ratio(self.risk(1, None)?, self.risk(0, None)?, &label),
            EstimandKind::ConditionalRiskRatio { l0 } => {
                ratio(self.risk(1, Some(*l0))?, self.risk(0, Some(*l0))?, &label)
            }
            EstimandKind::MarginalOddsRatio => {
                ratio(odds(self.risk(1, None)?, &label)?, odds(self.risk(0, None)?, &label)?, &label)
            }
            EstimandKind::ConditionalOddsRatio { l0 } => ratio(
                odds(self.risk(1, Some(*l0))?, &label)?,
                odds(self.risk(0, Some(*l0))?, &label)?,
                &label,
            ),
            EstimandKind::MarginalHazardRatioItt { k } => {
                check_k(*k)?;
                let all = |_: &Trajectory| true;
                ratio(
                    self.hazard(Regime::SetBaseline(1), *k, &all)?,
                    self.hazard(Regime::SetBaseline(0), *k, &all)?,
                    &label,
                )
            }
            EstimandKind::ConditionalHazardRatioItt { k, l0 } => {
                check_k(*k)?;
                let l0 = *l0;
                let st = move |t: &Trajectory| t.l0() == l0;
                ratio(
                    self.hazard(Regime::SetBaseline(1), *k, &st)?,
                    self.hazard(Regime::SetBaseline(0), *k, &st)?,
                    &label,
                )
            }
            EstimandKind::MarginalHazardRatioPp { k } => {
                check_k(*k)?;
                let all = |_: &Trajectory| true;
                ratio(
                    self.hazard(Regime::SetAll(1), *k, &all)?,
                    self.hazard(Regime::SetAll(0), *k, &all)?,
                    &label,
                )
            }
            EstimandKind::ConditionalHazardRatioPp { k, history } => {
                check_k(*k)?;
                if history.len() != k + 1 {
                    return Err(Error::DegenerateEstimand(format!("{label}: history must hold k+1 values")));
                }
                let st = |t: &Trajectory| t.l.len() > *k && t.l[..=*k] == history[..];
                ratio(
                    self.hazard(Regime::SetAll(1), *k, &st)?,
                    self.hazard(Regime::SetAll(0), *k, &st)?,
                    &label,
                )
            }
        }
    }
}

/// Exact value of a counterfactual contrast.
pub fn estimand<T: Scalar>(spec: &DgpSpec, kind: &EstimandKind) -> Result<T> {
    Counterfactuals::new(spec).evaluate(kind)
}

/// All covariate histories of length `len` over `levels` values, in
/// lexicographic order.
pub fn covariate_histories(levels: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|h| {
                (0..levels).map(move |v| {
                    let mut h2 = h.clone();
                    h2.push(v);
                    h2
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histories_enumerate_lexicographically() {
        let h = covariate_histories(2, 2);
        assert_eq!(h, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(covariate_histories(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn odds_of_one_is_degenerate() {
        assert!(odds(1.0_f64, "x").is_err());
        assert_eq!(odds(0.5_f64, "x").unwrap(), 1.0);
    }
}
