use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::AvailableLaw;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityForm {
    Baseline,
    TimeVarying,
}

/// Selected-control mass in a stratum, split by exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityCell<T> {
    pub exposed: T,
    pub total: T,
}

impl<T: Scalar> PropensityCell<T> {
    pub fn prob(&self) -> Option<T> {
        (!self.total.is_zero()).then(|| self.exposed.clone() / self.total.clone())
    }
}

/// Time-varying stratum: window k, covariates l_0..l_k, exposures a_0..a_{k-1}.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HistoryKey {
    pub k: usize,
    pub l: Vec<usize>,
    pub a_past: Vec<u8>,
}

/// Stratified control exposure frequencies. Baseline cells use the first
/// selection count (S, or S_0 under risk-set sampling); time-varying cells
/// use S_k in window k. Counts weight the person-periods.
#[derive(Debug, Clone)]
pub struct PropensityTables<T> {
    pub form: PropensityForm,
    pub baseline: BTreeMap<usize, PropensityCell<T>>,
    pub time_varying: BTreeMap<HistoryKey, PropensityCell<T>>,
}

pub fn propensity_tables<T: Scalar>(law: &AvailableLaw<T>, form: PropensityForm) -> PropensityTables<T> {
    let mut baseline: BTreeMap<usize, PropensityCell<T>> = BTreeMap::new();
    let mut time_varying: BTreeMap<HistoryKey, PropensityCell<T>> = BTreeMap::new();
    let empty = || PropensityCell { exposed: T::zero(), total: T::zero() };
    let add = |cell: &mut PropensityCell<T>, a: u8, w: T| {
        if a == 1 {
            cell.exposed = cell.exposed.clone() + w.clone();
        }
        cell.total = cell.total.clone() + w;
    };
    for (rec, p) in &law.records {
        let t = &rec.traj;
        match form {
            PropensityForm::Baseline => {
                let s = rec.s(0);
                if s > 0 {
                    let cell = baseline.entry(t.l0()).or_insert_with(empty);
                    add(cell, t.a0(), T::from_count(s as u64) * p.clone());
                }
            }
            PropensityForm::TimeVarying => {
                for k in 0..t.periods_observed() {
                    let s = rec.s(k);
                    if s > 0 {
                        let key = HistoryKey { k, l: t.l[..=k].to_vec(), a_past: t.a[..k].to_vec() };
                        let cell = time_varying.entry(key).or_insert_with(empty);
                        add(cell, t.a[k], T::from_count(s as u64) * p.clone());
                    }
                }
            }
        }
    }
    PropensityTables { form, baseline, time_varying }
}

/// Inverse-probability weights derived from selected controls.
#[derive(Debug, Clone)]
pub enum WeightFunction<T> {
    /// W(l_0, a) = 1 / Pr(A_0 = a | L_0 = l_0, selected).
    Baseline(BTreeMap<(usize, u8), T>),
    /// Cumulative W_k keyed by (l_0..l_k, a_0..a_k), formed along
    /// adherent exposure histories.
    TimeVarying(BTreeMap<(Vec<usize>, Vec<u8>), T>),
}

impl<T: Scalar> WeightFunction<T> {
    pub fn baseline(&self, l0: usize, a: u8) -> Result<T> {
        match self {
            WeightFunction::Baseline(m) => m
                .get(&(l0, a))
                .cloned()
                .ok_or_else(|| Error::PositivityFailure(format!("no control weight for l0={l0}, a={a}"))),
            WeightFunction::TimeVarying(_) => Err(Error::SchemeMismatch("baseline weight requested".into())),
        }
    }

    pub fn cumulative(&self, l: &[usize], a: &[u8]) -> Result<T> {
        match self {
            WeightFunction::TimeVarying(m) => m.get(&(l.to_vec(), a.to_vec())).cloned().ok_or_else(|| {
                Error::PositivityFailure(format!("no control weight for history l={l:?} a={a:?}"))
            }),
            WeightFunction::Baseline(_) => Err(Error::SchemeMismatch("time-varying weight requested".into())),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            WeightFunction::Baseline(m) => m.len(),
            WeightFunction::TimeVarying(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn interior<T: Scalar>(cell: &PropensityCell<T>, what: impl Fn() -> String) -> Result<T> {
    match cell.prob() {
        Some(p) if !p.is_zero() && p != T::one() => Ok(p),
        Some(p) => Err(Error::PositivityFailure(format!("{}: control propensity {p}", what()))),
        None => Err(Error::PositivityFailure(format!("{}: no selected controls", what()))),
    }
}

pub fn weights_from_tables<T: Scalar>(tables: &PropensityTables<T>) -> Result<WeightFunction<T>> {
    match tables.form {
        PropensityForm::Baseline => {
            let mut out = BTreeMap::new();
            for (&l0, cell) in &tables.baseline {
                let p = interior(cell, || format!("stratum l0={l0}"))?;
                out.insert((l0, 1), T::one() / p.clone());
                out.insert((l0, 0), T::one() / (T::one() - p));
            }
            Ok(WeightFunction::Baseline(out))
        }
        PropensityForm::TimeVarying => {
            let mut out: BTreeMap<(Vec<usize>, Vec<u8>), T> = BTreeMap::new();
            // Keys sort by k first, so prefixes are filled before extensions.
            for (key, cell) in &tables.time_varying {
                let adherent = key.a_past.iter().all(|&x| x == key.a_past[0]);
                if !adherent {
                    continue;
                }
                let p = interior(cell, || format!("window k={} history l={:?} a={:?}", key.k, key.l, key.a_past))?;
                let arms: Vec<u8> = if key.k == 0 { vec![0, 1] } else { vec![key.a_past[0]] };
                for a in arms {
                    let factor = if a == 1 { T::one() / p.clone() } else { T::one() / (T::one() - p.clone()) };
                    let prior = if key.k == 0 {
                        T::one()
                    } else {
                        match out.get(&(key.l[..key.k].to_vec(), key.a_past.clone())) {
                            Some(w) => w.clone(),
                            None => continue,
                        }
                    };
                    let mut a_hist = key.a_past.clone();
                    a_hist.push(a);
                    out.insert((key.l.clone(), a_hist), prior * factor);
                }
            }
            Ok(WeightFunction::TimeVarying(out))
        }
    }
}

/// W(l_0, a) = 1 / Pr(A_0 = a | L_0 = l_0, S = 1) from the control records.
pub fn baseline_weights<T: Scalar>(law: &AvailableLaw<T>) -> Result<WeightFunction<T>> {
    weights_from_tables(&propensity_tables(law, PropensityForm::Baseline))
}

/// W_k = prod_{j<=k} 1 / Pr(A_j = a_j | history, Y_j = 0, S_j = 1).
pub fn timevarying_weights<T: Scalar>(law: &AvailableLaw<T>) -> Result<WeightFunction<T>> {
    if !law.scheme.is_risk_set() {
        return Err(Error::SchemeMismatch("time-varying weights need risk-set selection".into()));
    }
    weights_from_tables(&propensity_tables(law, PropensityForm::TimeVarying))
}
