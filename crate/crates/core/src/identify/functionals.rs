//! Left-hand sides of the identification results, computed by summation
//! over an available-data law. These skip the scheme guard in
//! [`identify`](super::identify) so they can be applied to the wrong design.

use crate::error::{Error, Result};
use crate::identify::weights::{baseline_weights, timevarying_weights, WeightFunction};
use crate::sampling::{AvailableLaw, AvailableRecord, MatchedLaw};
use crate::scalar::Scalar;

/// Exposure-split sums: (mass with a = 1, mass with a = 0).
#[derive(Clone)]
struct Split<T> {
    one: T,
    zero: T,
}

impl<T: Scalar> Split<T> {
    fn new() -> Self {
        Split { one: T::zero(), zero: T::zero() }
    }

    fn add(&mut self, a: u8, w: T) {
        if a == 1 {
            self.one = self.one.clone() + w;
        } else {
            self.zero = self.zero.clone() + w;
        }
    }

    fn odds(&self, what: &str) -> Result<T> {
        if self.zero.is_zero() {
            return Err(Error::DegenerateFunctional(format!("no unexposed mass among {what}")));
        }
        Ok(self.one.clone() / self.zero.clone())
    }
}

fn odds_ratio<T: Scalar>(cases: &Split<T>, controls: &Split<T>) -> Result<T> {
    let num = cases.odds("cases")?;
    let den = controls.odds("controls")?;
    if den.is_zero() {
        return Err(Error::DegenerateFunctional("no exposed control mass".into()));
    }
    Ok(num / den)
}

/// Per-stratum value of a conditional functional, plus a headline value
/// (the first stratum).
#[derive(Debug, Clone, PartialEq)]
pub struct Functional<T> {
    pub value: T,
    pub strata: Vec<(usize, T)>,
}

impl<T: Scalar> Functional<T> {
    pub fn scalar(value: T) -> Self {
        Functional { value, strata: Vec::new() }
    }

    fn stratified(strata: Vec<(usize, T)>) -> Result<Self> {
        let value = strata
            .first()
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::DegenerateFunctional("no strata with positive mass".into()))?;
        Ok(Functional { value, strata })
    }
}

/// Weighted case exposure odds over weighted control (S = 1) exposure odds.
pub fn weighted_case_base_ratio<T: Scalar>(law: &AvailableLaw<T>) -> Result<T> {
    let w = baseline_weights(law)?;
    let mut cases = Split::new();
    let mut controls = Split::new();
    for (rec, p) in &law.records {
        let t = &rec.traj;
        let wt = w.baseline(t.l0(), t.a0())? * p.clone();
        if law.is_case(rec) {
            cases.add(t.a0(), wt.clone());
        }
        if rec.s(0) > 0 {
            controls.add(t.a0(), T::from_count(rec.s(0) as u64) * wt);
        }
    }
    odds_ratio(&cases, &controls)
}

/// Weighted control exposure odds alone; equals 1 under case-base selection.
pub fn weighted_control_odds<T: Scalar>(law: &AvailableLaw<T>) -> Result<T> {
    let w = baseline_weights(law)?;
    let mut controls = Split::new();
    for (rec, p) in &law.records {
        if rec.s(0) > 0 {
            let t = &rec.traj;
            controls.add(t.a0(), w.baseline(t.l0(), t.a0())? * T::from_count(rec.s(0) as u64) * p.clone());
        }
    }
    controls.odds("controls")
}

fn strata_of<T>(law: &AvailableLaw<T>) -> Vec<usize> {
    let mut out: Vec<usize> = law.records.iter().map(|(r, _)| r.traj.l0()).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Per-L_0 unweighted exposure odds ratio, cases against controls weighted by
/// `control_weight` (selection indicator or selection count).
fn stratified_odds_ratio<T: Scalar>(
    law: &AvailableLaw<T>,
    control_weight: impl Fn(&AvailableRecord) -> u32,
) -> Result<Functional<T>> {
    let mut strata = Vec::new();
    for l0 in strata_of(law) {
        let mut cases = Split::new();
        let mut controls = Split::new();
        for (rec, p) in law.records.iter().filter(|(r, _)| r.traj.l0() == l0) {
            let a = rec.traj.a0();
            if law.is_case(rec) {
                cases.add(a, p.clone());
            }
            let c = control_weight(rec);
            if c > 0 {
                controls.add(a, T::from_count(c as u64) * p.clone());
            }
        }
        let v = odds_ratio(&cases, &controls)
            .map_err(|e| Error::DegenerateFunctional(format!("stratum l0={l0}: {e}")))?;
        strata.push((l0, v));
    }
    Functional::stratified(strata)
}

/// Case exposure odds over control exposure odds within each L_0 stratum.
pub fn conditional_exposure_odds_ratio<T: Scalar>(law: &AvailableLaw<T>) -> Result<Functional<T>> {
    stratified_odds_ratio(law, |r| r.s(0))
}

/// Weighted case odds over control odds weighted by W times the number of
/// times selected.
pub fn weighted_selection_count_ratio<T: Scalar>(law: &AvailableLaw<T>) -> Result<T> {
    let w = baseline_weights(law)?;
    let mut cases = Split::new();
    let mut controls = Split::new();
    for (rec, p) in &law.records {
        let t = &rec.traj;
        let wt = w.baseline(t.l0(), t.a0())? * p.clone();
        if law.is_case(rec) {
            cases.add(t.a0(), wt.clone());
        }
        let n = rec.times_selected();
        if n > 0 {
            controls.add(t.a0(), T::from_count(n as u64) * wt);
        }
    }
    odds_ratio(&cases, &controls)
}

/// Per-L_0 case odds over selection-count-weighted control odds.
pub fn conditional_selection_count_ratio<T: Scalar>(law: &AvailableLaw<T>) -> Result<Functional<T>> {
    stratified_odds_ratio(law, AvailableRecord::times_selected)
}

/// Per-protocol censored ratio: adherent cases weighted by W_k of their
/// event window, controls weighted by sum_k W_k S_k while still adherent.
pub fn per_protocol_weighted_ratio<T: Scalar>(law: &AvailableLaw<T>) -> Result<T> {
    per_protocol_ratio_with(law, &timevarying_weights(law)?)
}

/// [`per_protocol_weighted_ratio`] with externally supplied weights.
pub fn per_protocol_ratio_with<T: Scalar>(law: &AvailableLaw<T>, w: &WeightFunction<T>) -> Result<T> {
    let mut cases = Split::new();
    let mut controls = Split::new();
    for (rec, p) in &law.records {
        let t = &rec.traj;
        if law.is_case(rec) {
            let e = t.event.expect("cases have an event");
            cases.add(t.a[e], w.cumulative(&t.l[..=e], &t.a[..=e])? * p.clone());
        }
        for k in 0..t.periods_observed() {
            let s = rec.s(k);
            if s > 0 && t.adherent_through(k) {
                let wk = w.cumulative(&t.l[..=k], &t.a[..=k])?;
                controls.add(t.a0(), wk * T::from_count(s as u64) * p.clone());
            }
        }
    }
    odds_ratio(&cases, &controls)
}

/// E[#(A_0=1, A'=0)] / E[#(A_0=0, A'=1)] over matched sets.
pub fn discordant_pair_ratio<T: Scalar>(law: &MatchedLaw<T>) -> Result<T> {
    let mut num = T::zero();
    let mut den = T::zero();
    for (rec, p) in &law.records {
        let n10 = rec.discordant_exposed_case();
        let n01 = rec.discordant_unexposed_case();
        if n10 > 0 {
            num = num + T::from_count(n10) * p.clone();
        }
        if n01 > 0 {
            den = den + T::from_count(n01) * p.clone();
        }
    }
    if den.is_zero() {
        return Err(Error::DegenerateFunctional("no discordant pairs with an unexposed case".into()));
    }
    Ok(num / den)
}

pub(crate) fn scalar<T: Scalar>(v: Result<T>) -> Result<Functional<T>> {
    v.map(Functional::scalar)
}
