use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{enumerate, DgpSpec, HistoryDistribution, Regime, Trajectory};
use crate::sampling::augment::is_case;
use crate::sampling::scheme::{MatchReference, SamplingScheme};
use crate::scalar::Scalar;

/// The stratum a case is matched on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "on", rename_all = "snake_case")]
pub enum MatchStratum {
    Baseline { l0: usize },
    AtRisk { j: usize, l0: usize },
    History { j: usize, history: Vec<usize> },
    Partial { exact: Vec<usize> },
}

impl fmt::Display for MatchStratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            MatchStratum::Baseline { l0 } => write!(f, "l0={l0}"),
            MatchStratum::AtRisk { j, l0 } => write!(f, "j={j} l0={l0}"),
            MatchStratum::History { j, history } => write!(f, "j={j} l=[{}]", join(history)),
            MatchStratum::Partial { exact } => write!(f, "l*=[{}]", join(exact)),
        }
    }
}

/// Baseline exposure and full baseline covariate code of one set member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatchedUnit {
    pub a: u8,
    pub l0: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatchedRecord {
    pub stratum: MatchStratum,
    pub case: MatchedUnit,
    pub controls: Vec<MatchedUnit>,
}

impl MatchedRecord {
    /// Number of (case exposed, control unexposed) pairs in the set.
    pub fn discordant_exposed_case(&self) -> u64 {
        if self.case.a == 1 {
            self.controls.iter().filter(|c| c.a == 0).count() as u64
        } else {
            0
        }
    }

    pub fn discordant_unexposed_case(&self) -> u64 {
        if self.case.a == 0 {
            self.controls.iter().filter(|c| c.a == 1).count() as u64
        } else {
            0
        }
    }
}

/// Law (or empirical distribution) of matched sets.
#[derive(Debug, Clone)]
pub struct MatchedLaw<T> {
    pub scheme: SamplingScheme,
    pub records: Vec<(MatchedRecord, T)>,
}

pub(crate) struct Matcher<'a> {
    pub spec: &'a DgpSpec,
    pub reference: MatchReference,
    pub exact_coords: &'a [usize],
}

impl Matcher<'_> {
    pub fn from_scheme<'a>(spec: &'a DgpSpec, scheme: &'a SamplingScheme) -> Result<(Matcher<'a>, u32)> {
        let SamplingScheme::Matched { reference, m, exact_coords } = scheme else {
            return Err(Error::SchemeMismatch("matched scheme required".into()));
        };
        scheme.check(spec)?;
        Ok((Matcher { spec, reference: *reference, exact_coords }, *m))
    }

    fn exact_part(&self, l0: usize) -> Vec<usize> {
        self.exact_coords.iter().map(|&i| self.spec.coord(l0, i)).collect()
    }

    /// Stratum of a case (caller guarantees `t` is a case).
    pub fn stratum(&self, t: &Trajectory) -> MatchStratum {
        let j = t.last_event_free().expect("cases have an event");
        match self.reference {
            MatchReference::M1 | MatchReference::M2 => MatchStratum::Baseline { l0: t.l0() },
            MatchReference::M3 => MatchStratum::AtRisk { j, l0: t.l0() },
            MatchReference::M4 => MatchStratum::History { j, history: t.l[..=j].to_vec() },
            MatchReference::M2Star => MatchStratum::Partial { exact: self.exact_part(t.l0()) },
        }
    }

    /// Whether `t` belongs to the control reference pool of `stratum`.
    pub fn in_pool(&self, stratum: &MatchStratum, t: &Trajectory) -> bool {
        match (self.reference, stratum) {
            (MatchReference::M1, MatchStratum::Baseline { l0 }) => t.l0() == *l0,
            (MatchReference::M2, MatchStratum::Baseline { l0 }) => t.l0() == *l0 && !t.is_event(),
            (MatchReference::M3, MatchStratum::AtRisk { j, l0 }) => t.l0() == *l0 && t.at_risk(*j),
            (MatchReference::M4, MatchStratum::History { j, history }) => {
                t.at_risk(*j) && t.adherent_through(*j) && t.l[..=*j] == history[..]
            }
            (MatchReference::M2Star, MatchStratum::Partial { exact }) => {
                !t.is_event() && self.exact_part(t.l0()) == *exact
            }
            _ => false,
        }
    }

    pub fn is_case(&self, t: &Trajectory) -> bool {
        t.is_event() && (self.reference != MatchReference::M4 || t.adherent())
    }
}

pub fn unit(t: &Trajectory) -> MatchedUnit {
    MatchedUnit { a: t.a0(), l0: t.l0() }
}

fn reference_law<T: Scalar>(
    matcher: &Matcher,
    law: &HistoryDistribution<T>,
    stratum: &MatchStratum,
) -> Result<Vec<(MatchedUnit, T)>> {
    let mut acc: BTreeMap<MatchedUnit, T> = BTreeMap::new();
    let mut total = T::zero();
    for (t, p) in &law.entries {
        if matcher.in_pool(stratum, t) {
            let e = acc.entry(unit(t)).or_insert_with(T::zero);
            *e = e.clone() + p.clone();
            total = total + p.clone();
        }
    }
    if total.is_zero() {
        return Err(Error::EmptyReferenceStratum(stratum.to_string()));
    }
    Ok(acc.into_iter().map(|(u, p)| (u, p / total.clone())).collect())
}

/// Exact law of matched sets: case stratum and exposure, plus `m`
/// independent control draws from the stratum's reference law.
pub fn matched_distribution<T: Scalar>(spec: &DgpSpec, scheme: &SamplingScheme) -> Result<MatchedLaw<T>> {
    let (matcher, m) = Matcher::from_scheme(spec, scheme)?;
    let law = enumerate::<T>(spec, Regime::Natural)?;
    debug_assert!(law.entries.iter().all(|(t, _)| matcher.is_case(t) == is_case(scheme, t)));
    let mut cases: BTreeMap<(MatchStratum, MatchedUnit), T> = BTreeMap::new();
    let mut case_total = T::zero();
    for (t, p) in &law.entries {
        if matcher.is_case(t) {
            let e = cases.entry((matcher.stratum(t), unit(t))).or_insert_with(T::zero);
            *e = e.clone() + p.clone();
            case_total = case_total + p.clone();
        }
    }
    if case_total.is_zero() {
        return Err(Error::DegenerateFunctional("no cases with positive mass".into()));
    }
    let mut references: BTreeMap<MatchStratum, Vec<(MatchedUnit, T)>> = BTreeMap::new();
    for (stratum, _) in cases.keys() {
        if !references.contains_key(stratum) {
            references.insert(stratum.clone(), reference_law(&matcher, &law, stratum)?);
        }
    }
    let mut records = Vec::new();
    for ((stratum, case), p) in cases {
        let reference = &references[&stratum];
        let mut tuples: Vec<(Vec<MatchedUnit>, T)> = vec![(Vec::new(), p / case_total.clone())];
        for _ in 0..m {
            let mut next = Vec::with_capacity(tuples.len() * reference.len());
            for (controls, q) in &tuples {
                for (u, r) in reference {
                    let mut c = controls.clone();
                    c.push(*u);
                    next.push((c, q.clone() * r.clone()));
                }
            }
            tuples = next;
        }
        for (controls, q) in tuples {
            records.push((MatchedRecord { stratum: stratum.clone(), case, controls }, q));
        }
    }
    Ok(MatchedLaw { scheme: scheme.clone(), records })
}
