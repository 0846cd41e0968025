//! Seeded Monte Carlo draws of case-control and matched studies.
//!
//! Subject `i` draws from a ChaCha8 stream keyed by `(seed, i)`, so the
//! cohort does not depend on the number of worker threads. Cohort-level
//! steps (fixed-m control sampling, matching) use a separate stream and run
//! sequentially in subject order.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DgpSpec, History, Trajectory};
use crate::sampling::augment::{eligible, is_case, AvailableLaw, AvailableRecord};
use crate::sampling::matched::{unit, MatchStratum, MatchedLaw, MatchedRecord, MatchedUnit, Matcher};
use crate::sampling::scheme::SamplingScheme;

const COHORT_STREAM: u64 = u64::MAX;

/// Generator for subject `id` under `seed`.
pub fn subject_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let x = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// One factual trajectory from the natural law.
pub fn simulate_subject(spec: &DgpSpec, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let u = u8::from(bernoulli(rng, num_traits::ToPrimitive::to_f64(&spec.u_prob).unwrap_or(0.0)));
    let coords = &spec.covariate_coords;
    let mut l = Vec::with_capacity(spec.periods);
    let mut a = Vec::with_capacity(spec.periods);
    for k in 0..spec.periods {
        let dist: Vec<f64> = spec.kernel_l.dist(&History { u, k, l: &l, a: &a, coords }, spec.covariate_levels)?;
        l.push(categorical(rng, &dist));
        let p1 = spec.kernel_a.prob_f64(&History { u, k, l: &l, a: &a, coords })?;
        a.push(u8::from(bernoulli(rng, p1)));
        let py = spec.kernel_y.prob_f64(&History { u, k, l: &l, a: &a, coords })?;
        if bernoulli(rng, py) {
            return Ok(Trajectory { u, l, a, event: Some(k) });
        }
    }
    Ok(Trajectory { u, l, a, event: None })
}

/// `n` cohort members, subject `i` drawn from stream `i`.
pub fn simulate_cohort(spec: &DgpSpec, n: usize, seed: u64) -> Result<Vec<Trajectory>> {
    spec.check()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_subject(spec, &mut subject_rng(seed, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: u64,
    pub traj: Trajectory,
    /// S for baseline schemes, S_0..S_{K-1} for risk-set schemes.
    pub selections: Vec<u32>,
    pub case: bool,
    /// Adherent to a static protocol until the event (or end of follow-up).
    pub adherent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseControlDataset {
    pub scheme: SamplingScheme,
    pub periods: usize,
    pub covariate_levels: usize,
    pub n_cohort: usize,
    pub seed: u64,
    pub spec_hash: String,
    pub subjects: Vec<SubjectRecord>,
    pub dropped_cases: usize,
}

impl CaseControlDataset {
    pub fn n_cases(&self) -> usize {
        self.subjects.iter().filter(|s| s.case).count()
    }

    /// Empirical distribution of distinct (trajectory, selections) records,
    /// with counts as masses.
    pub fn empirical_counts(&self) -> Vec<(AvailableRecord, u64)> {
        let mut acc: BTreeMap<AvailableRecord, u64> = BTreeMap::new();
        for s in &self.subjects {
            let rec = AvailableRecord { traj: s.traj.clone(), selections: s.selections.clone() };
            *acc.entry(rec).or_default() += 1;
        }
        acc.into_iter().collect()
    }

    pub fn empirical_law(&self) -> AvailableLaw<f64> {
        self.law_from_counts(&self.empirical_counts(), None)
    }

    /// Law with masses proportional to `counts` (or to `weights` when given).
    pub(crate) fn law_from_counts(&self, counts: &[(AvailableRecord, u64)], weights: Option<&[u64]>) -> AvailableLaw<f64> {
        let records = counts
            .iter()
            .enumerate()
            .map(|(i, (r, c))| (r.clone(), weights.map_or(*c, |w| w[i]) as f64))
            .filter(|(_, m)| *m > 0.0)
            .collect();
        AvailableLaw {
            scheme: self.scheme.clone(),
            periods: self.periods,
            covariate_levels: self.covariate_levels,
            records,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedSet {
    pub set_id: usize,
    pub case_id: u64,
    pub control_ids: Vec<u64>,
    pub record: MatchedRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedStudy {
    pub scheme: SamplingScheme,
    pub n_cohort: usize,
    pub seed: u64,
    pub spec_hash: String,
    pub sets: Vec<MatchedSet>,
    pub dropped_cases: usize,
    /// Composition of each stratum's control pool in the cohort.
    #[serde(default)]
    pub pools: Vec<ReferencePool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePool {
    pub stratum: MatchStratum,
    pub units: Vec<(MatchedUnit, u64)>,
}

impl MatchedStudy {
    pub fn empirical_counts(&self) -> Vec<(MatchedRecord, u64)> {
        let mut acc: BTreeMap<MatchedRecord, u64> = BTreeMap::new();
        for s in &self.sets {
            *acc.entry(s.record.clone()).or_default() += 1;
        }
        acc.into_iter().collect()
    }

    pub fn empirical_law(&self) -> MatchedLaw<f64> {
        MatchedLaw {
            scheme: self.scheme.clone(),
            records: self.empirical_counts().into_iter().map(|(r, c)| (r, c as f64)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum Study {
    CaseControl(CaseControlDataset),
    Matched(MatchedStudy),
}

impl Study {
    pub fn scheme(&self) -> &SamplingScheme {
        match self {
            Study::CaseControl(d) => &d.scheme,
            Study::Matched(m) => &m.scheme,
        }
    }

    pub fn dropped_cases(&self) -> usize {
        match self {
            Study::CaseControl(d) => d.dropped_cases,
            Study::Matched(m) => m.dropped_cases,
        }
    }
}

fn bernoulli_selections(scheme: &SamplingScheme, t: &Trajectory, periods: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let draw = |p: f64, rng: &mut ChaCha8Rng| u32::from(bernoulli(rng, p));
    match scheme {
        SamplingScheme::CaseBase { delta } => vec![draw(num_traits::ToPrimitive::to_f64(delta).unwrap_or(0.0), rng)],
        SamplingScheme::Survivor { delta } => {
            let p = num_traits::ToPrimitive::to_f64(delta.at(t.l0())).unwrap_or(0.0);
            // Draw even for cases so the stream layout does not depend on Y.
            let s = draw(p, rng);
            vec![if t.is_event() { 0 } else { s }]
        }
        SamplingScheme::RiskSetItt { delta, .. } | SamplingScheme::RiskSetPp { delta, .. } => {
            let p = num_traits::ToPrimitive::to_f64(delta).unwrap_or(0.0);
            (0..periods)
                .map(|k| {
                    let s = draw(p, rng);
                    if eligible(scheme, t, k) {
                        s
                    } else {
                        0
                    }
                })
                .collect()
        }
        SamplingScheme::Matched { .. } => Vec::new(),
    }
}

fn draw_case_control(spec: &DgpSpec, scheme: &SamplingScheme, cohort: Vec<Trajectory>, seed: u64) -> CaseControlDataset {
    let periods = spec.periods;
    let fixed_m = match scheme {
        SamplingScheme::RiskSetItt { controls_per_case, .. } | SamplingScheme::RiskSetPp { controls_per_case, .. } => {
            *controls_per_case
        }
        _ => None,
    };
    let n = cohort.len();
    let mut selections: Vec<Vec<u32>> = match fixed_m {
        None => cohort
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                // Offset the stream so selection does not reuse the cohort draws.
                let mut rng = subject_rng(seed ^ 0x5eed_5e1e_c7ed_0001, i as u64);
                bernoulli_selections(scheme, t, periods, &mut rng)
            })
            .collect(),
        Some(_) => vec![vec![0; periods]; n],
    };
    let mut dropped = 0;
    if let Some(m) = fixed_m {
        let mut rng = subject_rng(seed, COHORT_STREAM);
        for k in 0..periods {
            let pool: Vec<usize> = (0..n).filter(|&i| eligible(scheme, &cohort[i], k)).collect();
            for t in &cohort {
                if t.event != Some(k) || !is_case(scheme, t) {
                    continue;
                }
                if pool.len() < m as usize {
                    dropped += 1;
                    continue;
                }
                for j in sample(&mut rng, pool.len(), m as usize) {
                    selections[pool[j]][k] += 1;
                }
            }
        }
    }
    let subjects = cohort
        .into_iter()
        .zip(selections)
        .enumerate()
        .filter_map(|(i, (traj, selections))| {
            let case = is_case(scheme, &traj);
            let rec = SubjectRecord { id: i as u64, adherent: traj.adherent(), case, traj, selections };
            (rec.case || rec.selections.iter().any(|&s| s > 0)).then_some(rec)
        })
        .collect();
    CaseControlDataset {
        scheme: scheme.clone(),
        periods,
        covariate_levels: spec.covariate_levels,
        n_cohort: n,
        seed,
        spec_hash: spec.hash_hex(),
        subjects,
        dropped_cases: dropped,
    }
}

fn draw_matched(spec: &DgpSpec, scheme: &SamplingScheme, cohort: Vec<Trajectory>, seed: u64) -> Result<MatchedStudy> {
    let (matcher, m) = Matcher::from_scheme(spec, scheme)?;
    let cases: Vec<(usize, MatchStratum)> = cohort
        .iter()
        .enumerate()
        .filter(|(_, t)| matcher.is_case(t))
        .map(|(i, t)| (i, matcher.stratum(t)))
        .collect();
    let mut pools: BTreeMap<MatchStratum, Vec<usize>> = BTreeMap::new();
    for (_, stratum) in &cases {
        if !pools.contains_key(stratum) {
            let pool = (0..cohort.len()).filter(|&i| matcher.in_pool(stratum, &cohort[i])).collect();
            pools.insert(stratum.clone(), pool);
        }
    }
    let mut rng = subject_rng(seed, COHORT_STREAM);
    let mut sets = Vec::new();
    let mut dropped = 0;
    for (i, stratum) in cases {
        let pool = &pools[&stratum];
        if pool.is_empty() {
            dropped += 1;
            continue;
        }
        let control_ids: Vec<u64> = (0..m).map(|_| pool[rng.random_range(0..pool.len())] as u64).collect();
        let record = MatchedRecord {
            stratum,
            case: unit(&cohort[i]),
            controls: control_ids.iter().map(|&c| unit(&cohort[c as usize])).collect(),
        };
        sets.push(MatchedSet { set_id: sets.len(), case_id: i as u64, control_ids, record });
    }
    Ok(MatchedStudy {
        scheme: scheme.clone(),
        n_cohort: cohort.len(),
        seed,
        spec_hash: spec.hash_hex(),
        sets,
        dropped_cases: dropped,
        pools: pools
            .into_iter()
            .map(|(stratum, pool)| {
                let mut units: BTreeMap<MatchedUnit, u64> = BTreeMap::new();
                for i in pool {
                    *units.entry(unit(&cohort[i])).or_default() += 1;
                }
                ReferencePool { stratum, units: units.into_iter().collect() }
            })
            .collect(),
    })
}

/// Simulate `n_cohort` subjects and apply `scheme`. Unselected non-cases are
/// discarded; cases with too few eligible controls are dropped and counted.
pub fn draw_study(spec: &DgpSpec, scheme: &SamplingScheme, n_cohort: usize, seed: u64) -> Result<Study> {
    if n_cohort == 0 {
        return Err(Error::InvalidSpec("n_cohort must be at least 1".into()));
    }
    scheme.check(spec)?;
    let cohort = simulate_cohort(spec, n_cohort, seed)?;
    if scheme.is_matched() {
        Ok(Study::Matched(draw_matched(spec, scheme, cohort, seed)?))
    } else {
        Ok(Study::CaseControl(draw_case_control(spec, scheme, cohort, seed)))
    }
}
