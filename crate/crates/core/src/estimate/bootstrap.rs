//! Nonparametric bootstrap over study records, used for test tolerances.
//!
//! Records are grouped into distinct patterns and resampled by drawing the
//! multinomial pattern counts directly, which keeps each replicate cheap.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use super::logistic::PropensityModel;
use super::plugin::identify_with;
use crate::identify::{identify, TheoremId};
use crate::sampling::{
    subject_rng, AvailableData, MatchStratum, MatchedLaw, MatchedRecord, MatchedStudy, MatchedUnit, Study,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub estimate: f64,
    pub se: f64,
    pub replicates: usize,
    /// Replicates where the functional was undefined (e.g. an empty cell).
    pub failures: usize,
}

fn multinomial(rng: &mut ChaCha8Rng, counts: &[u64]) -> Vec<u64> {
    let total: u64 = counts.iter().sum();
    let mut remaining_n = total;
    let mut remaining_mass = total;
    let mut out = Vec::with_capacity(counts.len());
    for &c in counts {
        if remaining_n == 0 || remaining_mass == 0 {
            out.push(0);
            continue;
        }
        let p = (c as f64 / remaining_mass as f64).min(1.0);
        let x = Binomial::new(remaining_n, p).expect("valid binomial").sample(rng);
        out.push(x);
        remaining_n -= x;
        remaining_mass -= c;
    }
    out
}

/// Resamples matched sets. When the study carries its control pools, cases
/// and pool members are resampled separately and every control is redrawn
/// from the resampled pool, so variability shared across sets through a
/// common pool is not lost.
struct MatchedResampler<'a> {
    study: &'a MatchedStudy,
    sets: Vec<(MatchedRecord, u64)>,
    cases: Vec<((MatchStratum, MatchedUnit, usize), u64)>,
    pools: BTreeMap<MatchStratum, (Vec<MatchedUnit>, Vec<u64>)>,
}

impl<'a> MatchedResampler<'a> {
    fn new(study: &'a MatchedStudy) -> Self {
        let mut cases: BTreeMap<(MatchStratum, MatchedUnit, usize), u64> = BTreeMap::new();
        for s in &study.sets {
            let r = &s.record;
            *cases.entry((r.stratum.clone(), r.case, r.controls.len())).or_default() += 1;
        }
        let pools = study
            .pools
            .iter()
            .map(|p| (p.stratum.clone(), p.units.iter().copied().unzip()))
            .collect();
        MatchedResampler { study, sets: study.empirical_counts(), cases: cases.into_iter().collect(), pools }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> MatchedLaw<f64> {
        let records = if self.pools.is_empty() {
            let c: Vec<u64> = self.sets.iter().map(|(_, n)| *n).collect();
            let w = multinomial(rng, &c);
            self.sets.iter().zip(&w).filter(|(_, &x)| x > 0).map(|((r, _), &x)| (r.clone(), x as f64)).collect()
        } else {
            let mut cdfs: BTreeMap<&MatchStratum, (&[MatchedUnit], Vec<u64>)> = BTreeMap::new();
            for (stratum, (units, counts)) in &self.pools {
                let mut acc = 0;
                let cdf = multinomial(rng, counts)
                    .into_iter()
                    .map(|x| {
                        acc += x;
                        acc
                    })
                    .collect();
                cdfs.insert(stratum, (units, cdf));
            }
            let c: Vec<u64> = self.cases.iter().map(|(_, n)| *n).collect();
            let w = multinomial(rng, &c);
            let mut acc: BTreeMap<MatchedRecord, f64> = BTreeMap::new();
            for (((stratum, case, m), _), &x) in self.cases.iter().zip(&w) {
                let Some((units, cdf)) = cdfs.get(stratum) else { continue };
                let total = *cdf.last().unwrap_or(&0);
                if total == 0 {
                    continue;
                }
                for _ in 0..x {
                    let controls = (0..*m)
                        .map(|_| {
                            let u = rng.random_range(0..total);
                            units[cdf.partition_point(|&c| c <= u)]
                        })
                        .collect();
                    let rec = MatchedRecord { stratum: stratum.clone(), case: *case, controls };
                    *acc.entry(rec).or_default() += 1.0;
                }
            }
            acc.into_iter().collect()
        };
        MatchedLaw { scheme: self.study.scheme.clone(), records }
    }
}

/// Standard deviation of the headline functional over `reps` resamples.
pub fn bootstrap_se(study: &Study, id: TheoremId, reps: usize, seed: u64) -> Result<BootstrapSummary> {
    bootstrap_se_with(study, id, reps, seed, &PropensityModel::Saturated)
}

pub fn bootstrap_se_with(
    study: &Study,
    id: TheoremId,
    reps: usize,
    seed: u64,
    model: &PropensityModel,
) -> Result<BootstrapSummary> {
    id.check_scheme(study.scheme())?;
    let mut rng = subject_rng(seed, u64::MAX - 1);
    let mut values = Vec::with_capacity(reps);
    let mut failures = 0;
    let estimate;
    match study {
        Study::CaseControl(d) => {
            let counts = d.empirical_counts();
            let c: Vec<u64> = counts.iter().map(|(_, n)| *n).collect();
            estimate = identify_with(&AvailableData::Cohort(d.law_from_counts(&counts, None)), id, model)?.value;
            for _ in 0..reps {
                let w = multinomial(&mut rng, &c);
                match identify_with(&AvailableData::Cohort(d.law_from_counts(&counts, Some(&w))), id, model) {
                    Ok(f) => values.push(f.value),
                    Err(_) => failures += 1,
                }
            }
        }
        Study::Matched(m) => {
            estimate = identify(&AvailableData::Matched(m.empirical_law()), id)?.value;
            let resample = MatchedResampler::new(m);
            for _ in 0..reps {
                let law = resample.draw(&mut rng);
                match identify(&AvailableData::Matched(law), id) {
                    Ok(f) => values.push(f.value),
                    Err(_) => failures += 1,
                }
            }
        }
    }
    if values.len() < 2 {
        return Err(Error::DegenerateFunctional("too few successful bootstrap replicates".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BootstrapSummary { estimate, se: var.sqrt(), replicates: values.len(), failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = subject_rng(3, 0);
        let counts = [5, 0, 12, 3, 80];
        for _ in 0..50 {
            let draw = multinomial(&mut rng, &counts);
            assert_eq!(draw.iter().sum::<u64>(), 100);
            assert_eq!(draw[1], 0);
        }
    }
}
