//! Logistic-form propensity model for sparse time-varying strata.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::WeightFunction;
use crate::model::{History, Term};
use crate::sampling::AvailableLaw;

/// How time-varying exposure propensities are estimated.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PropensityModel {
    /// One free probability per (window, covariate history, exposure history).
    #[default]
    Saturated,
    /// logit Pr(A_k = 1 | history) = b_0 + sum_j b_j term_j(history).
    Logistic { terms: Vec<String> },
}

impl PropensityModel {
    /// Logistic model with first-window and previous-exposure interactions.
    pub fn markov_logistic() -> Self {
        PropensityModel::Logistic {
            terms: ["first", "l", "first*l", "a_prev", "a_prev*l"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Weighted logistic regression by Newton iterations. Rows of `x` exclude the
/// intercept, which is added as the first coefficient.
pub fn fit_logistic(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let p = x.first().map_or(0, |r| r.len()) + 1;
    let row = |i: usize| std::iter::once(1.0).chain(x[i].iter().copied());
    let mut beta = DVector::<f64>::zeros(p);
    for _ in 0..100 {
        let mut grad = DVector::<f64>::zeros(p);
        let mut info = DMatrix::<f64>::zeros(p, p);
        for i in 0..x.len() {
            let xi: Vec<f64> = row(i).collect();
            let eta: f64 = xi.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            for j in 0..p {
                grad[j] += w[i] * (y[i] - mu) * xi[j];
                for k in 0..p {
                    info[(j, k)] += w[i] * mu * (1.0 - mu) * xi[j] * xi[k];
                }
            }
        }
        let step = info
            .cholesky()
            .ok_or_else(|| Error::RankDeficient { rank: 0, p })?
            .solve(&grad);
        beta += &step;
        if step.amax() < 1e-12 {
            return Ok(beta.as_slice().to_vec());
        }
        if beta.iter().any(|b| !b.is_finite() || b.abs() > 50.0) {
            return Err(Error::PositivityFailure("logistic propensity fit diverged".into()));
        }
    }
    Err(Error::MaxIterations { iterations: 100, grad_norm: f64::NAN })
}

fn features(terms: &[Term], coords: &[usize], k: usize, l: &[usize], a_past: &[u8]) -> Result<Vec<f64>> {
    let h = History { u: 0, k, l, a: a_past, coords };
    terms.iter().map(|t| t.eval(&h).map(|v| v as f64)).collect()
}

/// Time-varying weights from a logistic fit to the selected control
/// person-periods, formed along adherent histories.
pub fn logistic_timevarying_weights(law: &AvailableLaw<f64>, terms: &[String]) -> Result<WeightFunction<f64>> {
    let terms: Vec<Term> = terms.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let coords = [law.covariate_levels];
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (rec, mass) in &law.records {
        let t = &rec.traj;
        for k in 0..t.periods_observed() {
            let s = rec.s(k);
            if s > 0 {
                x.push(features(&terms, &coords, k, &t.l[..=k], &t.a[..k])?);
                y.push(f64::from(t.a[k]));
                w.push(s as f64 * mass);
            }
        }
    }
    if x.is_empty() {
        return Err(Error::PositivityFailure("no selected control person-periods".into()));
    }
    let beta = fit_logistic(&x, &y, &w)?;
    let prob = |f: &[f64]| {
        let eta = beta[0] + f.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        1.0 / (1.0 + (-eta).exp())
    };
    let mut out: BTreeMap<(Vec<usize>, Vec<u8>), f64> = BTreeMap::new();
    for (rec, _) in &law.records {
        let t = &rec.traj;
        let mut cum = 1.0;
        for k in 0..t.periods_observed() {
            if !t.adherent_through(k) {
                break;
            }
            let p1 = prob(&features(&terms, &coords, k, &t.l[..=k], &t.a[..k])?);
            cum /= if t.a[k] == 1 { p1 } else { 1.0 - p1 };
            out.entry((t.l[..=k].to_vec(), t.a[..=k].to_vec())).or_insert(cum);
        }
    }
    Ok(WeightFunction::TimeVarying(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cell_frequencies_when_saturated() {
        // One binary feature: cells with frequencies 1/4 and 3/5.
        let x = vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]];
        let y = vec![1.0, 0.0, 1.0, 0.0];
        let w = vec![1.0, 3.0, 3.0, 2.0];
        let b = fit_logistic(&x, &y, &w).unwrap();
        let p0 = 1.0 / (1.0 + (-b[0]).exp());
        let p1 = 1.0 / (1.0 + (-(b[0] + b[1])).exp());
        assert!((p0 - 0.25).abs() < 1e-10 && (p1 - 0.6).abs() < 1e-10);
    }
}
