//! Conditional logistic regression for matched sets.
//!
//! The objective is the weighted mean over sets of
//! `-log(1 + sum_i exp(x_i . beta))`, where `x_i` is control i's feature
//! vector minus the case's. It is concave, and strictly so when the stacked
//! differences have full column rank.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{MatchedLaw, MatchedUnit};

pub const DEFAULT_CLR_TOL: f64 = 1e-10;
pub const DEFAULT_CLR_MAX_ITER: usize = 100;

/// One matched set: feature differences (one row per control) and a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrSet {
    pub weight: f64,
    pub x: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrProblem {
    pub p: usize,
    pub sets: Vec<ClrSet>,
}

impl ClrProblem {
    pub fn new(p: usize, sets: Vec<ClrSet>) -> Result<Self> {
        for s in &sets {
            if !(s.weight.is_finite() && s.weight >= 0.0) {
                return Err(Error::DomainError(format!("set weight {}", s.weight)));
            }
            for row in &s.x {
                if row.len() != p || row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::DomainError("feature differences must be finite with length p".into()));
                }
            }
        }
        Ok(ClrProblem { p, sets })
    }

    /// Build from case and control feature vectors.
    pub fn from_features(p: usize, sets: impl IntoIterator<Item = (Vec<f64>, Vec<Vec<f64>>, f64)>) -> Result<Self> {
        let sets = sets
            .into_iter()
            .map(|(case, controls, weight)| ClrSet {
                weight,
                x: controls.iter().map(|c| c.iter().zip(&case).map(|(a, b)| a - b).collect()).collect(),
            })
            .collect();
        ClrProblem::new(p, sets)
    }

    /// Sets from a matched law, weighted by their masses. `features` maps a
    /// member's exposure and covariate code to its feature vector.
    pub fn from_matched(law: &MatchedLaw<f64>, p: usize, features: impl Fn(&MatchedUnit) -> Vec<f64>) -> Result<Self> {
        ClrProblem::from_features(
            p,
            law.records
                .iter()
                .map(|(r, w)| (features(&r.case), r.controls.iter().map(&features).collect(), *w)),
        )
    }

    /// Rank of the stacked difference rows of positively weighted sets.
    pub fn li_rank(&self) -> usize {
        let rows: Vec<&Vec<f64>> = self.sets.iter().filter(|s| s.weight > 0.0).flat_map(|s| &s.x).collect();
        if rows.is_empty() || self.p == 0 {
            return 0;
        }
        let m = DMatrix::from_fn(rows.len(), self.p, |i, j| rows[i][j]);
        // X^T X has the same rank and stays p x p however many rows there are.
        let gram = m.transpose() * &m;
        let scale = gram.diagonal().max().max(1.0);
        gram.symmetric_eigenvalues().iter().filter(|&&e| e > 1e-10 * scale).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClrEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Weighted mean log conditional likelihood with its gradient and Hessian.
pub fn clr_objective(problem: &ClrProblem, beta: &[f64]) -> ClrEval {
    let p = problem.p;
    let mut value = 0.0;
    let mut gradient = DVector::zeros(p);
    let mut hessian = DMatrix::zeros(p, p);
    let mut total = 0.0;
    for set in &problem.sets {
        if set.weight == 0.0 {
            continue;
        }
        total += set.weight;
        let eta: Vec<f64> = set.x.iter().map(|x| x.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
        // log(1 + sum exp(eta)) with the case's zero included in the max.
        let mx = eta.iter().copied().fold(0.0, f64::max);
        let g: Vec<f64> = eta.iter().map(|e| (e - mx).exp()).collect();
        let denom = (-mx).exp() + g.iter().sum::<f64>();
        value -= set.weight * (mx + denom.ln());
        // Softmax weights of the controls.
        let pi: Vec<f64> = g.iter().map(|v| v / denom).collect();
        let mut mean = vec![0.0f64; p];
        for (x, w) in set.x.iter().zip(&pi) {
            for j in 0..p {
                mean[j] += w * x[j];
            }
        }
        for j in 0..p {
            gradient[j] -= set.weight * mean[j];
        }
        for (x, w) in set.x.iter().zip(&pi) {
            for j in 0..p {
                for k in 0..p {
                    hessian[(j, k)] -= set.weight * w * x[j] * x[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..p {
                hessian[(j, k)] += set.weight * mean[j] * mean[k];
            }
        }
    }
    if total > 0.0 {
        value /= total;
        gradient /= total;
        hessian /= total;
    }
    ClrEval { value, gradient, hessian }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrFit {
    pub beta: Vec<f64>,
    pub iters: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// Negative Hessian at the solution is positive definite.
    pub hessian_pd: bool,
    pub li_rank: usize,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton ascent with step halving.
pub fn fit_clr(problem: &ClrProblem, init: &[f64], tol: f64, max_iter: usize) -> Result<ClrFit> {
    let p = problem.p;
    if init.len() != p {
        return Err(Error::DomainError(format!("init has length {}, expected {p}", init.len())));
    }
    let rank = problem.li_rank();
    if rank < p {
        return Err(Error::RankDeficient { rank, p });
    }
    let mut beta = DVector::from_column_slice(init);
    let mut eval = clr_objective(problem, beta.as_slice());
    let mut iters = 0;
    loop {
        let grad_norm = inf_norm(&eval.gradient);
        if grad_norm <= tol {
            let hessian_pd = (-&eval.hessian).cholesky().is_some();
            return Ok(ClrFit { beta: beta.as_slice().to_vec(), iters, grad_norm, converged: true, hessian_pd, li_rank: rank });
        }
        if iters == max_iter {
            return Err(Error::MaxIterations { iterations: iters, grad_norm });
        }
        iters += 1;
        let neg_h = -&eval.hessian;
        let step = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&eval.gradient),
            None => neg_h
                .lu()
                .solve(&eval.gradient)
                .unwrap_or_else(|| eval.gradient.clone()),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &beta + &step * t;
            let ce = clr_objective(problem, cand.as_slice());
            if ce.value >= eval.value || inf_norm(&ce.gradient) < grad_norm {
                beta = cand;
                eval = ce;
                accepted = true;
                break;
            }
            t /= 2.0;
        }
        if !accepted {
            return Err(Error::MaxIterations { iterations: iters, grad_norm });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(x: Vec<Vec<f64>>) -> ClrProblem {
        ClrProblem::new(x[0].len(), vec![ClrSet { weight: 1.0, x }]).unwrap()
    }

    #[test]
    fn zero_features_give_flat_objective() {
        let prob = single(vec![vec![0.0, 0.0]; 3]);
        for beta in [[0.0, 0.0], [1.5, -2.0]] {
            let e = clr_objective(&prob, &beta);
            assert!((e.value + 4f64.ln()).abs() < 1e-15);
            assert!(e.gradient.iter().all(|g| *g == 0.0));
        }
        assert!(matches!(fit_clr(&prob, &[0.0, 0.0], 1e-10, 100), Err(Error::RankDeficient { rank: 0, p: 2 })));
    }

    #[test]
    fn unit_difference_gradient_at_zero() {
        // d/db of -log(1 + e^b) at 0 is -1/2.
        let e = clr_objective(&single(vec![vec![1.0]]), &[0.0]);
        assert!((e.gradient[0] + 0.5).abs() < 1e-15);
        assert!((e.hessian[(0, 0)] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn large_linear_predictors_stay_finite() {
        let e = clr_objective(&single(vec![vec![1.0], vec![-1.0]]), &[800.0]);
        assert!(e.value.is_finite() && (e.value + 800.0).abs() < 1e-9);
        assert!(e.gradient[0].is_finite());
    }
}
