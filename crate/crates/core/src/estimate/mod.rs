//! Finite-sample analogues of the identifying functionals and a
//! conditional logistic regression solver.

mod bootstrap;
mod clr;
mod logistic;
mod plugin;

use serde::{Deserialize, Serialize};

use crate::identify::TheoremId;

pub use bootstrap::{bootstrap_se, bootstrap_se_with, BootstrapSummary};
pub use clr::{clr_objective, fit_clr, ClrEval, ClrFit, ClrProblem, ClrSet, DEFAULT_CLR_MAX_ITER, DEFAULT_CLR_TOL};
pub use logistic::{fit_logistic, logistic_timevarying_weights, PropensityModel};
pub use plugin::{estimate_functional, estimate_functional_with, fit_propensities, identify_with, PointEstimate};

/// One row of an estimator report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub theorem: TheoremId,
    pub estimate: f64,
    pub truth: f64,
    pub n: usize,
    pub seed: u64,
    pub abs_error: f64,
}
