//! Cohort laws, their exact enumeration, counterfactual estimands and
//! assumption diagnostics.

mod estimand;
mod homogeneity;
mod law;
mod spec;
mod validate;

pub use estimand::{covariate_histories, estimand, Counterfactuals, EstimandKind};
pub use homogeneity::{
    check_homogeneity, HomogeneityCondition, HomogeneityInstance, HomogeneityReport, DEFAULT_HOMOGENEITY_TOL,
};
pub use law::{enumerate, enumerate_capped, HistoryDistribution, Regime, Trajectory, DEFAULT_ENUMERATION_CAP};
pub use spec::{Atom, DgpSpec, History, Kernel, KernelRole, LogisticKernel, TableKernel, TableRow, Term};
pub use validate::{validate_spec, ValidationReport};
