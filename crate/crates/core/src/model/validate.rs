//! Diagnostics on a cohort law: positivity, kernel ranges, reliance on U.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::model::law::{walk, Regime, WalkObserver, DEFAULT_ENUMERATION_CAP};
use crate::model::spec::{DgpSpec, History, KernelRole};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub positivity_ok: bool,
    pub positivity_violations: Vec<String>,
    pub range_violations: Vec<String>,
    pub kernel_errors: Vec<String>,
    pub kernels_reading_u: Vec<KernelRole>,
    pub exchangeability_by_construction: bool,
    pub exact_capable: bool,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.positivity_ok && self.range_violations.is_empty() && self.kernel_errors.is_empty()
    }
}

struct PositivityObserver {
    violations: BTreeSet<String>,
}

impl<T: Scalar> WalkObserver<T> for PositivityObserver {
    fn exposure(&mut self, h: &History, _mass: &T, p: &T) {
        if p.is_zero() || *p == T::one() {
            let ls: Vec<String> = h.l.iter().map(|x| x.to_string()).collect();
            let as_: Vec<String> = h.a.iter().map(|x| x.to_string()).collect();
            self.violations.insert(format!(
                "k={} u={} l=[{}] a_past=[{}]: Pr(A=1)={}",
                h.k,
                h.u,
                ls.join(","),
                as_.join(","),
                p
            ));
        }
    }
}

fn walk_positivity<T: Scalar>(spec: &DgpSpec, obs: &mut PositivityObserver) -> Option<String> {
    walk::<T, _>(spec, Regime::Natural, DEFAULT_ENUMERATION_CAP, obs).err().map(|e| e.to_string())
}

/// Report-only checks; never fails.
pub fn validate_spec(spec: &DgpSpec) -> ValidationReport {
    let mut kernel_errors = Vec::new();
    if let Err(e) = spec.check() {
        kernel_errors.push(e.to_string());
    }
    let mut range_violations = Vec::new();
    for role in [KernelRole::L, KernelRole::A, KernelRole::Y] {
        range_violations.extend(spec.kernel(role).static_range_violations(role));
    }
    let mut obs = PositivityObserver { violations: BTreeSet::new() };
    if kernel_errors.is_empty() && range_violations.is_empty() {
        let err = if spec.is_exact() {
            walk_positivity::<BigRational>(spec, &mut obs)
        } else {
            walk_positivity::<f64>(spec, &mut obs)
        };
        kernel_errors.extend(err);
    }
    let kernels_reading_u: Vec<KernelRole> = [KernelRole::L, KernelRole::A, KernelRole::Y]
        .into_iter()
        .filter(|&r| spec.kernel(r).reads_u())
        .collect();
    let u_varies = !spec.u_prob.is_zero() && spec.u_prob != BigRational::from_integer(1.into());
    let positivity_violations: Vec<String> = obs.violations.into_iter().collect();
    ValidationReport {
        positivity_ok: positivity_violations.is_empty(),
        positivity_violations,
        range_violations,
        kernel_errors,
        exchangeability_by_construction: !(u_varies && !kernels_reading_u.is_empty()),
        kernels_reading_u,
        exact_capable: spec.is_exact(),
    }
}
