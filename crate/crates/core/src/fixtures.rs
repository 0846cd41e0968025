//! Shipped data-generating processes used by the scenarios and tests.
//!
//! The reference process has K = 3 periods and a binary covariate. L_0 is
//! Bernoulli(2/5) and later covariates are fair coins, independent of the
//! past. Exposure starts with probability 1/4 + l_0/2 and then switches
//! with covariate-dependent probabilities. The hazard in window k depends
//! on A_0 and (for k >= 1) on L_k, with hazard ratio 2 throughout.

use serde_json::{json, Value};

use crate::model::DgpSpec;

fn build(v: Value) -> DgpSpec {
    DgpSpec::from_json(&v.to_string()).expect("fixture spec is valid")
}

fn reference_l() -> Value {
    json!({"type": "table", "rows": [
        {"when": {"k": 0}, "p": "2/5"},
        {"p": "1/2"}
    ]})
}

fn reference_a() -> Value {
    json!({"type": "table", "rows": [
        {"when": {"k": 0, "l": 0}, "p": "1/4"},
        {"when": {"k": 0, "l": 1}, "p": "3/4"},
        {"when": {"a_prev": 1, "l": 0}, "p": "4/5"},
        {"when": {"a_prev": 1, "l": 1}, "p": "3/5"},
        {"when": {"l": 0}, "p": "1/5"},
        {"p": "2/5"}
    ]})
}

fn reference_y() -> Value {
    json!({"type": "table", "rows": [
        {"when": {"k": 0, "a0": 1}, "p": "1/5"},
        {"when": {"k": 0}, "p": "1/10"},
        {"when": {"a0": 1, "l": 1}, "p": "3/10"},
        {"when": {"a0": 1}, "p": "1/10"},
        {"when": {"l": 1}, "p": "3/20"},
        {"p": "1/20"}
    ]})
}

fn with_periods(periods: usize) -> Value {
    json!({
        "K": periods,
        "covariate_levels": 2,
        "u_prob": "0",
        "kernels": {"L": reference_l(), "A": reference_a(), "Y": reference_y()}
    })
}

/// K = 3 reference process; every homogeneity condition holds and all
/// exposure probabilities are interior.
pub fn reference_spec() -> DgpSpec {
    build(with_periods(3))
}

/// The reference kernels truncated to `periods` windows.
pub fn reference_spec_periods(periods: usize) -> DgpSpec {
    build(with_periods(periods))
}

/// Reference process with an unmeasured binary U (probability 3/10) that
/// raises baseline exposure by 1/4 and doubles every hazard.
pub fn confounded_spec() -> DgpSpec {
    let mut v = with_periods(3);
    v["u_prob"] = json!("3/10");
    v["kernels"]["A"] = json!({"type": "table", "rows": [
        {"when": {"k": 0, "l": 0, "u": 0}, "p": "1/8"},
        {"when": {"k": 0, "l": 0, "u": 1}, "p": "3/8"},
        {"when": {"k": 0, "l": 1, "u": 0}, "p": "5/8"},
        {"when": {"k": 0, "l": 1, "u": 1}, "p": "7/8"},
        {"when": {"a_prev": 1, "l": 0}, "p": "4/5"},
        {"when": {"a_prev": 1, "l": 1}, "p": "3/5"},
        {"when": {"l": 0}, "p": "1/5"},
        {"p": "2/5"}
    ]});
    v["kernels"]["Y"] = json!({"type": "table", "rows": [
        {"when": {"u": 0, "k": 0, "a0": 1}, "p": "1/5"},
        {"when": {"u": 0, "k": 0}, "p": "1/10"},
        {"when": {"u": 0, "a0": 1, "l": 1}, "p": "3/10"},
        {"when": {"u": 0, "a0": 1}, "p": "1/10"},
        {"when": {"u": 0, "l": 1}, "p": "3/20"},
        {"when": {"u": 0}, "p": "1/20"},
        {"when": {"k": 0, "a0": 1}, "p": "2/5"},
        {"when": {"k": 0}, "p": "1/5"},
        {"when": {"a0": 1, "l": 1}, "p": "3/5"},
        {"when": {"a0": 1}, "p": "1/5"},
        {"when": {"l": 1}, "p": "3/10"},
        {"p": "1/10"}
    ]});
    build(v)
}

/// Reference process whose exposed hazard doubles in window 1, so the
/// hazard ratio is 4 there and 2 elsewhere.
pub fn hazard_shift_spec() -> DgpSpec {
    let mut v = with_periods(3);
    v["kernels"]["Y"] = json!({"type": "table", "rows": [
        {"when": {"k": 0, "a0": 1}, "p": "1/5"},
        {"when": {"k": 0}, "p": "1/10"},
        {"when": {"k": 1, "a0": 1, "l": 1}, "p": "3/5"},
        {"when": {"k": 1, "a0": 1}, "p": "1/5"},
        {"when": {"a0": 1, "l": 1}, "p": "3/10"},
        {"when": {"a0": 1}, "p": "1/10"},
        {"when": {"l": 1}, "p": "3/20"},
        {"p": "1/20"}
    ]});
    build(v)
}

/// Single-period process with a common (non-rare) outcome, used to show
/// that survivor controls do not identify the risk ratio.
pub fn common_outcome_spec() -> DgpSpec {
    build(json!({
        "K": 1,
        "covariate_levels": 2,
        "u_prob": "0",
        "kernels": {
            "L": {"type": "table", "rows": [{"p": "2/5"}]},
            "A": {"type": "table", "rows": [{"when": {"l": 0}, "p": "1/4"}, {"p": "3/4"}]},
            "Y": {"type": "table", "rows": [
                {"when": {"a": 1, "l": 1}, "p": "3/5"},
                {"when": {"a": 1}, "p": "2/5"},
                {"when": {"l": 1}, "p": "3/10"},
                {"p": "1/5"}
            ]}
        }
    }))
}

/// Reference process with no exposure effect on the hazard.
pub fn null_effect_spec() -> DgpSpec {
    let mut v = with_periods(3);
    v["kernels"]["Y"] = json!({"type": "table", "rows": [
        {"when": {"k": 0}, "p": "1/10"},
        {"when": {"l": 1}, "p": "3/20"},
        {"p": "1/20"}
    ]});
    build(v)
}

/// Coefficients of the logistic outcome model in [`partial_matching_spec`],
/// for the features (a, l', a * l').
pub const PARTIAL_MATCHING_BETA: [f64; 3] = [0.7, -0.4, 0.3];

/// One-period process with L_0 = (L*, L') on a 2 x 2 grid and a logistic
/// outcome model in (a, l', a * l') with a common intercept.
pub fn partial_matching_spec() -> DgpSpec {
    let [ba, bl, bal] = PARTIAL_MATCHING_BETA;
    build(json!({
        "K": 1,
        "covariate_levels": 4,
        "covariate_coords": [2, 2],
        "u_prob": "0",
        "kernels": {
            "L": {"type": "table", "rows": [{"p": ["3/10", "1/5", "1/4", "1/4"]}]},
            "A": {"type": "logistic", "intercept": -0.5, "coefficients": {"l.0": 0.8, "l.1": 0.6}},
            "Y": {"type": "logistic", "intercept": -1.2, "coefficients": {"a": ba, "l.1": bl, "a*l.1": bal}}
        }
    }))
}

/// Every named fixture, for enumeration in tools and tests.
pub fn named() -> Vec<(&'static str, DgpSpec)> {
    vec![
        ("reference", reference_spec()),
        ("confounded", confounded_spec()),
        ("hazard_shift", hazard_shift_spec()),
        ("common_outcome", common_outcome_spec()),
        ("null_effect", null_effect_spec()),
        ("partial_matching", partial_matching_spec()),
    ]
}
