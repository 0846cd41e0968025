use ccid_core::fixtures;
use ccid_core::model::{
    check_homogeneity, covariate_histories, enumerate, estimand, validate_spec, DgpSpec, EstimandKind,
    HomogeneityCondition, Regime,
};
use ccid_core::scalar::ratio;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::json;

fn spec(v: serde_json::Value) -> DgpSpec {
    DgpSpec::from_json(&v.to_string()).unwrap()
}

fn single_period(p1: &str, p0: &str) -> DgpSpec {
    spec(json!({
        "K": 1,
        "covariate_levels": 2,
        "kernels": {
            "L": {"type": "table", "rows": [{"p": "0"}]},
            "A": {"type": "table", "rows": [{"p": "1/2"}]},
            "Y": {"type": "table", "rows": [{"when": {"a": 1}, "p": p1}, {"p": p0}]}
        }
    }))
}

#[test]
fn natural_law_sums_to_one_for_every_fixture() {
    for (name, s) in fixtures::named() {
        if !s.is_exact() {
            let law = enumerate::<f64>(&s, Regime::Natural).unwrap();
            assert!((law.total() - 1.0).abs() < 1e-12, "{name}");
            continue;
        }
        for regime in [Regime::Natural, Regime::SetBaseline(1), Regime::SetAll(0)] {
            let law = enumerate::<BigRational>(&s, regime).unwrap();
            assert!(law.total().is_one(), "{name} {regime:?}");
        }
    }
}

#[test]
fn always_exposed_process_matches_sustained_intervention() {
    let mut v = serde_json::to_value(fixtures::reference_spec()).unwrap();
    v["kernels"]["A"] = json!({"type": "table", "rows": [{"p": "1"}]});
    let s = spec(v);
    let natural = enumerate::<BigRational>(&s, Regime::Natural).unwrap();
    let set = enumerate::<BigRational>(&s, Regime::SetAll(1)).unwrap();
    let mut a = natural.entries.clone();
    let mut b = set.entries.clone();
    a.sort_by(|x, y| format!("{:?}", x.0).cmp(&format!("{:?}", y.0)));
    b.sort_by(|x, y| format!("{:?}", x.0).cmp(&format!("{:?}", y.0)));
    assert_eq!(a, b);
}

#[test]
fn two_period_risk_matches_hand_g_formula() {
    // Pr(Y_2(1,1) = 1) = sum over (l0, l1) of Pr(l0) Pr(l1) [h_0 + (1 - h_0) h_1(l1)]
    // with h_0 = 1/5 and h_1(l1) = 3/10 for l1 = 1, 1/10 for l1 = 0.
    let s = fixtures::reference_spec_periods(2);
    let pl0 = [ratio(3, 5), ratio(2, 5)];
    let pl1 = [ratio(1, 2), ratio(1, 2)];
    let h0 = ratio(1, 5);
    let h1 = [ratio(1, 10), ratio(3, 10)];
    let mut oracle = BigRational::zero();
    for l0 in 0..2 {
        for l1 in 0..2 {
            let surv = BigRational::one() - h0.clone();
            oracle += pl0[l0].clone() * pl1[l1].clone() * (h0.clone() + surv * h1[l1].clone());
        }
    }
    assert_eq!(oracle, ratio(9, 25));
    let law = enumerate::<BigRational>(&s, Regime::SetAll(1)).unwrap();
    assert_eq!(law.prob(|t| t.is_event()), oracle);
}

#[test]
fn null_effect_gives_unit_estimands() {
    let s = fixtures::null_effect_spec();
    let kinds = [
        EstimandKind::MarginalRiskRatio,
        EstimandKind::ConditionalRiskRatio { l0: 1 },
        EstimandKind::MarginalOddsRatio,
        EstimandKind::ConditionalOddsRatio { l0: 0 },
        EstimandKind::MarginalHazardRatioItt { k: 2 },
        EstimandKind::ConditionalHazardRatioItt { k: 1, l0: 1 },
        EstimandKind::MarginalHazardRatioPp { k: 1 },
        EstimandKind::ConditionalHazardRatioPp { k: 2, history: vec![1, 0, 1] },
    ];
    for kind in kinds {
        assert!(estimand::<BigRational>(&s, &kind).unwrap().is_one(), "{kind}");
    }
}

#[test]
fn single_period_risk_ratio_is_kernel_ratio() {
    let s = single_period("2/5", "1/5");
    assert_eq!(estimand::<BigRational>(&s, &EstimandKind::MarginalRiskRatio).unwrap(), ratio(2, 1));
}

#[test]
fn reference_hazard_ratio_is_two_in_every_window() {
    let s = fixtures::reference_spec();
    for k in 0..3 {
        let itt = estimand::<BigRational>(&s, &EstimandKind::MarginalHazardRatioItt { k }).unwrap();
        let pp = estimand::<BigRational>(&s, &EstimandKind::MarginalHazardRatioPp { k }).unwrap();
        assert_eq!(itt, ratio(2, 1));
        assert_eq!(pp, ratio(2, 1));
    }
}

#[test]
fn degenerate_estimands_are_reported() {
    let s = single_period("1", "1/5");
    assert!(estimand::<BigRational>(&s, &EstimandKind::MarginalOddsRatio).is_err());
}

#[test]
fn validation_flags_positivity_and_unmeasured_causes() {
    let ok = spec(json!({
        "K": 2, "covariate_levels": 2,
        "kernels": {
            "L": {"type": "table", "rows": [{"p": "1/2"}]},
            "A": {"type": "table", "rows": [{"p": "1/2"}]},
            "Y": {"type": "table", "rows": [{"p": "1/10"}]}
        }
    }));
    let r = validate_spec(&ok);
    assert!(r.positivity_ok && r.exchangeability_by_construction && r.ok());

    let mut v = serde_json::to_value(&ok).unwrap();
    v["kernels"]["A"] = json!({"type": "table", "rows": [{"when": {"k": 0, "l": 1}, "p": "1"}, {"p": "1/2"}]});
    let r = validate_spec(&spec(v));
    assert!(!r.positivity_ok);
    assert!(!r.positivity_violations.is_empty());

    let r = validate_spec(&fixtures::confounded_spec());
    assert!(!r.exchangeability_by_construction);
}

#[test]
fn homogeneity_holds_on_reference_and_fails_under_hazard_shift() {
    let s = fixtures::reference_spec();
    for cond in HomogeneityCondition::ALL {
        let r = check_homogeneity::<BigRational>(&s, cond, 1e-12).unwrap();
        assert!(r.holds && r.max_deviation == 0.0, "{cond}: {:?}", r.offending);
    }
    let r = check_homogeneity::<BigRational>(&fixtures::hazard_shift_spec(), HomogeneityCondition::H2, 1e-12).unwrap();
    assert!(!r.holds);
    assert!(r.offending.iter().all(|o| o.contains("k=1")), "{:?}", r.offending);
}

/// Largest deviation of the adherent per-history hazard ratio from its
/// first value, by a direct sweep over trajectories.
fn h7_sweep(s: &DgpSpec) -> f64 {
    let law = enumerate::<f64>(s, Regime::Natural).unwrap();
    let mut values = Vec::new();
    for k in 0..s.periods {
        for hist in covariate_histories(s.covariate_levels, k + 1) {
            let mut ev = [0.0; 2];
            let mut risk = [0.0; 2];
            for (t, p) in &law.entries {
                let at_risk = t.event.is_none_or(|e| e >= k);
                if at_risk && t.a[..=k].iter().all(|&x| x == t.a[0]) && t.l[..=k] == hist[..] {
                    risk[t.a[0] as usize] += p;
                    if t.event == Some(k) {
                        ev[t.a[0] as usize] += p;
                    }
                }
            }
            if risk[0] > 0.0 && risk[1] > 0.0 && ev[0] > 0.0 {
                values.push((ev[1] / risk[1]) / (ev[0] / risk[0]));
            }
        }
    }
    values.iter().map(|v| (v - values[0]).abs()).fold(0.0, f64::max)
}

#[test]
fn adherent_hazard_ratio_deviation_matches_brute_force() {
    for s in [fixtures::reference_spec(), fixtures::hazard_shift_spec()] {
        let r = check_homogeneity::<f64>(&s, HomogeneityCondition::H7, 1e-9).unwrap();
        assert!((r.max_deviation - h7_sweep(&s)).abs() < 1e-12, "{} vs {}", r.max_deviation, h7_sweep(&s));
    }
    assert!(h7_sweep(&fixtures::hazard_shift_spec()) > 1.0);
}

#[test]
fn spec_json_round_trips_with_stable_hash() {
    for (name, s) in fixtures::named() {
        let back = DgpSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s, "{name}");
        assert_eq!(back.hash_hex(), s.hash_hex());
    }
}
