use std::collections::BTreeMap;

use ccid_core::fixtures;
use ccid_core::model::{enumerate, Regime};
use ccid_core::sampling::{
    augment_selection, draw_study, export_study, matched_distribution, simulate_cohort, MatchReference, PerStratum,
    SamplingScheme, Study,
};
use ccid_core::scalar::ratio;
use num_rational::BigRational;
use num_traits::{One, Zero};

fn matched(reference: MatchReference, m: u32) -> SamplingScheme {
    SamplingScheme::Matched { reference, m, exact_coords: Vec::new() }
}

#[test]
fn case_base_census_selects_everyone() {
    let spec = fixtures::reference_spec();
    let law = enumerate::<BigRational>(&spec, Regime::Natural).unwrap();
    let avail = augment_selection(&law, &SamplingScheme::CaseBase { delta: BigRational::one() }, 2).unwrap();
    assert!(avail.records.iter().all(|(r, _)| r.s(0) == 1));
    assert!(avail.total().is_one());

    let Study::CaseControl(d) =
        draw_study(&spec, &SamplingScheme::CaseBase { delta: BigRational::one() }, 100, 3).unwrap()
    else {
        panic!("case-control design expected");
    };
    assert_eq!(d.subjects.len(), 100);
    assert!(d.subjects.iter().all(|s| s.selections == vec![1]));
}

#[test]
fn survivor_controls_never_have_the_event() {
    let spec = fixtures::reference_spec();
    let law = enumerate::<BigRational>(&spec, Regime::Natural).unwrap();
    let scheme = SamplingScheme::Survivor { delta: PerStratum::Constant(ratio(1, 7)) };
    let avail = augment_selection(&law, &scheme, 2).unwrap();
    assert!(avail.prob(|r| r.s(0) == 1 && r.traj.is_event()).is_zero());
}

#[test]
fn risk_set_selection_rate_is_delta_among_the_at_risk() {
    let spec = fixtures::reference_spec();
    let law = enumerate::<BigRational>(&spec, Regime::Natural).unwrap();
    let delta = ratio(1, 8);
    let scheme = SamplingScheme::RiskSetItt { delta: delta.clone(), controls_per_case: None };
    let avail = augment_selection(&law, &scheme, 2).unwrap();
    // Cases are always included, so Pr(included) = Pr(case) / Pr(case | included).
    let included = law.prob(|t| t.is_event()) / avail.prob(|r| r.traj.is_event());
    for k in 0..3 {
        let selected = avail.prob(|r| r.traj.at_risk(k) && r.s(k) == 1) * included.clone();
        let at_risk = law.prob(|t| t.at_risk(k));
        assert_eq!(selected / at_risk, delta, "k={k}");
    }
}

#[test]
fn baseline_matching_draws_from_the_covariate_conditional_exposure_law() {
    let spec = fixtures::reference_spec();
    let law = enumerate::<BigRational>(&spec, Regime::Natural).unwrap();
    let ml = matched_distribution::<BigRational>(&spec, &matched(MatchReference::M1, 1)).unwrap();
    for l0 in 0..2 {
        let mut exposed = BigRational::zero();
        let mut total = BigRational::zero();
        for (rec, p) in &ml.records {
            if rec.case.l0 == l0 {
                total += p.clone();
                if rec.controls[0].a == 1 {
                    exposed += p.clone();
                }
            }
        }
        let truth = law.cond(|t| t.a0() == 1, |t| t.l0() == l0, "l0").unwrap();
        assert_eq!(exposed / total, truth, "l0={l0}");
    }
}

#[test]
fn null_effect_discordant_pairs_are_symmetric() {
    let spec = fixtures::null_effect_spec();
    for reference in [MatchReference::M1, MatchReference::M3, MatchReference::M4] {
        let ml = matched_distribution::<BigRational>(&spec, &matched(reference, 2)).unwrap();
        let mut by_stratum: BTreeMap<String, (BigRational, BigRational)> = BTreeMap::new();
        for (rec, p) in &ml.records {
            let e = by_stratum.entry(rec.stratum.to_string()).or_default();
            e.0 += BigRational::from_integer(rec.discordant_exposed_case().into()) * p;
            e.1 += BigRational::from_integer(rec.discordant_unexposed_case().into()) * p;
        }
        for (s, (a, b)) in by_stratum {
            assert_eq!(a, b, "{reference} {s}");
        }
    }
}

/// Discordant-pair ratio under at-risk matching with two controls, by a
/// sweep over (J, l_0, a_0, a'_1, a'_2).
fn at_risk_oracle() -> BigRational {
    let spec = fixtures::reference_spec();
    let law = enumerate::<BigRational>(&spec, Regime::Natural).unwrap();
    let mut num = BigRational::zero();
    let mut den = BigRational::zero();
    for j in 0..3 {
        for l0 in 0..2 {
            let pool = |t: &ccid_core::model::Trajectory| t.l0() == l0 && t.event.is_none_or(|e| e >= j);
            let pool_mass = law.prob(pool);
            let p_exposed = law.prob(|t| pool(t) && t.a0() == 1) / pool_mass;
            let control = |a: u8| if a == 1 { p_exposed.clone() } else { BigRational::one() - p_exposed.clone() };
            for a0 in 0..2u8 {
                let case = law.prob(|t| t.event == Some(j) && t.l0() == l0 && t.a0() == a0);
                for a1 in 0..2u8 {
                    for a2 in 0..2u8 {
                        let mass = case.clone() * control(a1) * control(a2);
                        let n = BigRational::from_integer(([a1, a2].iter().filter(|&&x| x != a0).count() as i64).into());
                        if a0 == 1 {
                            num += mass * n;
                        } else {
                            den += mass * n;
                        }
                    }
                }
            }
        }
    }
    num / den
}

#[test]
fn at_risk_matching_matches_brute_force_enumeration() {
    let spec = fixtures::reference_spec();
    let ml = matched_distribution::<BigRational>(&spec, &matched(MatchReference::M3, 2)).unwrap();
    let value = ccid_core::identify::functionals::discordant_pair_ratio(&ml).unwrap();
    assert_eq!(value, at_risk_oracle());
}

#[test]
fn draws_are_deterministic() {
    let spec = fixtures::reference_spec();
    let scheme = SamplingScheme::RiskSetItt { delta: ratio(1, 10), controls_per_case: None };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    export_study(&draw_study(&spec, &scheme, 5000, 11).unwrap(), a.path(), "x").unwrap();
    export_study(&draw_study(&spec, &scheme, 5000, 11).unwrap(), b.path(), "x").unwrap();
    for f in ["x.csv", "x.manifest.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = draw_study(&spec, &scheme, 5000, 12).unwrap();
    assert_ne!(draw_study(&spec, &scheme, 5000, 11).unwrap(), c);
}

#[test]
fn case_base_selection_rate_within_four_standard_errors() {
    let spec = fixtures::reference_spec();
    let delta = 0.2;
    let n = 200_000;
    let seed = 2024;
    let Study::CaseControl(d) =
        draw_study(&spec, &SamplingScheme::CaseBase { delta: ratio(1, 5) }, n, seed).unwrap()
    else {
        panic!("case-control design expected");
    };
    let cohort = simulate_cohort(&spec, n, seed).unwrap();
    let mut size = [[0u64; 2]; 2];
    for t in &cohort {
        size[t.l0()][t.a0() as usize] += 1;
    }
    let mut selected = [[0u64; 2]; 2];
    for s in &d.subjects {
        selected[s.traj.l0()][s.traj.a0() as usize] += u64::from(s.selections[0]);
    }
    for l0 in 0..2 {
        for a in 0..2 {
            let m = size[l0][a] as f64;
            let rate = selected[l0][a] as f64 / m;
            let se = (delta * (1.0 - delta) / m).sqrt();
            assert!((rate - delta).abs() <= 4.0 * se, "l0={l0} a={a}: {rate}");
        }
    }
}

#[test]
fn fixed_controls_sample_without_replacement_from_the_risk_set() {
    let spec = fixtures::reference_spec();
    let scheme = SamplingScheme::RiskSetItt { delta: ratio(1, 10), controls_per_case: Some(2) };
    let Study::CaseControl(d) = draw_study(&spec, &scheme, 3000, 5).unwrap() else {
        panic!("case-control design expected");
    };
    let cases_per_window: Vec<u32> =
        (0..3).map(|k| d.subjects.iter().filter(|s| s.case && s.traj.event == Some(k)).count() as u32).collect();
    for k in 0..3 {
        let picks: u32 = d.subjects.iter().map(|s| s.selections[k]).sum();
        assert_eq!(picks, 2 * cases_per_window[k], "k={k}");
        assert!(d.subjects.iter().all(|s| s.selections[k] == 0 || s.traj.at_risk(k)));
    }
    assert_eq!(d.dropped_cases, 0);
}
