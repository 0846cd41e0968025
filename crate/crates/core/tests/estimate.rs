use ccid_core::estimate::{
    bootstrap_se, clr_objective, estimate_functional, estimate_functional_with, fit_clr, fit_propensities, ClrProblem,
    PropensityModel, DEFAULT_CLR_MAX_ITER, DEFAULT_CLR_TOL,
};
use ccid_core::fixtures;
use ccid_core::identify::{verify_theorem, PropensityForm, TheoremId};
use ccid_core::model::{enumerate, Regime, Trajectory};
use ccid_core::sampling::{
    draw_study, matched_distribution, CaseControlDataset, MatchReference, MatchStratum, MatchedRecord, MatchedSet,
    MatchedStudy, MatchedUnit, SamplingScheme, Study, SubjectRecord,
};
use ccid_core::scalar::ratio;
use ccid_core::Error;
use num_rational::BigRational;

fn control(id: u64, l0: usize, a0: u8) -> SubjectRecord {
    let traj = Trajectory { u: 0, l: vec![l0], a: vec![a0], event: None };
    SubjectRecord { id, traj, selections: vec![1], case: false, adherent: true }
}

fn case(id: u64, l0: usize, a0: u8) -> SubjectRecord {
    let traj = Trajectory { u: 0, l: vec![l0], a: vec![a0], event: Some(0) };
    SubjectRecord { id, traj, selections: vec![0], case: true, adherent: true }
}

fn dataset(subjects: Vec<SubjectRecord>) -> CaseControlDataset {
    CaseControlDataset {
        scheme: SamplingScheme::CaseBase { delta: ratio(1, 2) },
        periods: 1,
        covariate_levels: 2,
        n_cohort: subjects.len(),
        seed: 0,
        spec_hash: String::new(),
        subjects,
        dropped_cases: 0,
    }
}

#[test]
fn balanced_controls_give_half_propensities() {
    let d = dataset(vec![control(0, 0, 0), control(1, 0, 1), control(2, 1, 0), control(3, 1, 1), case(4, 1, 1)]);
    let t = fit_propensities(&d, PropensityForm::Baseline).unwrap();
    for l0 in 0..2 {
        assert_eq!(t.baseline[&l0].prob(), Some(0.5));
    }
}

#[test]
fn a_single_exposed_control_fails_positivity_downstream() {
    let d = dataset(vec![control(0, 0, 1), case(1, 0, 1), case(2, 0, 0)]);
    let t = fit_propensities(&d, PropensityForm::Baseline).unwrap();
    assert_eq!(t.baseline[&0].prob(), Some(1.0));
    let err = estimate_functional(&Study::CaseControl(d), TheoremId::CaseBaseMarginalRr).unwrap_err();
    assert!(matches!(err, Error::PositivityFailure(_)), "{err}");
}

#[test]
fn missing_control_strata_are_listed() {
    let d = dataset(vec![control(0, 0, 1), case(1, 1, 1)]);
    let err = fit_propensities(&d, PropensityForm::Baseline).unwrap_err();
    assert!(matches!(&err, Error::EmptyStratum(s) if s == &vec!["l0=1".to_string()]), "{err}");
}

/// Propensity of A_k given the history, among the at-risk, from the cohort law.
fn cohort_propensity(law: &ccid_core::model::HistoryDistribution<f64>, k: usize, l: &[usize], a: &[u8]) -> f64 {
    let given = |t: &Trajectory| t.at_risk(k) && t.l.len() > k && t.l[..=k] == *l && t.a[..k] == *a;
    law.cond(|t| t.a[k] == 1, given, "history").unwrap()
}

#[test]
fn fitted_cells_are_within_four_standard_errors_of_the_cohort_law() {
    let spec = fixtures::reference_spec();
    let law = enumerate::<f64>(&spec, Regime::Natural).unwrap();
    let n = 100_000;

    let Study::CaseControl(d) = draw_study(&spec, &SamplingScheme::CaseBase { delta: ratio(1, 5) }, n, 77).unwrap()
    else {
        panic!("case-control design expected");
    };
    let t = fit_propensities(&d, PropensityForm::Baseline).unwrap();
    for (l0, cell) in &t.baseline {
        let truth = cohort_propensity(&law, 0, &[*l0], &[]);
        let se = (truth * (1.0 - truth) / cell.total).sqrt();
        assert!((cell.prob().unwrap() - truth).abs() <= 4.0 * se, "l0={l0}");
    }

    let scheme = TheoremId::RiskSetPerProtocolHr.default_scheme();
    let Study::CaseControl(d) = draw_study(&spec, &scheme, n, 78).unwrap() else {
        panic!("case-control design expected");
    };
    let tables = ccid_core::identify::propensity_tables(&d.empirical_law(), PropensityForm::TimeVarying);
    let mut checked = 0;
    for (key, cell) in &tables.time_varying {
        if cell.total < 30.0 {
            continue;
        }
        let truth = cohort_propensity(&law, key.k, &key.l, &key.a_past);
        let se = (truth * (1.0 - truth) / cell.total).sqrt();
        assert!((cell.prob().unwrap() - truth).abs() <= 4.0 * se, "{key:?}: {} vs {truth}", cell.prob().unwrap());
        checked += 1;
    }
    assert!(checked > 20, "{checked}");
}

fn matched_study(records: Vec<MatchedRecord>) -> Study {
    let sets = records
        .into_iter()
        .enumerate()
        .map(|(i, record)| MatchedSet { set_id: i, case_id: i as u64, control_ids: vec![0], record })
        .collect();
    Study::Matched(MatchedStudy {
        scheme: SamplingScheme::Matched { reference: MatchReference::M1, m: 1, exact_coords: vec![] },
        n_cohort: 0,
        seed: 0,
        spec_hash: String::new(),
        sets,
        dropped_cases: 0,
        pools: Vec::new(),
    })
}

fn pair(case_a: u8, control_a: u8) -> MatchedRecord {
    MatchedRecord {
        stratum: MatchStratum::Baseline { l0: 0 },
        case: MatchedUnit { a: case_a, l0: 0 },
        controls: vec![MatchedUnit { a: control_a, l0: 0 }],
    }
}

#[test]
fn discordant_count_ratio() {
    let mut records: Vec<MatchedRecord> = (0..30).map(|_| pair(1, 0)).collect();
    records.extend((0..15).map(|_| pair(0, 1)));
    records.extend((0..7).map(|_| pair(1, 1)));
    let e = estimate_functional(&matched_study(records), TheoremId::MatchedCaseBaseRr).unwrap();
    assert_eq!(e.value, 2.0);

    let concordant: Vec<MatchedRecord> = (0..10).map(|i| pair(i % 2, i % 2)).collect();
    let err = estimate_functional(&matched_study(concordant), TheoremId::MatchedCaseBaseRr).unwrap_err();
    assert!(matches!(err, Error::DegenerateFunctional(_)), "{err}");
}

#[test]
fn design_mismatch_is_rejected() {
    let spec = fixtures::reference_spec();
    let study = draw_study(&spec, &TheoremId::CaseBaseMarginalRr.default_scheme(), 1000, 1).unwrap();
    assert!(matches!(estimate_functional(&study, TheoremId::RiskSetMarginalHr), Err(Error::SchemeMismatch(_))));
}

#[test]
fn large_case_base_draw_is_within_three_bootstrap_errors() {
    let spec = fixtures::reference_spec();
    let id = TheoremId::CaseBaseMarginalRr;
    let truth = verify_theorem::<BigRational>(&spec, &id.default_scheme(), id).unwrap().lhs;
    let study = draw_study(&spec, &id.default_scheme(), 200_000, 20240101).unwrap();
    let b = bootstrap_se(&study, id, 200, 1).unwrap();
    assert_eq!(b.failures, 0);
    assert!((b.estimate - truth).abs() <= 3.0 * b.se, "{} vs {truth} (se {})", b.estimate, b.se);
}

#[test]
fn logistic_and_saturated_weights_agree_on_a_large_draw() {
    let spec = fixtures::reference_spec();
    let id = TheoremId::RiskSetPerProtocolHr;
    let study = draw_study(&spec, &id.default_scheme(), 100_000, 9).unwrap();
    let sat = estimate_functional(&study, id).unwrap().value;
    let logit = estimate_functional_with(&study, id, &PropensityModel::markov_logistic()).unwrap().value;
    assert!((sat - logit).abs() < 0.1, "{sat} vs {logit}");
}

#[test]
fn no_effect_matched_study_gives_zero_log_odds_ratio() {
    let spec = fixtures::null_effect_spec();
    let scheme = SamplingScheme::Matched { reference: MatchReference::M1, m: 1, exact_coords: vec![] };
    let Study::Matched(m) = draw_study(&spec, &scheme, 200_000, 4).unwrap() else {
        panic!("matched design expected");
    };
    assert!(m.sets.len() > 50_000, "{}", m.sets.len());
    let problem = ClrProblem::from_matched(&m.empirical_law(), 1, |u| vec![f64::from(u.a)]).unwrap();
    let fit = fit_clr(&problem, &[0.0], DEFAULT_CLR_TOL, DEFAULT_CLR_MAX_ITER).unwrap();
    let info = -clr_objective(&problem, &fit.beta).hessian[(0, 0)] * m.sets.len() as f64;
    let se = 1.0 / info.sqrt();
    assert!(fit.beta[0].abs() <= 3.0 * se, "{} (se {se})", fit.beta[0]);
}

fn partial_matching_problem() -> ClrProblem {
    let spec = fixtures::partial_matching_spec();
    let scheme = SamplingScheme::Matched { reference: MatchReference::M2Star, m: 2, exact_coords: vec![0] };
    let law = matched_distribution::<f64>(&spec, &scheme).unwrap();
    ClrProblem::from_matched(&law, 3, |u| {
        let a = f64::from(u.a);
        let l1 = spec.coord(u.l0, 1) as f64;
        vec![a, l1, a * l1]
    })
    .unwrap()
}

#[test]
fn population_fit_recovers_the_outcome_model() {
    let problem = partial_matching_problem();
    let truth = fixtures::PARTIAL_MATCHING_BETA;
    let at_truth = clr_objective(&problem, &truth);
    assert!(at_truth.gradient.amax() <= 1e-12, "{}", at_truth.gradient.amax());
    let fit = fit_clr(&problem, &[0.0; 3], 1e-13, DEFAULT_CLR_MAX_ITER).unwrap();
    assert!(fit.converged && fit.hessian_pd && fit.li_rank == 3);
    for (b, t) in fit.beta.iter().zip(truth) {
        assert!((b - t).abs() <= 1e-8, "{b} vs {t}");
    }
}

#[test]
fn collinear_features_are_rank_deficient() {
    let problem = ClrProblem::from_features(
        2,
        vec![(vec![1.0, 2.0], vec![vec![0.0, 0.0]], 1.0), (vec![0.0, 0.0], vec![vec![2.0, 4.0]], 1.0)],
    )
    .unwrap();
    assert_eq!(problem.li_rank(), 1);
    assert!(matches!(fit_clr(&problem, &[0.0, 0.0], 1e-10, 100), Err(Error::RankDeficient { rank: 1, p: 2 })));
}
