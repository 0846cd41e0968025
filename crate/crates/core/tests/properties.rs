use ccid_core::estimate::{clr_objective, ClrProblem, ClrSet};
use ccid_core::identify::functionals::weighted_control_odds;
use ccid_core::identify::{verify_theorem, TheoremId};
use ccid_core::model::{enumerate, DgpSpec, Regime};
use ccid_core::sampling::{augment_selection, selection_probabilities, PerStratum, SamplingScheme};
use ccid_core::scalar::{parse_rational, ratio};
use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use serde_json::json;

fn p(n: u32) -> String {
    format!("{n}/20")
}

/// Table kernels with interior probabilities in twentieths.
fn arb_spec() -> impl Strategy<Value = DgpSpec> {
    (1usize..=3, prop::collection::vec(1u32..20, 2), prop::collection::vec(1u32..20, 6), prop::collection::vec(1u32..20, 6))
        .prop_map(|(k, l, a, y)| {
            let v = json!({
                "K": k, "covariate_levels": 2,
                "kernels": {
                    "L": {"type": "table", "rows": [{"when": {"k": 0}, "p": p(l[0])}, {"p": p(l[1])}]},
                    "A": {"type": "table", "rows": [
                        {"when": {"k": 0, "l": 0}, "p": p(a[0])},
                        {"when": {"k": 0}, "p": p(a[1])},
                        {"when": {"a_prev": 1, "l": 0}, "p": p(a[2])},
                        {"when": {"a_prev": 1}, "p": p(a[3])},
                        {"when": {"l": 0}, "p": p(a[4])},
                        {"p": p(a[5])}
                    ]},
                    "Y": {"type": "table", "rows": [
                        {"when": {"a0": 1, "l": 1}, "p": p(y[0])},
                        {"when": {"a0": 1, "k": 0}, "p": p(y[1])},
                        {"when": {"a0": 1}, "p": p(y[2])},
                        {"when": {"l": 1}, "p": p(y[3])},
                        {"when": {"k": 0}, "p": p(y[4])},
                        {"p": p(y[5])}
                    ]}
                }
            });
            DgpSpec::from_json(&v.to_string()).unwrap()
        })
}

fn arb_scheme() -> impl Strategy<Value = SamplingScheme> {
    (1i64..10, 0usize..4).prop_map(|(d, kind)| {
        let delta = ratio(d, 10);
        match kind {
            0 => SamplingScheme::CaseBase { delta },
            1 => SamplingScheme::Survivor { delta: PerStratum::Constant(delta) },
            2 => SamplingScheme::RiskSetItt { delta, controls_per_case: None },
            _ => SamplingScheme::RiskSetPp { delta, controls_per_case: None, adherent_pool: d % 2 == 0 },
        }
    })
}

fn arb_clr() -> impl Strategy<Value = (ClrProblem, Vec<f64>)> {
    (1usize..4, 1usize..4).prop_flat_map(|(p, m)| {
        let set = (prop::collection::vec(prop::collection::vec(-2.0f64..2.0, p), m), 0.1f64..3.0)
            .prop_map(|(x, weight)| ClrSet { weight, x });
        (prop::collection::vec(set, 1..12), prop::collection::vec(-1.5f64..1.5, p))
            .prop_map(move |(sets, beta)| (ClrProblem::new(p, sets).unwrap(), beta))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn laws_sum_to_one_exactly(spec in arb_spec()) {
        for regime in [Regime::Natural, Regime::SetBaseline(0), Regime::SetAll(1)] {
            let law = enumerate::<BigRational>(&spec, regime).unwrap();
            prop_assert!(law.total().is_one());
            prop_assert!(law.entries.iter().all(|(_, m)| *m > BigRational::zero()));
        }
    }

    #[test]
    fn available_laws_are_normalized_and_include_every_case(spec in arb_spec(), scheme in arb_scheme()) {
        let law = enumerate::<BigRational>(&spec, Regime::Natural).unwrap();
        let probs = selection_probabilities(&law, &scheme).unwrap();
        prop_assert!(probs.iter().flatten().all(|q| *q >= BigRational::zero() && *q <= BigRational::one()));
        let avail = augment_selection(&law, &scheme, 2).unwrap();
        prop_assert!(avail.total().is_one());
        prop_assert!(avail.records.iter().all(|(r, _)| avail.is_case(r) || r.selected()));
        for (r, _) in &avail.records {
            for k in 0..r.selections.len() {
                if r.s(k) > 0 && scheme.is_risk_set() {
                    prop_assert!(r.traj.at_risk(k));
                }
            }
        }
    }

    #[test]
    fn case_base_identity_holds_without_unmeasured_causes(spec in arb_spec()) {
        let id = TheoremId::CaseBaseMarginalRr;
        let rec = verify_theorem::<BigRational>(&spec, &id.default_scheme(), id).unwrap();
        prop_assert!(rec.equal);
        let law = enumerate::<BigRational>(&spec, Regime::Natural).unwrap();
        let avail = augment_selection(&law, &SamplingScheme::CaseBase { delta: ratio(1, 3) }, 2).unwrap();
        prop_assert!(weighted_control_odds(&avail).unwrap().is_one());
    }

    #[test]
    fn clr_gradient_matches_central_differences((problem, beta) in arb_clr()) {
        let h = 1e-5;
        let eval = clr_objective(&problem, &beta);
        let scale = eval.gradient.amax().max(1.0);
        for j in 0..problem.p {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (clr_objective(&problem, &up).value - clr_objective(&problem, &down).value) / (2.0 * h);
            prop_assert!((fd - eval.gradient[j]).abs() <= 1e-6 * scale, "j={} fd={} g={}", j, fd, eval.gradient[j]);
            let gu = clr_objective(&problem, &up).gradient;
            let gd = clr_objective(&problem, &down).gradient;
            let hscale = eval.hessian.amax().max(1.0);
            for i in 0..problem.p {
                let fdh = (gu[i] - gd[i]) / (2.0 * h);
                prop_assert!((fdh - eval.hessian[(i, j)]).abs() <= 1e-4 * hscale);
            }
        }
    }

    #[test]
    fn negative_clr_hessian_is_positive_semidefinite((problem, beta) in arb_clr()) {
        let neg: DMatrix<f64> = -clr_objective(&problem, &beta).hessian;
        let min = neg.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-10, "{}", min);
        if problem.li_rank() == problem.p {
            prop_assert!(min > 0.0);
        }
    }

    #[test]
    fn rationals_parse_from_fractions_and_decimals(n in 0i64..1000, d in 1i64..1000) {
        prop_assert_eq!(parse_rational(&format!("{n}/{d}")).unwrap(), ratio(n, d));
        prop_assert_eq!(parse_rational(&format!(" {n} / {d} ")).unwrap(), ratio(n, d));
        prop_assert_eq!(parse_rational(&format!("0.{n:03}")).unwrap(), ratio(n, 1000));
    }
}
