//! Two single-period laws that survivor sampling cannot tell apart but
//! whose marginal causal odds ratios differ.
//!
//! Each law is built from Y ~ Bern(alpha), S | Y ~ Bern(delta (1 - Y)),
//! L_0 | Y ~ Bern(1/2 - Y/5) and A_0 | L_0, Y ~ Bern(3/10 + L_0/5 + 3Y/10).

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::functionals::conditional_exposure_odds_ratio;
use crate::model::Trajectory;
use crate::sampling::{AvailableLaw, AvailableRecord, PerStratum, SamplingScheme};
use crate::scalar::ratio;

/// Index of the (l, a, y, s) cell in the 16-cell tables.
pub fn cell_index(l: u8, a: u8, y: u8, s: u8) -> usize {
    ((l as usize) << 3) | ((a as usize) << 2) | ((y as usize) << 1) | s as usize
}

/// (l, a, y, s) of a cell index.
pub fn cell_values(i: usize) -> (u8, u8, u8, u8) {
    (((i >> 3) & 1) as u8, ((i >> 2) & 1) as u8, ((i >> 1) & 1) as u8, (i & 1) as u8)
}

fn bern(p: &BigRational, x: u8) -> BigRational {
    if x == 1 {
        p.clone()
    } else {
        BigRational::one() - p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemarkDistribution {
    pub alpha: BigRational,
    pub delta: BigRational,
    /// Joint masses of (L_0, A_0, Y, S), indexed by [`cell_index`].
    pub cells: [BigRational; 16],
}

impl RemarkDistribution {
    pub fn cell(&self, l: u8, a: u8, y: u8, s: u8) -> &BigRational {
        &self.cells[cell_index(l, a, y, s)]
    }

    fn mass(&self, pred: impl Fn(u8, u8, u8, u8) -> bool) -> BigRational {
        (0..16)
            .filter(|&i| {
                let (l, a, y, s) = cell_values(i);
                pred(l, a, y, s)
            })
            .fold(BigRational::zero(), |acc, i| acc + &self.cells[i])
    }

    /// Pr(Y = 1 | L_0 = l, A_0 = a).
    pub fn risk(&self, l: u8, a: u8) -> BigRational {
        self.mass(|l2, a2, y, _| l2 == l && a2 == a && y == 1) / self.mass(|l2, a2, _, _| l2 == l && a2 == a)
    }

    /// Odds(Y = 1 | L_0 = l, A_0 = 1) / Odds(Y = 1 | L_0 = l, A_0 = 0).
    pub fn conditional_or(&self, l: u8) -> BigRational {
        let odds = |p: BigRational| p.clone() / (BigRational::one() - p);
        odds(self.risk(l, 1)) / odds(self.risk(l, 0))
    }
}

fn check_range(x: &BigRational, name: &str, allow_one: bool) -> Result<()> {
    let one = BigRational::one();
    if *x <= BigRational::zero() || *x > one || (*x == one && !allow_one) {
        let upper = if allow_one { "]" } else { ")" };
        return Err(Error::DomainError(format!("{name} = {x} must lie in (0, 1{upper}")));
    }
    Ok(())
}

pub fn remark_distribution(alpha: BigRational, delta: BigRational) -> Result<RemarkDistribution> {
    check_range(&alpha, "alpha", false)?;
    // delta = 1 is a full census of survivors.
    check_range(&delta, "delta", true)?;
    let cells = std::array::from_fn(|i| {
        let (l, a, y, s) = cell_values(i);
        let yf = BigRational::from_integer(y.into());
        let lf = BigRational::from_integer(l.into());
        let one = BigRational::one();
        let ps = delta.clone() * (one.clone() - yf.clone());
        let pl = ratio(1, 2) - ratio(1, 5) * yf.clone();
        let pa = ratio(3, 10) + ratio(1, 5) * lf + ratio(3, 10) * yf;
        bern(&alpha, y) * bern(&ps, s) * bern(&pl, l) * bern(&pa, a)
    });
    Ok(RemarkDistribution { alpha, delta, cells })
}

/// The two laws of the published example.
pub fn published_pair() -> (RemarkDistribution, RemarkDistribution) {
    (
        remark_distribution(ratio(1, 10), ratio(1, 10)).expect("valid parameters"),
        remark_distribution(ratio(1, 5), ratio(9, 40)).expect("valid parameters"),
    )
}

/// Law of (L_0, A_0, Y, S) given Y = 1 or S = 1.
pub fn available_law(d: &RemarkDistribution) -> [BigRational; 16] {
    let included = d.mass(|_, _, y, s| y == 1 || s == 1);
    std::array::from_fn(|i| {
        let (_, _, y, s) = cell_values(i);
        if y == 1 || s == 1 {
            d.cells[i].clone() / included.clone()
        } else {
            BigRational::zero()
        }
    })
}

/// Pr(Y = 1 | included).
pub fn case_share(d: &RemarkDistribution) -> BigRational {
    available_law(d)
        .iter()
        .enumerate()
        .filter(|(i, _)| cell_values(*i).2 == 1)
        .fold(BigRational::zero(), |acc, (_, p)| acc + p)
}

/// Odds(Y(1) = 1) / Odds(Y(0) = 1) by standardization over L_0.
pub fn marginal_causal_or(d: &RemarkDistribution) -> BigRational {
    let pl = |l: u8| d.mass(|l2, _, _, _| l2 == l);
    let risk = |a: u8| pl(0) * d.risk(0, a) + pl(1) * d.risk(1, a);
    let odds = |p: BigRational| p.clone() / (BigRational::one() - p);
    odds(risk(1)) / odds(risk(0))
}

/// The available law as single-period survivor-sampled records, so the
/// generic functionals apply to it.
pub fn as_survivor_law(d: &RemarkDistribution) -> AvailableLaw<BigRational> {
    let records = available_law(d)
        .into_iter()
        .enumerate()
        .filter(|(_, p)| !p.is_zero())
        .map(|(i, p)| {
            let (l, a, y, s) = cell_values(i);
            let traj = Trajectory { u: 0, l: vec![l as usize], a: vec![a], event: (y == 1).then_some(0) };
            (AvailableRecord { traj, selections: vec![s as u32] }, p)
        })
        .collect();
    AvailableLaw {
        scheme: SamplingScheme::Survivor { delta: PerStratum::Constant(d.delta.clone()) },
        periods: 1,
        covariate_levels: 2,
        records,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fraction {
    pub numerator: String,
    pub denominator: String,
    pub value: f64,
}

impl From<&BigRational> for Fraction {
    fn from(r: &BigRational) -> Self {
        Fraction {
            numerator: r.numer().to_string(),
            denominator: r.denom().to_string(),
            value: crate::scalar::Scalar::to_f64(r),
        }
    }
}

impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub alpha: [Fraction; 2],
    pub delta: [Fraction; 2],
    pub case_share: [Fraction; 2],
    pub available_laws_equal: bool,
    pub or1: Fraction,
    pub or2: Fraction,
    pub distinct: bool,
    /// Per-L_0 exposure odds ratio from the shared available law.
    pub identified_conditional_or: Vec<Fraction>,
    /// True per-L_0 odds ratios; equal in both laws and to the identified value.
    pub conditional_or: [Vec<Fraction>; 2],
}

pub fn compare(d1: &RemarkDistribution, d2: &RemarkDistribution) -> Result<CounterexampleReport> {
    let identified = conditional_exposure_odds_ratio(&as_survivor_law(d1))?;
    let cond = |d: &RemarkDistribution| (0..2).map(|l| Fraction::from(&d.conditional_or(l))).collect::<Vec<_>>();
    let or1 = marginal_causal_or(d1);
    let or2 = marginal_causal_or(d2);
    Ok(CounterexampleReport {
        alpha: [(&d1.alpha).into(), (&d2.alpha).into()],
        delta: [(&d1.delta).into(), (&d2.delta).into()],
        case_share: [(&case_share(d1)).into(), (&case_share(d2)).into()],
        available_laws_equal: available_law(d1) == available_law(d2),
        distinct: or1 != or2,
        or1: (&or1).into(),
        or2: (&or2).into(),
        identified_conditional_or: identified.strata.iter().map(|(_, v)| v.into()).collect(),
        conditional_or: [cond(d1), cond(d2)],
    })
}

pub fn run_counterexample() -> CounterexampleReport {
    let (d1, d2) = published_pair();
    compare(&d1, &d2).expect("published laws have interior cells")
}
