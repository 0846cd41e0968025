//! Trajectories and their exact joint law under an intervention regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::spec::{DgpSpec, History};
use crate::scalar::Scalar;

pub const DEFAULT_ENUMERATION_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "a", rename_all = "snake_case")]
pub enum Regime {
    Natural,
    SetBaseline(u8),
    SetAll(u8),
}

impl Regime {
    fn forced(&self, k: usize) -> Option<u8> {
        match *self {
            Regime::Natural => None,
            Regime::SetBaseline(a) => (k == 0).then_some(a),
            Regime::SetAll(a) => Some(a),
        }
    }
}

/// One subject's path, truncated at the event. `event = Some(k)` means the
/// event occurred in window k (Y_{k+1} = 1 with Y_k = 0); `l` and `a` then
/// hold k+1 entries. Event-free subjects carry all `K` periods.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Trajectory {
    pub u: u8,
    pub l: Vec<usize>,
    pub a: Vec<u8>,
    pub event: Option<usize>,
}

impl Trajectory {
    /// Y_j for j in 0..=K.
    pub fn y(&self, j: usize) -> bool {
        self.event.is_some_and(|e| e < j)
    }

    /// Y_j = 0, i.e. at risk at the start of window j.
    pub fn at_risk(&self, j: usize) -> bool {
        !self.y(j)
    }

    pub fn is_event(&self) -> bool {
        self.event.is_some()
    }

    /// Last event-free time for a subject with an event.
    pub fn last_event_free(&self) -> Option<usize> {
        self.event
    }

    /// A_0 = ... = A_j.
    pub fn adherent_through(&self, j: usize) -> bool {
        j < self.a.len() && self.a[..=j].iter().all(|&x| x == self.a[0])
    }

    /// Adherent through the event window (or through the end of follow-up).
    pub fn adherent(&self) -> bool {
        self.a.iter().all(|&x| x == self.a[0])
    }

    pub fn a0(&self) -> u8 {
        self.a[0]
    }

    pub fn l0(&self) -> usize {
        self.l[0]
    }

    pub fn periods_observed(&self) -> usize {
        self.a.len()
    }
}

/// Exact finite law over trajectories.
#[derive(Debug, Clone)]
pub struct HistoryDistribution<T> {
    pub periods: usize,
    pub regime: Regime,
    pub entries: Vec<(Trajectory, T)>,
}

impl<T: Scalar> HistoryDistribution<T> {
    pub fn total(&self) -> T {
        self.prob(|_| true)
    }

    pub fn prob(&self, pred: impl Fn(&Trajectory) -> bool) -> T {
        let mut acc = T::zero();
        for (t, p) in &self.entries {
            if pred(t) {
                acc = acc + p.clone();
            }
        }
        acc
    }

    /// Pr(event | given), failing on a zero-mass conditioning event.
    pub fn cond(
        &self,
        event: impl Fn(&Trajectory) -> bool,
        given: impl Fn(&Trajectory) -> bool,
        what: &str,
    ) -> Result<T> {
        let mut num = T::zero();
        let mut den = T::zero();
        for (t, p) in &self.entries {
            if given(t) {
                den = den + p.clone();
                if event(t) {
                    num = num + p.clone();
                }
            }
        }
        if den.is_zero() {
            return Err(Error::DegenerateEstimand(format!("zero-mass conditioning event: {what}")));
        }
        Ok(num / den)
    }
}

/// Hooks called while the law is being built.
pub(crate) trait WalkObserver<T> {
    fn exposure(&mut self, _h: &History, _mass: &T, _p: &T) {}
}

pub(crate) struct NoObserver;
impl<T> WalkObserver<T> for NoObserver {}

fn check_unit<T: Scalar>(p: &T, what: &str, h: &History) -> Result<()> {
    if *p < T::zero() || *p > T::one() {
        return Err(Error::Kernel(format!("{what} probability {p} outside [0,1] at {}", h.describe())));
    }
    Ok(())
}

struct Walk<'a, T, O> {
    spec: &'a DgpSpec,
    regime: Regime,
    cap: usize,
    out: Vec<(Trajectory, T)>,
    observer: &'a mut O,
    l: Vec<usize>,
    a: Vec<u8>,
}

impl<T: Scalar, O: WalkObserver<T>> Walk<'_, T, O> {
    fn push(&mut self, u: u8, event: Option<usize>, mass: T) -> Result<()> {
        if self.out.len() >= self.cap {
            return Err(Error::EnumerationBudgetExceeded { cap: self.cap });
        }
        self.out.push((Trajectory { u, l: self.l.clone(), a: self.a.clone(), event }, mass));
        Ok(())
    }

    fn period(&mut self, u: u8, k: usize, mass: T) -> Result<()> {
        let spec = self.spec;
        if k == spec.periods {
            return self.push(u, None, mass);
        }
        let coords = &spec.covariate_coords;
        let hl = History { u, k, l: &self.l, a: &self.a, coords };
        let dist: Vec<T> = spec.kernel_l.dist(&hl, spec.covariate_levels)?;
        for p in &dist {
            check_unit(p, "covariate", &hl)?;
        }
        for (lv, pl) in dist.into_iter().enumerate() {
            if pl.is_zero() {
                continue;
            }
            self.l.push(lv);
            let ml = mass.clone() * pl;
            let ha = History { u, k, l: &self.l, a: &self.a, coords };
            let p1: T = spec.kernel_a.prob(&ha)?;
            check_unit(&p1, "exposure", &ha)?;
            self.observer.exposure(&ha, &ml, &p1);
            let arms = match self.regime.forced(k) {
                Some(a) => vec![(a, T::one())],
                None => vec![(0, T::one() - p1.clone()), (1, p1)],
            };
            for (av, pa) in arms {
                if pa.is_zero() {
                    continue;
                }
                self.a.push(av);
                let ma = ml.clone() * pa;
                let hy = History { u, k, l: &self.l, a: &self.a, coords };
                let py: T = spec.kernel_y.prob(&hy)?;
                check_unit(&py, "event", &hy)?;
                let survive = T::one() - py.clone();
                if !py.is_zero() {
                    self.push(u, Some(k), ma.clone() * py)?;
                }
                if !survive.is_zero() {
                    self.period(u, k + 1, ma * survive)?;
                }
                self.a.pop();
            }
            self.l.pop();
        }
        Ok(())
    }
}

pub(crate) fn walk<T: Scalar, O: WalkObserver<T>>(
    spec: &DgpSpec,
    regime: Regime,
    cap: usize,
    observer: &mut O,
) -> Result<HistoryDistribution<T>> {
    spec.check()?;
    let mut w = Walk { spec, regime, cap, out: Vec::new(), observer, l: Vec::new(), a: Vec::new() };
    for (u, pu) in spec.u_levels::<T>() {
        w.period(u, 0, pu)?;
    }
    Ok(HistoryDistribution { periods: spec.periods, regime, entries: w.out })
}

/// Exact law of the cohort under `regime`, with the default budget.
pub fn enumerate<T: Scalar>(spec: &DgpSpec, regime: Regime) -> Result<HistoryDistribution<T>> {
    enumerate_capped(spec, regime, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_capped<T: Scalar>(spec: &DgpSpec, regime: Regime, cap: usize) -> Result<HistoryDistribution<T>> {
    walk(spec, regime, cap, &mut NoObserver)
}
