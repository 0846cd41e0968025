//! Cohort law specification: kernels, history terms, JSON form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{is_probability, parse_rational, prob_serde, rational_from_f64, NumericMode, Scalar};

/// A discrete-time cohort law over `periods` windows with ordering
/// L_k, A_k, Y_{k+1} inside each window and an absorbing event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct DgpSpec {
    pub periods: usize,
    pub covariate_levels: usize,
    /// Mixed-radix split of a covariate code into coordinates, first
    /// coordinate most significant. Defaults to a single coordinate.
    pub covariate_coords: Vec<usize>,
    pub u_prob: BigRational,
    pub kernel_l: Kernel,
    pub kernel_a: Kernel,
    pub kernel_y: Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KernelRole {
    L,
    A,
    Y,
}

impl fmt::Display for KernelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelRole::L => "L",
            KernelRole::A => "A",
            KernelRole::Y => "Y",
        };
        f.write_str(s)
    }
}

/// What a kernel may look at. For the covariate kernel `l` and `a` hold
/// the strict past; for the exposure kernel `l` includes the current
/// covariate; for the outcome kernel both include the current period.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    pub u: u8,
    pub k: usize,
    pub l: &'a [usize],
    pub a: &'a [u8],
    pub coords: &'a [usize],
}

impl History<'_> {
    pub fn describe(&self) -> String {
        let ls: Vec<String> = self.l.iter().map(|x| x.to_string()).collect();
        let as_: Vec<String> = self.a.iter().map(|x| x.to_string()).collect();
        format!("k={} u={} l=[{}] a=[{}]", self.k, self.u, ls.join(","), as_.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    U,
    Period,
    /// 1 in the first window, 0 afterwards.
    First,
    L,
    A,
    LPrev,
    APrev,
    LAt(usize),
    AAt(usize),
    Adherent,
    Coord(Box<Atom>, usize),
}

/// Product of atoms, written `a*l0.1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term(pub Vec<Atom>);

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::U => f.write_str("u"),
            Atom::Period => f.write_str("k"),
            Atom::First => f.write_str("first"),
            Atom::L => f.write_str("l"),
            Atom::A => f.write_str("a"),
            Atom::LPrev => f.write_str("l_prev"),
            Atom::APrev => f.write_str("a_prev"),
            Atom::LAt(j) => write!(f, "l{j}"),
            Atom::AAt(j) => write!(f, "a{j}"),
            Atom::Adherent => f.write_str("adherent"),
            Atom::Coord(inner, i) => write!(f, "{inner}.{i}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join("*"))
    }
}

impl FromStr for Atom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((base, idx)) = s.rsplit_once('.') {
            let inner: Atom = base.parse()?;
            if !matches!(inner, Atom::L | Atom::LPrev | Atom::LAt(_)) {
                return Err(Error::InvalidSpec(format!("coordinate of non-covariate term {s:?}")));
            }
            let i = idx
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("bad coordinate index in {s:?}")))?;
            return Ok(Atom::Coord(Box::new(inner), i));
        }
        Ok(match s {
            "u" => Atom::U,
            "k" => Atom::Period,
            "first" => Atom::First,
            "l" => Atom::L,
            "a" => Atom::A,
            "l_prev" => Atom::LPrev,
            "a_prev" => Atom::APrev,
            "adherent" => Atom::Adherent,
            _ => {
                let indexed = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.parse::<usize>().ok());
                if let Some(j) = indexed("l") {
                    Atom::LAt(j)
                } else if let Some(j) = indexed("a") {
                    Atom::AAt(j)
                } else {
                    return Err(Error::InvalidSpec(format!("unknown history term {s:?}")));
                }
            }
        })
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let atoms = s.split('*').map(str::parse).collect::<Result<Vec<Atom>>>()?;
        if atoms.is_empty() {
            return Err(Error::InvalidSpec("empty term".into()));
        }
        Ok(Term(atoms))
    }
}

fn missing(atom: &Atom, h: &History) -> Error {
    Error::Kernel(format!("term {atom} not available at {}", h.describe()))
}

fn covariate_coord(code: usize, coords: &[usize], i: usize) -> Option<usize> {
    if i >= coords.len() {
        return None;
    }
    let stride: usize = coords[i + 1..].iter().product();
    Some((code / stride) % coords[i])
}

impl Atom {
    pub fn eval(&self, h: &History) -> Result<i64> {
        let l_at = |j: usize| h.l.get(j).map(|&x| x as i64).ok_or_else(|| missing(self, h));
        let a_at = |j: usize| h.a.get(j).map(|&x| x as i64).ok_or_else(|| missing(self, h));
        match self {
            Atom::U => Ok(h.u as i64),
            Atom::Period => Ok(h.k as i64),
            Atom::First => Ok((h.k == 0) as i64),
            Atom::L => l_at(h.k),
            Atom::A => a_at(h.k),
            Atom::LPrev => {
                if h.k == 0 {
                    Ok(0)
                } else {
                    l_at(h.k - 1)
                }
            }
            Atom::APrev => {
                if h.k == 0 {
                    Ok(0)
                } else {
                    a_at(h.k - 1)
                }
            }
            Atom::LAt(j) => l_at(*j),
            Atom::AAt(j) => a_at(*j),
            Atom::Adherent => Ok(h.a.first().is_none_or(|&a0| h.a.iter().all(|&x| x == a0)) as i64),
            Atom::Coord(inner, i) => {
                let code = inner.eval(h)? as usize;
                covariate_coord(code, h.coords, *i)
                    .map(|x| x as i64)
                    .ok_or_else(|| Error::Kernel(format!("coordinate {i} out of range in {self}")))
            }
        }
    }

    fn reads_u(&self) -> bool {
        matches!(self, Atom::U)
    }
}

impl Term {
    pub fn eval(&self, h: &History) -> Result<i64> {
        let mut acc = 1;
        for atom in &self.0 {
            acc *= atom.eval(h)?;
        }
        Ok(acc)
    }

    pub fn reads_u(&self) -> bool {
        self.0.iter().any(Atom::reads_u)
    }
}

/// One row of a table kernel. `p` has one entry (probability of 1) or, for
/// the covariate kernel, one entry per covariate level.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub when: Vec<(Term, i64)>,
    pub p: Vec<BigRational>,
    p_float: Vec<f64>,
}

impl TableRow {
    pub fn new(when: Vec<(Term, i64)>, p: Vec<BigRational>) -> Self {
        let p_float = p.iter().map(f64::from_rational).collect();
        TableRow { when, p, p_float }
    }

    fn matches(&self, h: &History) -> Result<bool> {
        for (term, value) in &self.when {
            if term.eval(h)? != *value {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableKernel {
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticKernel {
    pub intercept: f64,
    pub coefficients: Vec<(Term, f64)>,
}

/// Either an ordered table (first matching row wins) or a logistic model.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Table(TableKernel),
    Logistic(LogisticKernel),
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Kernel {
    /// Shorthand for a table kernel with a single unconditional row.
    pub fn constant(p: BigRational) -> Self {
        Kernel::Table(TableKernel { rows: vec![TableRow::new(vec![], vec![p])] })
    }

    fn row(&self, h: &History) -> Result<Option<&TableRow>> {
        match self {
            Kernel::Table(t) => {
                for row in &t.rows {
                    if row.matches(h)? {
                        return Ok(Some(row));
                    }
                }
                Err(Error::Kernel(format!("no table row matches {}", h.describe())))
            }
            Kernel::Logistic(_) => Ok(None),
        }
    }

    fn linear_predictor(lk: &LogisticKernel, h: &History) -> Result<f64> {
        let mut eta = lk.intercept;
        for (term, coef) in &lk.coefficients {
            eta += coef * term.eval(h)? as f64;
        }
        Ok(eta)
    }

    /// Probability of the binary outcome 1 (exposure or event).
    pub fn prob<T: Scalar>(&self, h: &History) -> Result<T> {
        match self.row(h)? {
            Some(row) => {
                if row.p.len() != 1 {
                    return Err(Error::Kernel("binary kernel row has a vector value".into()));
                }
                Ok(match T::MODE {
                    NumericMode::Float => T::from_float(row.p_float[0])?,
                    NumericMode::Exact => T::from_rational(&row.p[0]),
                })
            }
            None => {
                let Kernel::Logistic(lk) = self else { unreachable!() };
                T::from_float(expit(Self::linear_predictor(lk, h)?))
            }
        }
    }

    pub fn prob_f64(&self, h: &History) -> Result<f64> {
        self.prob::<f64>(h)
    }

    /// Distribution over covariate levels.
    pub fn dist<T: Scalar>(&self, h: &History, levels: usize) -> Result<Vec<T>> {
        match self.row(h)? {
            Some(row) => {
                let lift = |i: usize| -> Result<T> {
                    Ok(match T::MODE {
                        NumericMode::Float => T::from_float(row.p_float[i])?,
                        NumericMode::Exact => T::from_rational(&row.p[i]),
                    })
                };
                if row.p.len() == levels {
                    (0..levels).map(lift).collect()
                } else if row.p.len() == 1 && levels == 2 {
                    let p1 = lift(0)?;
                    Ok(vec![T::one() - p1.clone(), p1])
                } else {
                    Err(Error::Kernel(format!(
                        "covariate row has {} entries for {levels} levels",
                        row.p.len()
                    )))
                }
            }
            None => {
                if levels != 2 {
                    return Err(Error::Kernel("logistic covariate kernel needs binary covariate".into()));
                }
                let Kernel::Logistic(lk) = self else { unreachable!() };
                let p1 = T::from_float(expit(Self::linear_predictor(lk, h)?))?;
                Ok(vec![T::one() - p1.clone(), p1])
            }
        }
    }

    pub fn reads_u(&self) -> bool {
        match self {
            Kernel::Table(t) => t.rows.iter().any(|r| r.when.iter().any(|(term, _)| term.reads_u())),
            Kernel::Logistic(lk) => lk.coefficients.iter().any(|(term, c)| *c != 0.0 && term.reads_u()),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Kernel::Table(_))
    }

    /// Table entries outside [0,1] and covariate vectors not summing to 1.
    pub fn static_range_violations(&self, role: KernelRole) -> Vec<String> {
        let mut out = Vec::new();
        if let Kernel::Table(t) = self {
            for (i, row) in t.rows.iter().enumerate() {
                if let Some(p) = row.p.iter().find(|p| !is_probability(p)) {
                    out.push(format!("kernel {role} row {i}: entry {p} outside [0,1]"));
                }
                if row.p.len() > 1 {
                    let total: BigRational = row.p.iter().cloned().sum();
                    if !total.is_one() {
                        out.push(format!("kernel {role} row {i}: covariate entries sum to {total}"));
                    }
                }
            }
        }
        out
    }
}

impl DgpSpec {
    pub fn check(&self) -> Result<()> {
        if self.periods == 0 {
            return Err(Error::InvalidSpec("K must be positive".into()));
        }
        if self.covariate_levels == 0 {
            return Err(Error::InvalidSpec("covariate_levels must be positive".into()));
        }
        if self.covariate_coords.iter().product::<usize>() != self.covariate_levels
            || self.covariate_coords.contains(&0)
        {
            return Err(Error::InvalidSpec(format!(
                "covariate_coords {:?} do not multiply to {}",
                self.covariate_coords, self.covariate_levels
            )));
        }
        if !is_probability(&self.u_prob) {
            return Err(Error::InvalidSpec(format!("u_prob {} outside [0,1]", self.u_prob)));
        }
        if let Kernel::Table(t) = &self.kernel_l {
            for (i, row) in t.rows.iter().enumerate() {
                let ok = row.p.len() == self.covariate_levels || (row.p.len() == 1 && self.covariate_levels == 2);
                if !ok {
                    return Err(Error::InvalidSpec(format!(
                        "kernel L row {i} has {} entries for {} levels",
                        row.p.len(),
                        self.covariate_levels
                    )));
                }
            }
        }
        for (role, k) in [(KernelRole::A, &self.kernel_a), (KernelRole::Y, &self.kernel_y)] {
            if let Kernel::Table(t) = k {
                if let Some(i) = t.rows.iter().position(|r| r.p.len() != 1) {
                    return Err(Error::InvalidSpec(format!("kernel {role} row {i} must hold one probability")));
                }
            }
        }
        if matches!(self.kernel_l, Kernel::Logistic(_)) && self.covariate_levels != 2 {
            return Err(Error::InvalidSpec("logistic covariate kernel needs binary covariate".into()));
        }
        Ok(())
    }

    pub fn kernel(&self, role: KernelRole) -> &Kernel {
        match role {
            KernelRole::L => &self.kernel_l,
            KernelRole::A => &self.kernel_a,
            KernelRole::Y => &self.kernel_y,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.kernel_l.is_exact() && self.kernel_a.is_exact() && self.kernel_y.is_exact()
    }

    /// Values of U with positive mass, paired with their probabilities.
    pub fn u_levels<T: Scalar>(&self) -> Vec<(u8, T)> {
        let p1 = T::from_rational(&self.u_prob);
        let p0 = T::one() - p1.clone();
        let mut out = Vec::new();
        if !p0.is_zero() {
            out.push((0, p0));
        }
        if !p1.is_zero() {
            out.push((1, p1));
        }
        out
    }

    pub fn coord(&self, code: usize, i: usize) -> usize {
        covariate_coord(code, &self.covariate_coords, i).expect("coordinate index in range")
    }

    /// Combine per-coordinate values into a covariate code.
    pub fn code_from_coords(&self, values: &[usize]) -> usize {
        values.iter().zip(&self.covariate_coords).fold(0, |acc, (&v, &radix)| acc * radix + v)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash_hex(&self) -> String {
        let canonical = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

// JSON form

#[derive(Serialize, Deserialize)]
struct RawSpec {
    #[serde(rename = "K")]
    periods: usize,
    covariate_levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    covariate_coords: Option<Vec<usize>>,
    #[serde(with = "prob_serde", default = "BigRational::zero")]
    u_prob: BigRational,
    kernels: RawKernels,
}

#[derive(Serialize, Deserialize)]
struct RawKernels {
    #[serde(rename = "L")]
    l: RawKernel,
    #[serde(rename = "A")]
    a: RawKernel,
    #[serde(rename = "Y")]
    y: RawKernel,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum RawKernel {
    Table { rows: Vec<RawRow> },
    Logistic { intercept: f64, #[serde(default)] coefficients: BTreeMap<String, f64> },
}

#[derive(Serialize, Deserialize)]
struct RawRow {
    #[serde(default, skip_serializing_if = "Vec::is_empty", with = "when_serde")]
    when: Vec<(String, i64)>,
    p: serde_json::Value,
}

/// `when` is a JSON object; row order of conditions is kept as written.
mod when_serde {
    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &[(String, i64)], s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(v.len()))?;
        for (k, x) in v {
            m.serialize_entry(k, x)?;
        }
        m.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, i64)>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<(String, i64)>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from history terms to integer values")
            }
            fn visit_map<M: MapAccess<'de>>(self, mut map: M) -> Result<Self::Value, M::Error> {
                let mut out = Vec::new();
                while let Some(entry) = map.next_entry::<String, i64>()? {
                    out.push(entry);
                }
                Ok(out)
            }
        }
        d.deserialize_map(V)
    }
}

fn value_to_rational(v: &serde_json::Value) -> Result<BigRational> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => rational_from_f64(
            n.as_f64().ok_or_else(|| Error::InvalidSpec(format!("bad number {n}")))?,
        ),
        other => Err(Error::InvalidSpec(format!("expected probability, found {other}"))),
    }
}

impl TryFrom<RawKernel> for Kernel {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Self> {
        Ok(match raw {
            RawKernel::Table { rows } => {
                let rows = rows
                    .into_iter()
                    .map(|r| {
                        let when = r
                            .when
                            .into_iter()
                            .map(|(t, v)| Ok((t.parse::<Term>()?, v)))
                            .collect::<Result<Vec<_>>>()?;
                        let p = match &r.p {
                            serde_json::Value::Array(xs) => {
                                xs.iter().map(value_to_rational).collect::<Result<Vec<_>>>()?
                            }
                            v => vec![value_to_rational(v)?],
                        };
                        Ok(TableRow::new(when, p))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Kernel::Table(TableKernel { rows })
            }
            RawKernel::Logistic { intercept, coefficients } => {
                let coefficients = coefficients
                    .into_iter()
                    .map(|(t, c)| Ok((t.parse::<Term>()?, c)))
                    .collect::<Result<Vec<_>>>()?;
                Kernel::Logistic(LogisticKernel { intercept, coefficients })
            }
        })
    }
}

impl From<Kernel> for RawKernel {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Table(t) => RawKernel::Table {
                rows: t
                    .rows
                    .into_iter()
                    .map(|r| RawRow {
                        when: r.when.into_iter().map(|(t, v)| (t.to_string(), v)).collect(),
                        p: if r.p.len() == 1 {
                            serde_json::Value::String(r.p[0].to_string())
                        } else {
                            serde_json::Value::Array(
                                r.p.iter().map(|x| serde_json::Value::String(x.to_string())).collect(),
                            )
                        },
                    })
                    .collect(),
            },
            Kernel::Logistic(lk) => RawKernel::Logistic {
                intercept: lk.intercept,
                coefficients: lk.coefficients.into_iter().map(|(t, c)| (t.to_string(), c)).collect(),
            },
        }
    }
}

impl TryFrom<RawSpec> for DgpSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = DgpSpec {
            periods: raw.periods,
            covariate_levels: raw.covariate_levels,
            covariate_coords: raw.covariate_coords.unwrap_or_else(|| vec![raw.covariate_levels]),
            u_prob: raw.u_prob,
            kernel_l: raw.kernels.l.try_into()?,
            kernel_a: raw.kernels.a.try_into()?,
            kernel_y: raw.kernels.y.try_into()?,
        };
        spec.check()?;
        Ok(spec)
    }
}

impl From<DgpSpec> for RawSpec {
    fn from(s: DgpSpec) -> Self {
        let coords = (s.covariate_coords != vec![s.covariate_levels]).then_some(s.covariate_coords);
        RawSpec {
            periods: s.periods,
            covariate_levels: s.covariate_levels,
            covariate_coords: coords,
            u_prob: s.u_prob,
            kernels: RawKernels { l: s.kernel_l.into(), a: s.kernel_a.into(), y: s.kernel_y.into() },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn terms_round_trip() {
        for s in ["u", "k", "first", "l", "a", "l_prev", "a_prev", "l0", "a2", "adherent", "l0.1", "a*l0.1"] {
            let t: Term = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert!("x".parse::<Term>().is_err());
        assert!("a.1".parse::<Term>().is_err());
    }

    #[test]
    fn coordinates_split_codes() {
        let h = History { u: 0, k: 0, l: &[3], a: &[], coords: &[2, 2] };
        let first: Term = "l.0".parse().unwrap();
        let second: Term = "l.1".parse().unwrap();
        assert_eq!(first.eval(&h).unwrap(), 1);
        assert_eq!(second.eval(&h).unwrap(), 1);
        let h = History { l: &[2], ..h };
        assert_eq!(first.eval(&h).unwrap(), 1);
        assert_eq!(second.eval(&h).unwrap(), 0);
    }

    #[test]
    fn table_rows_match_in_order() {
        let json = r#"{"type":"table","rows":[{"when":{"l":1},"p":"3/4"},{"p":0.25}]}"#;
        let raw: RawKernel = serde_json::from_str(json).unwrap();
        let k: Kernel = raw.try_into().unwrap();
        let h = History { u: 0, k: 0, l: &[1], a: &[], coords: &[2] };
        assert_eq!(k.prob::<BigRational>(&h).unwrap(), ratio(3, 4));
        let h = History { l: &[0], ..h };
        assert_eq!(k.prob::<BigRational>(&h).unwrap(), ratio(1, 4));
    }

    #[test]
    fn unavailable_terms_are_errors() {
        let k = Kernel::Logistic(LogisticKernel { intercept: 0.0, coefficients: vec![("a".parse().unwrap(), 1.0)] });
        let h = History { u: 0, k: 0, l: &[0], a: &[], coords: &[2] };
        assert!(k.prob::<f64>(&h).is_err());
    }
}
