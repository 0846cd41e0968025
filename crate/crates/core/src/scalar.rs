//! Numeric back ends: arbitrary-precision rationals and `f64`.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericMode {
    Exact,
    Float,
}

/// Field operations shared by the exact and floating back ends.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + 'static
{
    const MODE: NumericMode;

    fn from_rational(r: &BigRational) -> Self;

    /// Fails in exact mode: a float has no faithful rational meaning here.
    fn from_float(x: f64) -> Result<Self>;

    fn from_count(n: u64) -> Self;

    fn to_f64(&self) -> f64;

    /// Exact rational form, if this back end has one.
    fn to_rational(&self) -> Option<BigRational>;

    /// Equality up to `tol`; the exact back end ignores `tol`.
    fn same_as(&self, other: &Self, tol: f64) -> bool;
}

impl Scalar for BigRational {
    const MODE: NumericMode = NumericMode::Exact;

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn from_float(x: f64) -> Result<Self> {
        Err(Error::ExactUnsupported(format!(
            "floating-point kernel output {x} in exact mode; use table kernels"
        )))
    }

    fn from_count(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn to_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }

    fn same_as(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
}

impl Scalar for f64 {
    const MODE: NumericMode = NumericMode::Float;

    fn from_rational(r: &BigRational) -> Self {
        ratio_to_f64(r)
    }

    fn from_float(x: f64) -> Result<Self> {
        Ok(x)
    }

    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Option<BigRational> {
        None
    }

    fn same_as(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => ToPrimitive::to_f64(r).unwrap_or(f64::NAN),
    }
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses "p/q", a decimal literal, or an integer into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidSpec(format!("cannot parse probability {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let all = format!("{int_part}{frac_part}");
    if !all.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let mut value = BigRational::from_integer(BigInt::from_str(&all).map_err(|_| bad())?);
    let scale = exp - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    for _ in 0..scale.unsigned_abs() {
        value = if scale > 0 { value * &ten } else { value / &ten };
    }
    Ok(if neg { -value } else { value })
}

/// Decimal numbers are read through their shortest round-trip text, so `0.3`
/// becomes 3/10 rather than the nearest binary fraction.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::InvalidSpec(format!("non-finite number {x}")));
    }
    parse_rational(&format!("{x}"))
}

pub fn is_probability(p: &BigRational) -> bool {
    !p.is_negative() && *p <= BigRational::one()
}

/// Serde adapter: probabilities as "p/q" strings or JSON numbers.
pub mod prob_serde {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Number(f64),
    }

    pub fn serialize<S: Serializer>(p: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&p.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let parsed = match Raw::deserialize(d)? {
            Raw::Text(t) => parse_rational(&t),
            Raw::Number(x) => rational_from_f64(x),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for vectors of probabilities.
pub mod prob_vec_serde {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "prob_serde")] BigRational);

    pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let w: Vec<Wrapped> = v.iter().cloned().map(Wrapped).collect();
        w.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<BigRational>, D::Error> {
        let w = Vec::<Wrapped>::deserialize(d)?;
        Ok(w.into_iter().map(|Wrapped(p)| p).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/10").unwrap(), ratio(3, 10));
        assert_eq!(parse_rational("0.3").unwrap(), ratio(3, 10));
        assert_eq!(parse_rational("1e-2").unwrap(), ratio(1, 100));
        assert_eq!(parse_rational("2").unwrap(), ratio(2, 1));
        assert_eq!(rational_from_f64(0.1).unwrap(), ratio(1, 10));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn exact_mode_rejects_floats() {
        assert!(<BigRational as Scalar>::from_float(0.5).is_err());
        assert_eq!(<f64 as Scalar>::from_float(0.5).unwrap(), 0.5);
    }
}
