use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::DgpSpec;
use crate::scalar::{parse_rational, prob_serde, rational_from_f64};

/// Selection probability that is either constant or given per baseline
/// covariate level.
#[derive(Debug, Clone, PartialEq)]
pub enum PerStratum {
    Constant(BigRational),
    ByLevel(Vec<BigRational>),
}

impl PerStratum {
    pub fn at(&self, l0: usize) -> &BigRational {
        match self {
            PerStratum::Constant(p) => p,
            PerStratum::ByLevel(v) => &v[l0],
        }
    }

    fn values(&self) -> Vec<&BigRational> {
        match self {
            PerStratum::Constant(p) => vec![p],
            PerStratum::ByLevel(v) => v.iter().collect(),
        }
    }
}

impl Serialize for PerStratum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PerStratum::Constant(p) => s.serialize_str(&p.to_string()),
            PerStratum::ByLevel(v) => v.iter().map(|p| p.to_string()).collect::<Vec<_>>().serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for PerStratum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        fn one(v: &serde_json::Value) -> Result<BigRational> {
            match v {
                serde_json::Value::String(s) => parse_rational(s),
                serde_json::Value::Number(n) => rational_from_f64(n.as_f64().unwrap_or(f64::NAN)),
                other => Err(Error::InvalidSpec(format!("expected probability, found {other}"))),
            }
        }
        let v = serde_json::Value::deserialize(d)?;
        let parsed = match &v {
            serde_json::Value::Array(xs) => xs.iter().map(one).collect::<Result<Vec<_>>>().map(PerStratum::ByLevel),
            other => one(other).map(PerStratum::Constant),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Reference law from which matched control exposures are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchReference {
    /// Everyone at baseline with the case's L_0.
    M1,
    /// Event-free survivors at the end of follow-up with the case's L_0.
    M2,
    /// Subjects at risk at the case's last event-free time, same L_0.
    M3,
    /// Adherent subjects at risk at the case's last event-free time with the
    /// case's covariate history.
    M4,
    /// Survivors matched on part of L_0; control (A', L') drawn jointly.
    #[serde(rename = "M2*")]
    M2Star,
}

impl fmt::Display for MatchReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchReference::M2Star => f.write_str("M2*"),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SamplingScheme {
    CaseBase {
        #[serde(with = "prob_serde")]
        delta: BigRational,
    },
    Survivor {
        delta: PerStratum,
    },
    RiskSetItt {
        #[serde(with = "prob_serde")]
        delta: BigRational,
        /// Fixed number of controls per incident case instead of Bernoulli
        /// selection.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        controls_per_case: Option<u32>,
    },
    RiskSetPp {
        #[serde(with = "prob_serde")]
        delta: BigRational,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        controls_per_case: Option<u32>,
        /// Draw controls only from subjects still adherent.
        #[serde(default)]
        adherent_pool: bool,
    },
    Matched {
        reference: MatchReference,
        m: u32,
        /// Covariate coordinates matched exactly (partial matching only).
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        exact_coords: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeFamily {
    CaseBase,
    Survivor,
    RiskSetItt,
    RiskSetPp,
    Matched(MatchReference),
}

impl fmt::Display for SchemeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeFamily::Matched(r) => write!(f, "matched {r}"),
            SchemeFamily::CaseBase => f.write_str("case-base"),
            SchemeFamily::Survivor => f.write_str("survivor"),
            SchemeFamily::RiskSetItt => f.write_str("risk-set ITT"),
            SchemeFamily::RiskSetPp => f.write_str("risk-set per-protocol"),
        }
    }
}

fn in_unit_interval(p: &BigRational, what: &str) -> Result<()> {
    if *p <= BigRational::zero() || *p > BigRational::one() {
        return Err(Error::InvalidSpec(format!("{what} = {p} must lie in (0,1]")));
    }
    Ok(())
}

impl SamplingScheme {
    pub fn family(&self) -> SchemeFamily {
        match self {
            SamplingScheme::CaseBase { .. } => SchemeFamily::CaseBase,
            SamplingScheme::Survivor { .. } => SchemeFamily::Survivor,
            SamplingScheme::RiskSetItt { .. } => SchemeFamily::RiskSetItt,
            SamplingScheme::RiskSetPp { .. } => SchemeFamily::RiskSetPp,
            SamplingScheme::Matched { reference, .. } => SchemeFamily::Matched(*reference),
        }
    }

    pub fn is_matched(&self) -> bool {
        matches!(self, SamplingScheme::Matched { .. })
    }

    pub fn is_risk_set(&self) -> bool {
        matches!(self, SamplingScheme::RiskSetItt { .. } | SamplingScheme::RiskSetPp { .. })
    }

    /// Cases are adherent incident cases under per-protocol designs.
    pub fn per_protocol(&self) -> bool {
        matches!(
            self,
            SamplingScheme::RiskSetPp { .. } | SamplingScheme::Matched { reference: MatchReference::M4, .. }
        )
    }

    pub fn check(&self, spec: &DgpSpec) -> Result<()> {
        match self {
            SamplingScheme::CaseBase { delta } => in_unit_interval(delta, "delta"),
            SamplingScheme::Survivor { delta } => {
                if let PerStratum::ByLevel(v) = delta {
                    if v.len() != spec.covariate_levels {
                        return Err(Error::InvalidSpec(format!(
                            "survivor delta has {} entries for {} covariate levels",
                            v.len(),
                            spec.covariate_levels
                        )));
                    }
                }
                delta.values().into_iter().try_for_each(|p| in_unit_interval(p, "delta"))
            }
            SamplingScheme::RiskSetItt { delta, controls_per_case }
            | SamplingScheme::RiskSetPp { delta, controls_per_case, .. } => {
                if *controls_per_case == Some(0) {
                    return Err(Error::InvalidSpec("controls_per_case must be at least 1".into()));
                }
                in_unit_interval(delta, "delta")
            }
            SamplingScheme::Matched { reference, m, exact_coords } => {
                if *m == 0 {
                    return Err(Error::InvalidSpec("m must be at least 1".into()));
                }
                let n = spec.covariate_coords.len();
                match reference {
                    MatchReference::M2Star => {
                        if exact_coords.is_empty() || exact_coords.len() >= n {
                            return Err(Error::InvalidSpec(
                                "partial matching needs a proper, non-empty set of exact coordinates".into(),
                            ));
                        }
                        if exact_coords.iter().any(|&i| i >= n) {
                            return Err(Error::InvalidSpec("exact coordinate index out of range".into()));
                        }
                        Ok(())
                    }
                    _ if !exact_coords.is_empty() => {
                        Err(Error::InvalidSpec("exact_coords applies to partial matching only".into()))
                    }
                    _ => Ok(()),
                }
            }
        }
    }
}
