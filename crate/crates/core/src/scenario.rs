//! Scenario files: a process, an optional sampling scheme, the identities
//! to check and how to run them.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimate::{estimate_functional_with, EstimatorRow, PropensityModel};
use crate::identify::{verify_theorem, TheoremId, VerificationRecord};
use crate::model::DgpSpec;
use crate::sampling::{draw_study, SamplingScheme, Study};
use crate::scalar::NumericMode;
use num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RunMode {
    Exact,
    MonteCarlo { n_cohort: usize, reps: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub dgp: DgpSpec,
    /// Applied to every theorem when given; otherwise each theorem uses its
    /// default scheme.
    pub scheme: Option<SamplingScheme>,
    pub theorems: Vec<TheoremId>,
    pub run: RunMode,
    /// Time-varying propensity model used by `simulate`.
    pub propensity: PropensityModel,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    dgp: Value,
    #[serde(default)]
    scheme: Option<SamplingScheme>,
    #[serde(default)]
    theorems: Option<Vec<TheoremId>>,
    #[serde(default)]
    run: Option<RunMode>,
    #[serde(default)]
    propensity: PropensityModel,
}

/// Deserialize with the JSON path of the first error in the message.
pub fn from_json_with_path<T: serde::de::DeserializeOwned>(text: &str, prefix: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner.as_str()) {
            (true, p) => p.to_string(),
            (false, ".") => prefix.to_string(),
            (false, p) => format!("{prefix}.{p}"),
        };
        Error::Config { path, message: e.into_inner().to_string() }
    })
}

pub fn load_spec(path: &Path) -> Result<DgpSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec: DgpSpec = from_json_with_path(&text, "")?;
    Ok(spec)
}

impl Scenario {
    /// Parse a scenario; relative spec paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Scenario> {
        let raw: RawScenario = from_json_with_path(text, "")?;
        let dgp = match &raw.dgp {
            Value::String(p) => {
                let path: PathBuf = base.join(p);
                load_spec(&path).map_err(|e| match e {
                    Error::Io(io) => Error::Config { path: "dgp".into(), message: format!("{}: {io}", path.display()) },
                    other => other,
                })?
            }
            v => from_json_with_path(&v.to_string(), "dgp")?,
        };
        let scenario = Scenario {
            name: raw.name.unwrap_or_else(|| "scenario".into()),
            dgp,
            scheme: raw.scheme,
            theorems: raw.theorems.unwrap_or_else(|| TheoremId::ALL.to_vec()),
            run: raw.run.unwrap_or(RunMode::Exact),
            propensity: raw.propensity,
        };
        scenario.check()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Compatibility of theorems, schemes and process, before any work.
    pub fn check(&self) -> Result<()> {
        self.dgp.check()?;
        if self.theorems.is_empty() {
            return Err(Error::Config { path: "theorems".into(), message: "no theorems requested".into() });
        }
        for (i, id) in self.theorems.iter().enumerate() {
            let scheme = self.scheme_for(*id);
            let wrap = |e: Error| Error::Config { path: format!("theorems[{i}]"), message: e.to_string() };
            id.check_scheme(&scheme).map_err(wrap)?;
            scheme.check(&self.dgp).map_err(wrap)?;
        }
        if let RunMode::MonteCarlo { n_cohort, reps, .. } = self.run {
            if n_cohort == 0 || reps == 0 {
                return Err(Error::Config { path: "run".into(), message: "n_cohort and reps must be positive".into() });
            }
        }
        Ok(())
    }

    pub fn scheme_for(&self, id: TheoremId) -> SamplingScheme {
        self.scheme.clone().unwrap_or_else(|| id.default_scheme())
    }

    /// Exact checks of every requested theorem.
    pub fn verify(&self, mode: NumericMode) -> Result<Vec<VerificationRecord>> {
        self.theorems
            .iter()
            .map(|&id| {
                let scheme = self.scheme_for(id);
                match mode {
                    NumericMode::Exact => verify_theorem::<BigRational>(&self.dgp, &scheme, id),
                    NumericMode::Float => verify_theorem::<f64>(&self.dgp, &scheme, id),
                }
            })
            .collect()
    }

    /// Monte Carlo estimator runs. Rep r uses seed `seed + r`; rows come back
    /// in (rep, theorem) order whatever the thread count.
    pub fn simulate(&self, mode: NumericMode, seed_override: Option<u64>) -> Result<Vec<SimulationRow>> {
        let RunMode::MonteCarlo { n_cohort, reps, seed } = self.run else {
            return Err(Error::Config { path: "run".into(), message: "simulate needs a monte_carlo run".into() });
        };
        let seed = seed_override.unwrap_or(seed);
        let truths: Vec<f64> = self.verify(mode)?.iter().map(|r| r.rhs).collect();
        let mut schemes: Vec<SamplingScheme> = Vec::new();
        for &id in &self.theorems {
            let s = self.scheme_for(id);
            if !schemes.contains(&s) {
                schemes.push(s);
            }
        }
        let per_rep: Vec<Result<Vec<SimulationRow>>> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let rep_seed = seed.wrapping_add(rep);
                let studies: Vec<Study> =
                    schemes.iter().map(|s| draw_study(&self.dgp, s, n_cohort, rep_seed)).collect::<Result<_>>()?;
                Ok(self
                    .theorems
                    .iter()
                    .zip(&truths)
                    .map(|(&id, &truth)| {
                        let scheme = self.scheme_for(id);
                        let study = &studies[schemes.iter().position(|s| *s == scheme).expect("scheme drawn")];
                        let estimate = estimate_functional_with(study, id, &self.propensity).map(|e| e.value).unwrap_or(f64::NAN);
                        SimulationRow {
                            rep: rep as usize,
                            row: EstimatorRow {
                                theorem: id,
                                estimate,
                                truth,
                                n: n_cohort,
                                seed: rep_seed,
                                abs_error: (estimate - truth).abs(),
                            },
                        }
                    })
                    .collect())
            })
            .collect();
        let mut rows = Vec::new();
        for r in per_rep {
            rows.extend(r?);
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub rep: usize,
    #[serde(flatten)]
    pub row: EstimatorRow,
}

/// CSV with columns rep, theorem, estimate, truth, n, seed, abs_error.
pub fn write_simulation_csv<W: std::io::Write>(rows: &[SimulationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rep", "theorem", "estimate", "truth", "n", "seed", "abs_error"])?;
    for r in rows {
        w.write_record([
            r.rep.to_string(),
            r.row.theorem.to_string(),
            r.row.estimate.to_string(),
            r.row.truth.to_string(),
            r.row.n.to_string(),
            r.row.seed.to_string(),
            r.row.abs_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
