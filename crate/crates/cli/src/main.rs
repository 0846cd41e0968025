use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccid_core::counterexample::run_counterexample;
use ccid_core::identify::VerificationRecord;
use ccid_core::model::{check_homogeneity, validate_spec, HomogeneityCondition, DEFAULT_HOMOGENEITY_TOL};
use ccid_core::scenario::{load_spec, write_simulation_csv, Scenario};
use ccid_core::{Error, NumericMode};
use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ccid", version, about = "Check causal identification results for case-control designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Exact rational arithmetic (the default for table kernels).
    #[arg(long, conflicts_with = "float")]
    exact: bool,
    /// Double-precision arithmetic.
    #[arg(long)]
    float: bool,
    /// Directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Exact checks of the identities requested by a scenario.
    Verify {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo estimator runs; writes simulate.csv.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Reproduce the survivor-sampling non-identifiability example.
    Counterexample {
        #[command(flatten)]
        common: Common,
    },
    /// Diagnostics for a process specification.
    Validate {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// Failure classes mapped to exit codes 1 (check failed) and 2 (usage).
enum Failure {
    Check,
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn mode(common: &Common, exact_capable: bool) -> Result<NumericMode, Failure> {
    if common.exact && !exact_capable {
        return Err(Failure::Usage("--exact needs table kernels with rational entries".into()));
    }
    Ok(if common.float || !exact_capable { NumericMode::Float } else { NumericMode::Exact })
}

fn write_out(common: &Common, name: &str, contents: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn flag(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "NO"
    }
}

#[derive(Serialize)]
struct VerifyRow {
    theorem: String,
    #[serde(flatten)]
    record: Option<VerificationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn verify(path: &Path, common: &Common) -> Result<(), Failure> {
    let scenario = Scenario::load(path)?;
    let mode = mode(common, scenario.dgp.is_exact())?;
    let mut rows = Vec::new();
    for &id in &scenario.theorems {
        let single = Scenario { theorems: vec![id], ..scenario.clone() };
        let row = match single.verify(mode) {
            Ok(mut r) => VerifyRow { theorem: id.to_string(), record: r.pop(), error: None },
            Err(e) => VerifyRow { theorem: id.to_string(), record: None, error: Some(e.to_string()) },
        };
        rows.push(row);
    }
    let report = to_json(&rows);
    write_out(common, "verify.json", report.as_bytes())?;
    if common.json {
        print!("{report}");
    } else {
        println!("scenario {} ({:?})", scenario.name, mode);
        println!(
            "{:<5} {:>22} {:>22} {:>10}  {:<5} {:<5} {:<5} {:<5}  equal",
            "id", "lhs", "rhs", "max|diff|", "pos", "exch", "sel", "hom"
        );
        for row in &rows {
            match (&row.record, &row.error) {
                (Some(r), _) => {
                    let a = &r.assumptions;
                    let shown = |exact: &Option<String>, v: f64| exact.clone().unwrap_or_else(|| format!("{v:.12}"));
                    println!(
                        "{:<5} {:>22} {:>22} {:>10.3e}  {:<5} {:<5} {:<5} {:<5}  {}",
                        row.theorem,
                        shown(&r.lhs_exact, r.lhs),
                        shown(&r.rhs_exact, r.rhs),
                        r.abs_diff,
                        flag(a.positivity_ok),
                        flag(a.exchangeability_by_construction),
                        flag(a.selection.holds),
                        a.homogeneity.as_ref().map_or("-", |h| flag(h.holds)),
                        r.equal
                    );
                }
                (None, Some(e)) => println!("{:<5} error: {e}", row.theorem),
                (None, None) => unreachable!(),
            }
        }
    }
    if rows.iter().all(|r| r.record.as_ref().is_some_and(|r| r.equal)) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn simulate(path: &Path, common: &Common, seed: Option<u64>, threads: Option<usize>) -> Result<(), Failure> {
    let scenario = Scenario::load(path)?;
    let mode = mode(common, scenario.dgp.is_exact())?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let rows = scenario.simulate(mode, seed)?;
    let mut csv = Vec::new();
    write_simulation_csv(&rows, &mut csv)?;
    write_out(common, "simulate.csv", &csv)?;
    if common.json {
        print!("{}", to_json(&rows));
    } else if common.out.is_none() {
        print!("{}", String::from_utf8(csv).expect("csv is utf-8"));
    } else {
        println!("{:<5} {:>8} {:>12} {:>12} {:>12}", "id", "reps", "truth", "mean est", "median |err|");
        for &id in &scenario.theorems {
            let mine: Vec<_> = rows.iter().filter(|r| r.row.theorem == id).collect();
            let mut errs: Vec<f64> = mine.iter().map(|r| r.row.abs_error).collect();
            errs.sort_by(f64::total_cmp);
            let mean = mine.iter().map(|r| r.row.estimate).sum::<f64>() / mine.len() as f64;
            println!(
                "{:<5} {:>8} {:>12.6} {:>12.6} {:>12.6}",
                id.to_string(),
                mine.len(),
                mine[0].row.truth,
                mean,
                errs[errs.len() / 2]
            );
        }
    }
    if rows.iter().all(|r| r.row.estimate.is_finite()) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn counterexample(common: &Common) -> Result<(), Failure> {
    let report = run_counterexample();
    let json = to_json(&report);
    write_out(common, "counterexample.json", json.as_bytes())?;
    if common.json {
        print!("{json}");
    } else {
        println!("{:<28} {:>22} {:>22}", "", "distribution 1", "distribution 2");
        let line = |name: &str, a: &ccid_core::counterexample::Fraction, b: &ccid_core::counterexample::Fraction| {
            println!("{name:<28} {:>22} {:>22}", a.to_string(), b.to_string());
            println!("{:<28} {:>22.6} {:>22.6}", "", a.value, b.value);
        };
        line("alpha", &report.alpha[0], &report.alpha[1]);
        line("delta", &report.delta[0], &report.delta[1]);
        line("case share", &report.case_share[0], &report.case_share[1]);
        line("marginal causal odds ratio", &report.or1, &report.or2);
        for l in 0..2 {
            line(&format!("odds ratio given L0={l}"), &report.conditional_or[0][l], &report.conditional_or[1][l]);
        }
        println!("available laws equal: {}", report.available_laws_equal);
        println!("marginal odds ratios distinct: {}", report.distinct);
        let ids: Vec<String> = report.identified_conditional_or.iter().map(|f| f.to_string()).collect();
        println!("odds ratio per L0 from the available law: {}", ids.join(", "));
    }
    if report.available_laws_equal && report.distinct {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

#[derive(Serialize)]
struct ValidateReport {
    validation: ccid_core::model::ValidationReport,
    homogeneity: Vec<ccid_core::model::HomogeneityReport>,
}

fn validate(path: &Path, common: &Common) -> Result<(), Failure> {
    let spec = load_spec(path)?;
    let mode = mode(common, spec.is_exact())?;
    let validation = validate_spec(&spec);
    let mut homogeneity = Vec::new();
    for cond in HomogeneityCondition::ALL {
        let r = match mode {
            NumericMode::Exact => check_homogeneity::<BigRational>(&spec, cond, DEFAULT_HOMOGENEITY_TOL),
            NumericMode::Float => check_homogeneity::<f64>(&spec, cond, DEFAULT_HOMOGENEITY_TOL),
        };
        match r {
            Ok(r) => homogeneity.push(r),
            Err(e) => eprintln!("{cond}: {e}"),
        }
    }
    let ok = validation.ok();
    let report = ValidateReport { validation, homogeneity };
    let json = to_json(&report);
    write_out(common, "validate.json", json.as_bytes())?;
    if common.json {
        print!("{json}");
    } else {
        let v = &report.validation;
        println!("positivity: {}", flag(v.positivity_ok));
        for s in &v.positivity_violations {
            println!("  {s}");
        }
        for s in v.range_violations.iter().chain(&v.kernel_errors) {
            println!("  {s}");
        }
        println!("exchangeability by construction: {}", flag(v.exchangeability_by_construction));
        println!("exact arithmetic available: {}", flag(v.exact_capable));
        for h in &report.homogeneity {
            println!("{}: {} (max deviation {:.3e})", h.condition, if h.holds { "holds" } else { "fails" }, h.max_deviation);
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify { scenario, common } => verify(scenario, common),
        Command::Simulate { scenario, common, seed, threads } => simulate(scenario, common, *seed, *threads),
        Command::Counterexample { common } => counterexample(common),
        Command::Validate { spec, common } => validate(spec, common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
