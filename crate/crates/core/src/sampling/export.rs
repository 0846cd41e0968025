//! CSV export of drawn studies with a JSON manifest.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::sampling::draw::{CaseControlDataset, MatchedStudy, Study};
use crate::sampling::scheme::SamplingScheme;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub scheme: SamplingScheme,
    pub n_cohort: usize,
    pub spec_hash: String,
    pub rows: usize,
    pub dropped_cases: usize,
}

/// Long format: one row per observed person-period. Baseline schemes carry
/// their single selection count on the k = 0 row.
pub fn write_dataset_csv<W: Write>(data: &CaseControlDataset, out: W) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "k", "l_k", "a_k", "y_next", "s_k", "case", "adherent"])?;
    let risk_set = data.scheme.is_risk_set();
    let mut rows = 0;
    for s in &data.subjects {
        let t = &s.traj;
        for k in 0..t.periods_observed() {
            let sk = if risk_set || k == 0 { s.selections.get(k).copied().unwrap_or(0) } else { 0 };
            w.write_record([
                s.id.to_string(),
                k.to_string(),
                t.l[k].to_string(),
                t.a[k].to_string(),
                u8::from(t.y(k + 1)).to_string(),
                sk.to_string(),
                u8::from(s.case).to_string(),
                u8::from(s.adherent).to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

/// One row per set member: the case has role 0, controls 1..=m.
pub fn write_matched_csv<W: Write>(study: &MatchedStudy, out: W) -> Result<usize> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["set_id", "role", "subject_id", "stratum", "l0", "exposure"])?;
    let mut rows = 0;
    for set in &study.sets {
        let stratum = set.record.stratum.to_string();
        let members = std::iter::once((set.case_id, set.record.case))
            .chain(set.control_ids.iter().copied().zip(set.record.controls.iter().copied()));
        for (role, (id, u)) in members.enumerate() {
            w.write_record([
                set.set_id.to_string(),
                role.to_string(),
                id.to_string(),
                stratum.clone(),
                u.l0.to_string(),
                u.a.to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

/// Write `<stem>.csv` and `<stem>.manifest.json` into `dir`.
pub fn export_study(study: &Study, dir: &Path, stem: &str) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    let (rows, seed, n_cohort, spec_hash) = match study {
        Study::CaseControl(d) => (write_dataset_csv(d, file)?, d.seed, d.n_cohort, d.spec_hash.clone()),
        Study::Matched(m) => (write_matched_csv(m, file)?, m.seed, m.n_cohort, m.spec_hash.clone()),
    };
    let manifest = Manifest {
        seed,
        scheme: study.scheme().clone(),
        n_cohort,
        spec_hash,
        rows,
        dropped_cases: study.dropped_cases(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join(format!("{stem}.manifest.json")), json + "\n")?;
    Ok(manifest)
}
