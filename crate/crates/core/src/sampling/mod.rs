//! Control-selection mechanisms: exact augmentation of a cohort law with
//! selection indicators, exact laws of matched sets, and seeded draws.

mod augment;
mod draw;
mod export;
mod matched;
mod scheme;

pub use augment::{
    augment_selection, is_case, selection_probabilities, AvailableData, AvailableLaw, AvailableRecord,
};
pub use draw::{
    draw_study, simulate_cohort, simulate_subject, subject_rng, CaseControlDataset, MatchedSet, MatchedStudy, ReferencePool, Study,
    SubjectRecord,
};
pub use export::{export_study, write_dataset_csv, write_matched_csv, Manifest};
pub use matched::{matched_distribution, unit, MatchStratum, MatchedLaw, MatchedRecord, MatchedUnit};
pub use scheme::{MatchReference, PerStratum, SamplingScheme, SchemeFamily};

