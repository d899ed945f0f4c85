//! Per-project variables: LSM scores, outcomes, controls, and the assembled
//! record.

mod controls;
mod outcomes;
mod record;

use serde::{Deserialize, Serialize};

use crate::lexicon::CategoryProfile;

pub use controls::{compute_controls, ControlSet};
pub use outcomes::{collect_bug_issues, compute_outcomes, BugDetector, BugIssue, MonthsUsed, OutcomeSet, DEFAULT_BUG_KEYWORDS};
pub use record::{assemble_record, read_records, write_records, Flag, ProjectRecord, CSV_HEADER, OUTCOME_NAMES};

/// Added to the denominator so that two zero rates compare as identical.
pub const EPSILON: f64 = 0.0001;

pub const DEFAULT_MIN_CORPUS_WORDS: usize = 50;

/// Names of the 13 LSM columns: composite first, then the twelve categories.
pub const LSM_NAMES: [&str; 13] = [
    "lsm0", "lsm1", "lsm2", "lsm3", "lsm4", "lsm5", "lsm6", "lsm7", "lsm8", "lsm9", "lsm10", "lsm11", "lsm12",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("category values must be non-negative, got ({0}, {1})")]
    NegativeInput(f64, f64),
    #[error("project `{0}`: sponsorship is required in the project metadata")]
    MissingSponsorship(String),
}

/// Style matching on one category: `1 - |a - b| / (a + b + 0.0001)`.
pub fn lsm_category(a: f64, b: f64) -> Result<f64, MetricsError> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(MetricsError::NegativeInput(a, b));
    }
    Ok(1.0 - (a - b).abs() / (a + b + EPSILON))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsmVector {
    /// Index 0 is the composite, 1..=12 the categories in profile order.
    pub lsm: [f64; 13],
}

impl LsmVector {
    pub const EPSILON: f64 = EPSILON;

    /// Builds a vector from the twelve category values, filling the composite.
    pub fn from_categories(cats: [f64; 12]) -> Self {
        let mut lsm = [0.0; 13];
        lsm[1..].copy_from_slice(&cats);
        lsm[0] = cats.iter().sum::<f64>() / 12.0;
        LsmVector { lsm }
    }

    pub fn composite(&self) -> f64 {
        self.lsm[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("LSM undefined: elite side {elite_words} words, non-elite side {nonelite_words} words, minimum {min_words}")]
pub struct LsmUndefined {
    pub elite_words: usize,
    pub nonelite_words: usize,
    pub min_words: usize,
}

pub fn lsm_vector(
    elite: &CategoryProfile,
    nonelite: &CategoryProfile,
    min_words: usize,
) -> Result<LsmVector, LsmUndefined> {
    if elite.total_words < min_words.max(1) || nonelite.total_words < min_words.max(1) {
        return Err(LsmUndefined {
            elite_words: elite.total_words,
            nonelite_words: nonelite.total_words,
            min_words,
        });
    }
    let (a, b) = (elite.values(), nonelite.values());
    let mut cats = [0.0; 12];
    for i in 0..12 {
        // Negative profile values are clamped to zero.
        cats[i] = lsm_category(a[i].max(0.0), b[i].max(0.0)).unwrap_or(0.0);
    }
    Ok(LsmVector::from_categories(cats))
}
