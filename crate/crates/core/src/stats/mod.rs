//! Regression models, diagnostics and descriptive statistics over project
//! records.

mod describe;
mod design;
mod diagnostics;
mod linalg;
mod ols;
mod report;
mod suite;

use thiserror::Error;

pub use describe::{
    describe_lsm, kruskal_wallis, quantile, summarize, CorpusComparison, CorpusProfiles, Histogram, Kde, KruskalWallis,
    LsmDescription, VariableSummary, CORPUS_LABELS, KDE_POINTS,
};
pub use design::{
    binary_encode, build_design, dummy_encode, dummy_encode_with_reference, DesignInfo, DesignMatrix, DummyColumns,
    CONTROL_NAMES, INTERCEPT,
};
pub use diagnostics::{
    diagnostics, vif, vif_screen, BreuschPagan, DiagnosticsReport, VifEntry, VifScreen, DEFAULT_VIF_THRESHOLD,
};
pub use linalg::{Dependent, Qr, RANK_TOL};
pub use ols::{nested_f_test, ols_fit, FitResult, NestedTest};
pub use report::{models_json, models_markdown, plot_files, scatter_svg, suite_failure_markdown, ModelsDocument};
pub use suite::{
    model_specs, model_suite, outcome_sample, quadratic_fit, quadratic_model, Block, ModelEntry, ModelSpec,
    ModelSuite, OutcomeSample, QuadraticResult, SuiteError, SuiteOptions, OUTCOME_IDS, SQUARED_COLUMN,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("{n} rows cannot support {p} coefficients")]
    TooFewRows { n: usize, p: usize },
    #[error("column `{column}` is linearly dependent on {depends_on:?}")]
    RankDeficient { column: String, depends_on: Vec<String> },
    #[error("{0}")]
    Shape(String),
}
