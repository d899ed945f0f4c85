//! Cross-status language style matching for open-source repositories.
//!
//! The crate turns raw repository events into per-project records relating the
//! language style similarity of elite (write-privileged) and non-elite
//! developers to project outcomes, then fits an OLS model suite over those
//! records. Stages, in pipeline order:
//!
//! - [`ingest`]: event archives and API exports, dedup, identity resolution,
//!   36-month windowing, and the paginated API fetch client.
//! - [`status`]: rolling 90-day elite status.
//! - [`convo`]: thread reconstruction and cross-status message filtering.
//! - [`textprep`]: SE-aware cleaning and tokenization.
//! - [`lexicon`]: function-word dictionaries and category profiles.
//! - [`metrics`]: per-category LSM, outcomes, controls, and the project record.
//! - [`stats`]: OLS, VIF, diagnostics, the 20-model suite and descriptives.
//! - [`pipeline`] and [`synth`]: orchestration and planted-effect corpora.

pub mod config;
pub mod convo;
pub mod ingest;
pub mod lexicon;
pub mod metrics;
pub mod pipeline;
pub mod stats;
pub mod status;
pub mod synth;
pub mod textprep;
mod timefmt;

pub use config::RunConfig;
pub use convo::{ConversationThread, CorpusTriple, Message, Side};
pub use ingest::{DeveloperId, EventKind, ProjectMeta, RawEvent, Roster, TargetRef, ThreadKind};
pub use lexicon::{CategoryDictionary, CategoryProfile, SummaryScores};
pub use metrics::{ControlSet, LsmVector, OutcomeSet, ProjectRecord};
pub use stats::{DesignMatrix, DiagnosticsReport, FitResult};
pub use status::{EliteIntervals, Status};
