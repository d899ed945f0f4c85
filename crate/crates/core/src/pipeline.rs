//! Per-project analysis, the full run, and its on-disk outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, Resources, RunConfig};
use crate::convo::{aggregate_corpora, build_threads, BuildStats, CorpusTriple};
use crate::ingest::{
    dedup_events, read_api_accounts, read_event_stream, resolve_identities, window_and_bucket, AliasMap, ErrorPolicy,
    EventFormat, IngestError, ProjectMeta, RawEvent, Roster,
};
use crate::lexicon::{score_corpus, CategoryProfile, LexiconError};
use crate::metrics::{
    assemble_record, collect_bug_issues, compute_controls, compute_outcomes, lsm_vector, write_records, ControlSet,
    LsmUndefined, LsmVector, MetricsError, OutcomeSet, ProjectRecord,
};
use crate::stats::{
    describe_lsm, model_suite, models_json, models_markdown, plot_files, quadratic_model, scatter_svg, CorpusProfiles,
    ModelsDocument, SuiteOptions,
};
use crate::status::{compute_elite_intervals, EliteIntervals, StatusError};
use crate::textprep::TokenStream;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Status(#[from] StatusError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Raw inputs of one project bundle.
#[derive(Debug, Clone)]
pub struct ProjectInput {
    pub meta: ProjectMeta,
    pub events: Vec<RawEvent>,
    pub accounts: BTreeMap<String, DateTime<Utc>>,
    pub aliases: Option<AliasMap>,
}

pub const ARCHIVE_DIR: &str = "archive";
pub const API_EXPORT: &str = "api_export.json";
pub const ALIASES: &str = "aliases.csv";

/// Reads a bundle: `meta.toml`, `archive/*.jsonl` (in name order), and the
/// optional `api_export.json` and `aliases.csv` beside it.
pub fn load_bundle(meta_path: &Path) -> Result<ProjectInput, PipelineError> {
    let meta = ProjectMeta::load(meta_path)?;
    let dir = meta_path.parent().unwrap_or(Path::new("."));
    let mut events = Vec::new();
    let archive = dir.join(ARCHIVE_DIR);
    if archive.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&archive)
            .map_err(io_err(&archive))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        for f in files {
            events.extend(read_event_stream(&f, EventFormat::ArchiveJsonl, ErrorPolicy::SkipAndLog)?);
        }
    }
    let api = dir.join(API_EXPORT);
    let mut accounts = BTreeMap::new();
    if api.is_file() {
        events.extend(read_event_stream(&api, EventFormat::ApiExportJson, ErrorPolicy::SkipAndLog)?);
        accounts = read_api_accounts(&api)?;
    }
    let alias_path = dir.join(ALIASES);
    let aliases = if alias_path.is_file() { Some(AliasMap::load(&alias_path)?) } else { None };
    Ok(ProjectInput {
        meta,
        events,
        accounts,
        aliases,
    })
}

/// Identity resolution, dedup, then a stable sort by time.
pub fn prepare_events(events: Vec<RawEvent>, aliases: Option<&AliasMap>) -> Vec<RawEvent> {
    let mut events = dedup_events(resolve_identities(events, aliases));
    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp));
    events
}

/// Category profiles of the four corpora plus the pooled cross corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectProfiles {
    pub project: String,
    pub cross_elite: Option<CategoryProfile>,
    pub cross_nonelite: Option<CategoryProfile>,
    pub cross: Option<CategoryProfile>,
    pub within_elite: Option<CategoryProfile>,
    pub within_nonelite: Option<CategoryProfile>,
}

impl ProjectProfiles {
    pub fn corpus_profiles(&self) -> CorpusProfiles {
        CorpusProfiles {
            project: self.project.clone(),
            cross: self.cross.as_ref().map(CategoryProfile::values),
            within_elite: self.within_elite.as_ref().map(CategoryProfile::values),
            within_nonelite: self.within_nonelite.as_ref().map(CategoryProfile::values),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectAnalysis {
    pub record: ProjectRecord,
    pub intervals: EliteIntervals,
    pub thread_stats: BuildStats,
    pub corpora: CorpusTriple,
    pub profiles: ProjectProfiles,
    pub lsm: Result<LsmVector, LsmUndefined>,
    pub outcomes: OutcomeSet,
    pub controls: ControlSet,
}

fn optional_profile(tokens: &TokenStream, res: &Resources, id: &str) -> Option<CategoryProfile> {
    if tokens.total_count == 0 {
        return None;
    }
    score_corpus(tokens, &res.dictionary, &res.scorer, id).ok()
}

/// Runs every per-project stage on one bundle.
pub fn analyze_project(input: &ProjectInput, res: &Resources) -> Result<ProjectAnalysis, PipelineError> {
    let name = input.meta.name.as_str();
    let events = prepare_events(input.events.clone(), input.aliases.as_ref());
    let intervals = compute_elite_intervals(&events, &res.write_actions)?;
    let buckets = window_and_bucket(events, &input.meta);
    let windowed: Vec<RawEvent> = buckets.events().cloned().collect();
    // Mentions resolve against the developers seen in the study window, which
    // is all a normalized event file carries.
    let roster = Roster::build(&windowed, input.aliases.as_ref(), &input.accounts);

    let (threads, thread_stats) = build_threads(&windowed, &roster, &res.bots);
    let corpora = aggregate_corpora(&threads, &intervals, &res.acronyms);
    let elite_tokens = CorpusTriple::tokens(&corpora.cross_elite);
    let nonelite_tokens = CorpusTriple::tokens(&corpora.cross_nonelite);
    let min = res.min_words.max(1);
    let (lsm, cross_elite, cross_nonelite) = if elite_tokens.total_count < min || nonelite_tokens.total_count < min {
        (
            Err(LsmUndefined {
                elite_words: elite_tokens.total_count,
                nonelite_words: nonelite_tokens.total_count,
                min_words: res.min_words,
            }),
            optional_profile(&elite_tokens, res, &format!("{name}/cross_elite")),
            optional_profile(&nonelite_tokens, res, &format!("{name}/cross_nonelite")),
        )
    } else {
        let e = score_corpus(&elite_tokens, &res.dictionary, &res.scorer, &format!("{name}/cross_elite"))?;
        let n = score_corpus(&nonelite_tokens, &res.dictionary, &res.scorer, &format!("{name}/cross_nonelite"))?;
        (lsm_vector(&e, &n, res.min_words), Some(e), Some(n))
    };
    let mut pooled = elite_tokens;
    pooled.extend(nonelite_tokens);
    let profiles = ProjectProfiles {
        project: name.to_string(),
        cross_elite,
        cross_nonelite,
        cross: optional_profile(&pooled, res, &format!("{name}/cross")),
        within_elite: optional_profile(&CorpusTriple::tokens(&corpora.within_elite), res, &format!("{name}/within_elite")),
        within_nonelite: optional_profile(
            &CorpusTriple::tokens(&corpora.within_nonelite),
            res,
            &format!("{name}/within_nonelite"),
        ),
    };

    let bugs = collect_bug_issues(buckets.events(), &res.bugs);
    let outcomes = compute_outcomes(&buckets, &bugs);
    let controls = compute_controls(&buckets, &intervals, &input.meta, &roster)?;
    let record = assemble_record(name, &outcomes, lsm.as_ref(), &controls);
    Ok(ProjectAnalysis {
        record,
        intervals,
        thread_stats,
        corpora,
        profiles,
        lsm,
        outcomes,
        controls,
    })
}

/// Analyzes bundles on a pool of `workers` threads. Results keep input order.
pub fn analyze_all(
    inputs: &[ProjectInput],
    res: &Resources,
    workers: usize,
) -> Vec<Result<ProjectAnalysis, PipelineError>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| inputs.par_iter().map(|i| analyze_project(i, res)).collect())
}

pub const MIN_PULL_REQUESTS: u64 = 100;
pub const MIN_CONTRIBUTORS: u64 = 50;
pub const MIN_HISTORY_MONTHS: u32 = 36;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub project: String,
    /// False when the meta carries no validation counts.
    pub checked: bool,
    pub uses_pull_requests: bool,
    pub has_elites: bool,
    pub history: bool,
    pub activity: bool,
    pub reasons: Vec<String>,
}

impl SampleCheck {
    pub fn passes(&self) -> bool {
        self.reasons.is_empty()
    }
}

/// Checks each project against the four sampling criteria. Projects without
/// validation counts pass unchecked.
pub fn validate_sample(metas: &[ProjectMeta]) -> Vec<SampleCheck> {
    metas
        .iter()
        .map(|m| {
            let Some(v) = &m.validation else {
                return SampleCheck {
                    project: m.name.clone(),
                    checked: false,
                    uses_pull_requests: true,
                    has_elites: true,
                    history: true,
                    activity: true,
                    reasons: vec![],
                };
            };
            let mut reasons = Vec::new();
            if !v.uses_pull_requests {
                reasons.push("no pull-request contribution model".to_string());
            }
            if !v.has_elites {
                reasons.push("no elite/non-elite distinction".to_string());
            }
            if v.history_months < MIN_HISTORY_MONTHS {
                reasons.push(format!("history < {MIN_HISTORY_MONTHS} months"));
            }
            if v.pull_requests < MIN_PULL_REQUESTS {
                reasons.push(format!("pull-requests < {MIN_PULL_REQUESTS}"));
            }
            if v.contributors < MIN_CONTRIBUTORS {
                reasons.push(format!("contributors < {MIN_CONTRIBUTORS}"));
            }
            SampleCheck {
                project: m.name.clone(),
                checked: true,
                uses_pull_requests: v.uses_pull_requests,
                has_elites: v.has_elites,
                history: v.history_months >= MIN_HISTORY_MONTHS,
                activity: v.pull_requests >= MIN_PULL_REQUESTS && v.contributors >= MIN_CONTRIBUTORS,
                reasons,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectState {
    Ok,
    Flagged,
    Failed,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectStatus {
    pub project: String,
    pub state: ProjectState,
    pub flags: Vec<String>,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub summary_mode: String,
    pub suite_ok: bool,
    pub projects: Vec<ProjectStatus>,
    /// Relative path to SHA-256, for every file written except the manifest.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub records: Vec<ProjectRecord>,
    pub manifest: Manifest,
}

impl RunReport {
    /// Some project was flagged, failed, or excluded, or the suite failed.
    pub fn is_partial(&self) -> bool {
        !self.manifest.suite_ok || self.manifest.projects.iter().any(|p| p.state != ProjectState::Ok)
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes `projects.csv`.
pub fn write_projects_csv(path: &Path, records: &[ProjectRecord]) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    write_records(&mut buf, records).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    write_file(path, &buf)
}

/// One JSON object per project.
pub fn write_profiles(path: &Path, profiles: &[ProjectProfiles]) -> Result<(), PipelineError> {
    let mut out = String::new();
    for p in profiles {
        out.push_str(&serde_json::to_string(p).expect("profiles serialize"));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn read_profiles(path: &Path) -> Result<Vec<ProjectProfiles>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                PipelineError::Ingest(IngestError::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
        })
        .collect()
}

pub fn write_corpora(dir: &Path, corpora: &CorpusTriple) -> Result<(), PipelineError> {
    for (name, lines) in CorpusTriple::FILE_NAMES.iter().zip(corpora.parts()) {
        write_file(&dir.join(name), CorpusTriple::render(lines).as_bytes())?;
    }
    Ok(())
}

/// Fits the model suite and the quadratic supplements, describes the LSM
/// distributions, and writes `models.json`, `models.md` and `plots/`.
/// Returns whether the suite could be fitted.
pub fn write_models(
    out_dir: &Path,
    records: &[ProjectRecord],
    profiles: &[CorpusProfiles],
    vif_threshold: f64,
    svg: bool,
) -> Result<bool, PipelineError> {
    let opts = SuiteOptions {
        vif_threshold,
        diagnostics: true,
    };
    let (suite, error) = match model_suite(records, &opts) {
        Ok(s) => (Some(s), None),
        Err(e) => {
            log::warn!("{e}");
            (None, Some(e))
        }
    };
    let quadratic = if suite.is_some() {
        (0..4).filter_map(|k| quadratic_model(records, k).ok()).collect()
    } else {
        Vec::new()
    };
    let doc = ModelsDocument {
        suite,
        error,
        quadratic,
        description: Some(describe_lsm(records, profiles)),
    };
    write_file(&out_dir.join("models.json"), models_json(&doc).as_bytes())?;
    write_file(&out_dir.join("models.md"), models_markdown(&doc).as_bytes())?;
    let plots = out_dir.join("plots");
    for (name, csv) in plot_files(&doc) {
        write_file(&plots.join(name), csv.as_bytes())?;
    }
    if svg {
        if let Some(suite) = &doc.suite {
            for m in &suite.models {
                let chart = scatter_svg(
                    &format!("{} residuals vs fitted", m.spec.id),
                    "fitted",
                    "residual",
                    &m.diagnostics.residual_vs_fitted,
                );
                write_file(&plots.join(format!("{}_resid_fitted.svg", m.spec.id)), chart.as_bytes())?;
            }
        }
    }
    Ok(doc.suite.is_some())
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<(), PipelineError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            if rel == "manifest.json" {
                continue;
            }
            let bytes = fs::read(&p).map_err(io_err(&p))?;
            out.insert(rel, hex::encode(Sha256::digest(&bytes)));
        }
    }
    Ok(())
}

/// Hashes every file under `out_dir` (except the manifest itself).
pub fn hash_outputs(out_dir: &Path) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut files = BTreeMap::new();
    collect_files(out_dir, out_dir, &mut files)?;
    Ok(files)
}

/// Project metas named by the config. A meta without a sponsorship value, an
/// unreadable meta, or a duplicated project name is a configuration error.
pub fn load_metas(cfg: &RunConfig) -> Result<Vec<(PathBuf, ProjectMeta)>, ConfigError> {
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for path in cfg.meta_paths() {
        match ProjectMeta::load(&path) {
            Ok(m) if m.sponsorship.is_none() => {
                problems.push(format!("{}: sponsorship is required", path.display()))
            }
            Ok(m) => out.push((path, m)),
            Err(e) => problems.push(e.to_string()),
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for (_, m) in &out {
        if !seen.insert(m.name.clone()) {
            problems.push(format!("duplicate project name `{}`", m.name));
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(ConfigError::Invalid(problems))
    }
}

/// Per-project results of a configured batch, before any output is written.
#[derive(Debug)]
pub struct Batch {
    /// Projects that failed the sampling criteria.
    pub excluded: Vec<ProjectStatus>,
    /// Analyses of the remaining projects, in configuration order.
    pub results: Vec<(String, Result<ProjectAnalysis, PipelineError>)>,
}

/// Loads the metas, applies the sampling criteria and analyzes the included
/// bundles on `cfg.workers` threads. Configuration problems are returned
/// before any project is touched.
pub fn analyze_batch(cfg: &RunConfig, res: &Resources) -> Result<Batch, PipelineError> {
    let metas = load_metas(cfg)?;
    let checks = validate_sample(&metas.iter().map(|(_, m)| m.clone()).collect::<Vec<_>>());
    let mut excluded = Vec::new();
    let mut included = Vec::new();
    for ((path, meta), check) in metas.into_iter().zip(checks) {
        if check.passes() {
            included.push((path, meta));
        } else {
            log::info!("{}: excluded ({})", meta.name, check.reasons.join("; "));
            excluded.push(ProjectStatus {
                project: meta.name,
                state: ProjectState::Excluded,
                flags: vec![],
                reasons: check.reasons,
            });
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .expect("thread pool");
    let results = pool.install(|| {
        included
            .par_iter()
            .map(|(path, meta)| {
                let r = load_bundle(path).and_then(|input| analyze_project(&input, res));
                (meta.name.clone(), r)
            })
            .collect()
    });
    Ok(Batch { excluded, results })
}

/// Records, profiles and statuses of a batch, sorted statuses included.
/// Failed projects become flagged placeholder rows. When `corpora_dir` is
/// given each project's corpora are written under it.
pub fn settle_batch(
    batch: Batch,
    corpora_dir: Option<&Path>,
) -> Result<(Vec<ProjectRecord>, Vec<ProjectProfiles>, Vec<ProjectStatus>), PipelineError> {
    let mut statuses = batch.excluded;
    let mut records = Vec::new();
    let mut profiles = Vec::new();
    for (name, result) in batch.results {
        match result {
            Ok(a) => {
                if let Some(dir) = corpora_dir {
                    write_corpora(&dir.join(&name), &a.corpora)?;
                }
                let flags: Vec<String> = a.record.flags.iter().map(|f| f.to_string()).collect();
                statuses.push(ProjectStatus {
                    project: name,
                    state: if flags.is_empty() { ProjectState::Ok } else { ProjectState::Flagged },
                    flags,
                    reasons: a.lsm.as_ref().err().map(|e| vec![e.to_string()]).unwrap_or_default(),
                });
                records.push(a.record);
                profiles.push(a.profiles);
            }
            Err(e) => {
                log::error!("{name}: {e}");
                statuses.push(ProjectStatus {
                    project: name.clone(),
                    state: ProjectState::Failed,
                    flags: vec!["failed".into()],
                    reasons: vec![e.to_string()],
                });
                records.push(ProjectRecord::failed(&name));
                profiles.push(ProjectProfiles {
                    project: name,
                    ..Default::default()
                });
            }
        }
    }
    statuses.sort_by(|a, b| a.project.cmp(&b.project));
    Ok((records, profiles, statuses))
}

/// The whole run. Configuration problems abort before anything is written;
/// a project that fails is recorded with the `failed` flag and the run goes
/// on.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let res = cfg.resources()?;
    let batch = analyze_batch(cfg, &res)?;
    let out_dir = cfg.out_dir();
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let (records, profiles, statuses) = settle_batch(batch, Some(&out_dir.join("corpora")))?;

    write_projects_csv(&out_dir.join("projects.csv"), &records)?;
    write_profiles(&out_dir.join("profiles.jsonl"), &profiles)?;
    let corpus_profiles: Vec<CorpusProfiles> = profiles.iter().map(ProjectProfiles::corpus_profiles).collect();
    let suite_ok = write_models(&out_dir, &records, &corpus_profiles, cfg.thresholds.vif, cfg.svg)?;

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        summary_mode: res.scorer.mode().to_string(),
        suite_ok,
        projects: statuses,
        files: hash_outputs(&out_dir)?,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_file(&out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(RunReport {
        out_dir,
        records,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ValidationCounts;

    fn meta(pr: u64, contrib: u64, months: u32) -> ProjectMeta {
        ProjectMeta {
            name: "p".into(),
            created_at: crate::timefmt::parse("2020-01-01T00:00:00Z").unwrap(),
            sponsorship: Some(false),
            main_language: "Rust".into(),
            domain: "tools".into(),
            validation: Some(ValidationCounts {
                pull_requests: pr,
                contributors: contrib,
                history_months: months,
                uses_pull_requests: true,
                has_elites: true,
            }),
        }
    }

    #[test]
    fn sample_criteria() {
        let c = validate_sample(&[meta(99, 60, 40), meta(150, 60, 35), meta(100, 50, 36), meta(10, 10, 10)]);
        assert_eq!(c[0].reasons, ["pull-requests < 100"]);
        assert_eq!(c[1].reasons, ["history < 36 months"]);
        assert!(c[2].passes());
        assert_eq!(c[3].reasons.len(), 3);
        let mut m = meta(200, 80, 48);
        m.validation.as_mut().unwrap().has_elites = false;
        assert!(!validate_sample(&[m])[0].passes());
    }
}
