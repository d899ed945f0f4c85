//! `lsm`: command-line driver for the analysis pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 partial result (some
//! project flagged, failed or excluded, or the model suite could not be
//! fitted), 4 fatal error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{ArgAction, Parser, Subcommand};
use lsm_core::config::{ConfigError, Resources};
use lsm_core::convo::{aggregate_corpora, build_threads, CorpusTriple};
use lsm_core::ingest::fetch::{FetchConfig, FetchError, Fetcher, DEFAULT_API_BASE};
use lsm_core::ingest::{read_event_stream, window_and_bucket, AliasMap, ErrorPolicy, EventFormat};
use lsm_core::lexicon::{score_corpus, SummaryScorer, SummaryTable};
use lsm_core::metrics::read_records;
use lsm_core::pipeline::{
    analyze_batch, load_metas, prepare_events, read_profiles, settle_batch, validate_sample, write_corpora,
    write_models, write_profiles, write_projects_csv, PipelineError, ProjectState, API_EXPORT,
};
use lsm_core::stats::describe_lsm;
use lsm_core::status::{compute_elite_intervals, EliteInterval, WriteActionSet};
use lsm_core::synth::{generate, write_to_disk, SynthError, SynthSpec};
use lsm_core::textprep::{prepare, AcronymDict, TokenStream};
use lsm_core::{CategoryDictionary, EliteIntervals, ProjectMeta, RawEvent, Roster, RunConfig};

#[derive(Parser)]
#[command(name = "lsm", version, about = "Language style matching between elite and non-elite developers")]
struct Cli {
    /// More log output; repeat for debug.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download a repository through the REST API into an export directory.
    Fetch {
        /// Repository as owner/name.
        #[arg(long)]
        repo: String,
        /// Name of the environment variable holding the token.
        #[arg(long, default_value = "GITHUB_TOKEN")]
        token_env: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = DEFAULT_API_BASE)]
        api_base: String,
        /// Skip the per-contributor account lookups.
        #[arg(long)]
        no_accounts: bool,
    },
    /// Normalize a project's event archive into one event per line, in time
    /// order, over the project's whole history.
    Ingest {
        #[arg(long)]
        project: PathBuf,
        /// Directory of `*.jsonl` archive files; an `api_export.json` inside
        /// it is read too.
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        alias_map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Abort on the first malformed record instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    /// Compute elite intervals from normalized events.
    Elites {
        #[arg(long)]
        events: PathBuf,
        /// TOML with an optional `write_actions = [...]` (top level or under
        /// `[thresholds]`).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild threads and write the four corpora.
    Conversations {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        intervals: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Restrict threads to this project's study window.
        #[arg(long)]
        project: Option<PathBuf>,
        /// Run config supplying bot patterns and the acronym table.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Clean and tokenize a text file, one message per line.
    Textprep {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        acronyms: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a token file against the category dictionary.
    Score {
        #[arg(long)]
        tokens: PathBuf,
        /// Bundled dictionary when omitted.
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long, conflicts_with = "summary")]
        summary_csv: Option<PathBuf>,
        #[arg(long, value_parser = ["approx"])]
        summary: Option<String>,
        /// Row of the summary CSV to use; the token file stem by default.
        #[arg(long)]
        corpus_id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-project records for every configured project.
    Metrics {
        #[arg(long)]
        config: PathBuf,
        /// `projects.csv` in the configured output directory by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the model suite on a records file.
    Regress {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Corpus profiles for the three-corpora comparison.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Describe the LSM distributions and compare the corpora.
    Describe {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus with planted effects.
    Synth {
        /// Spec TOML; missing keys take their defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        projects: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// The full pipeline.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a run config and the sampling criteria without analyzing.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Config(String),
    Fatal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Fatal(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Fatal(e.into())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => c.into(),
            other => Failure::Fatal(other.into()),
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Done {
    Complete,
    Partial,
}

type Outcome = Result<Done, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(Done::Complete) => ExitCode::SUCCESS,
        Ok(Done::Partial) => ExitCode::from(3),
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Fatal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(4)
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Fetch {
            repo,
            token_env,
            out,
            api_base,
            no_accounts,
        } => fetch(&repo, &token_env, &out, api_base, !no_accounts),
        Command::Ingest {
            project,
            archive,
            alias_map,
            out,
            strict,
        } => ingest(&project, &archive, alias_map.as_deref(), &out, strict),
        Command::Elites { events, config, out } => elites(&events, config.as_deref(), &out),
        Command::Conversations {
            events,
            intervals,
            out_dir,
            project,
            config,
        } => conversations(&events, &intervals, &out_dir, project.as_deref(), config.as_deref()),
        Command::Textprep { input, acronyms, out } => textprep(&input, acronyms.as_deref(), &out),
        Command::Score {
            tokens,
            dict,
            summary_csv,
            summary: _,
            corpus_id,
            out,
        } => score(&tokens, dict.as_deref(), summary_csv.as_deref(), corpus_id, &out),
        Command::Metrics { config, out } => metrics(&config, out),
        Command::Regress {
            records,
            config,
            out_dir,
            profiles,
        } => regress(&records, &config, &out_dir, profiles.as_deref()),
        Command::Describe { records, profiles, out } => describe(&records, profiles.as_deref(), &out),
        Command::Synth {
            spec,
            seed,
            projects,
            out,
        } => synth(spec.as_deref(), seed, projects, &out),
        Command::Run { config } => run(&config),
        Command::Validate { config } => validate(&config),
    }
}

/// Input files named on the command line must exist; a missing one is a
/// configuration error, reported before anything is written.
fn require(paths: &[&Path]) -> Result<(), Failure> {
    let missing: Vec<String> = paths
        .iter()
        .filter(|p| !p.exists())
        .map(|p| format!("`{}` does not exist", p.display()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Config(missing.join("; ")))
    }
}

fn write_out(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn read_normalized(path: &Path) -> anyhow::Result<Vec<RawEvent>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn fetch(repo: &str, token_env: &str, out: &Path, api_base: String, accounts: bool) -> Outcome {
    let token = std::env::var(token_env).unwrap_or_default();
    if token.is_empty() {
        log::warn!("{token_env} is not set; fetching unauthenticated");
    }
    let config = FetchConfig {
        api_base,
        fetch_accounts: accounts,
        ..FetchConfig::default()
    };
    match Fetcher::new(&token, out, config).run(repo) {
        Ok(summary) => {
            log::info!("{} requests, waited {:?}", summary.requests, summary.waited);
            for (endpoint, n) in &summary.records {
                println!("{endpoint}\t{n}");
            }
            Ok(Done::Complete)
        }
        Err(e @ (FetchError::Auth { .. } | FetchError::BadRemote(_))) => Err(Failure::Config(e.to_string())),
        Err(e) => Err(Failure::Fatal(e.into())),
    }
}

fn ingest(project: &Path, archive: &Path, alias_map: Option<&Path>, out: &Path, strict: bool) -> Outcome {
    require(&[project, archive])?;
    if let Some(a) = alias_map {
        require(&[a])?;
    }
    let meta = ProjectMeta::load(project).map_err(|e| Failure::Config(e.to_string()))?;
    let aliases = alias_map
        .map(AliasMap::load)
        .transpose()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let policy = if strict { ErrorPolicy::Abort } else { ErrorPolicy::SkipAndLog };
    let mut files: Vec<PathBuf> = fs::read_dir(archive)
        .with_context(|| format!("listing {}", archive.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut events = Vec::new();
    for f in &files {
        events.extend(read_event_stream(f, EventFormat::ArchiveJsonl, policy).map_err(anyhow::Error::from)?);
    }
    let api = archive.join(API_EXPORT);
    if api.is_file() {
        events.extend(read_event_stream(&api, EventFormat::ApiExportJson, policy).map_err(anyhow::Error::from)?);
    }
    // The full history is kept: elite status depends on write actions that
    // may predate the study window.
    let events = prepare_events(events, aliases.as_ref());
    let mut text = String::new();
    for e in &events {
        text.push_str(&e.to_json_line());
        text.push('\n');
    }
    write_out(out, text.as_bytes())?;
    log::info!("{}: {} events", meta.name, events.len());
    Ok(Done::Complete)
}

fn write_action_set(config: Option<&Path>) -> Result<WriteActionSet, Failure> {
    let Some(path) = config else {
        return Ok(WriteActionSet::default());
    };
    require(&[path])?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: toml::Table = toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let value = doc
        .get("write_actions")
        .or_else(|| doc.get("thresholds").and_then(|t| t.get("write_actions")));
    match value {
        None => Ok(WriteActionSet::default()),
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e| Failure::Config(format!("{}: write_actions: {e}", path.display()))),
    }
}

fn elites(events: &Path, config: Option<&Path>, out: &Path) -> Outcome {
    require(&[events])?;
    let set = write_action_set(config)?;
    let events = read_normalized(events)?;
    let intervals = compute_elite_intervals(&events, &set).map_err(anyhow::Error::from)?;
    let list = intervals.to_list();
    write_out(out, (serde_json::to_string_pretty(&list)? + "\n").as_bytes())?;
    log::info!("{} intervals", list.len());
    Ok(Done::Complete)
}

fn resources(config: Option<&Path>) -> Result<Resources, Failure> {
    match config {
        None => Ok(Resources::default()),
        Some(p) => {
            require(&[p])?;
            Ok(load_config(p)?.resources()?)
        }
    }
}

fn conversations(
    events: &Path,
    intervals: &Path,
    out_dir: &Path,
    project: Option<&Path>,
    config: Option<&Path>,
) -> Outcome {
    require(&[events, intervals])?;
    let res = resources(config)?;
    let meta = match project {
        None => None,
        Some(p) => {
            require(&[p])?;
            Some(ProjectMeta::load(p).map_err(|e| Failure::Config(e.to_string()))?)
        }
    };
    let mut events = read_normalized(events)?;
    if let Some(meta) = &meta {
        events = window_and_bucket(events, meta).events().cloned().collect();
    }
    let text = fs::read_to_string(intervals).with_context(|| format!("reading {}", intervals.display()))?;
    let list: Vec<EliteInterval> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", intervals.display()))?;
    let intervals = EliteIntervals::from_list(list);
    let roster = Roster::build(&events, None, &BTreeMap::new());
    let (threads, stats) = build_threads(&events, &roster, &res.bots);
    log::info!("{stats:?}");
    let corpora = aggregate_corpora(&threads, &intervals, &res.acronyms);
    write_corpora(out_dir, &corpora)?;
    for (name, lines) in CorpusTriple::FILE_NAMES.iter().zip(corpora.parts()) {
        println!("{name}\t{}", lines.len());
    }
    Ok(Done::Complete)
}

fn textprep(input: &Path, acronyms: Option<&Path>, out: &Path) -> Outcome {
    require(&[input])?;
    let dict = match acronyms {
        None => AcronymDict::seed(),
        Some(p) => {
            require(&[p])?;
            AcronymDict::load(p).map_err(|e| Failure::Config(e.to_string()))?
        }
    };
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let mut body = String::new();
    for line in text.lines() {
        let tokens = prepare(message_text(line), &dict);
        body.push_str(&serde_json::to_string(&tokens)?);
        body.push('\n');
    }
    write_out(out, body.as_bytes())?;
    Ok(Done::Complete)
}

/// Corpus files carry `<thread>\t<timestamp>\t` prefixes; plain text files
/// do not. Only the message text is tokenized.
fn message_text(line: &str) -> &str {
    if CorpusTriple::parse(line).is_empty() {
        line
    } else {
        line.splitn(3, '\t').nth(2).unwrap_or("")
    }
}

fn score(
    tokens: &Path,
    dict: Option<&Path>,
    summary_csv: Option<&Path>,
    corpus_id: Option<String>,
    out: &Path,
) -> Outcome {
    require(&[tokens])?;
    let dictionary = match dict {
        None => CategoryDictionary::bundled(),
        Some(p) => {
            require(&[p])?;
            CategoryDictionary::load(p).map_err(|e| Failure::Config(e.to_string()))?
        }
    };
    let scorer = match summary_csv {
        None => SummaryScorer::Approx,
        Some(p) => {
            require(&[p])?;
            SummaryScorer::Import(SummaryTable::load(p).map_err(|e| Failure::Config(e.to_string()))?)
        }
    };
    let text = fs::read_to_string(tokens).with_context(|| format!("reading {}", tokens.display()))?;
    let mut stream = TokenStream::default();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let part: TokenStream =
            serde_json::from_str(line).with_context(|| format!("{}:{}", tokens.display(), i + 1))?;
        stream.extend(part);
    }
    let id = corpus_id.unwrap_or_else(|| {
        tokens
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let profile = score_corpus(&stream, &dictionary, &scorer, &id).map_err(anyhow::Error::from)?;
    write_out(out, (serde_json::to_string_pretty(&profile)? + "\n").as_bytes())?;
    Ok(Done::Complete)
}

fn metrics(config: &Path, out: Option<PathBuf>) -> Outcome {
    require(&[config])?;
    let cfg = load_config(config)?;
    let res = cfg.resources()?;
    let batch = analyze_batch(&cfg, &res)?;
    let (records, profiles, statuses) = settle_batch(batch, None)?;
    let out = out.unwrap_or_else(|| cfg.out_dir().join("projects.csv"));
    write_projects_csv(&out, &records)?;
    write_profiles(&out.with_file_name("profiles.jsonl"), &profiles)?;
    let partial = statuses.iter().any(|s| s.state != ProjectState::Ok);
    for s in statuses.iter().filter(|s| s.state != ProjectState::Ok) {
        eprintln!("{}: {:?} {}", s.project, s.state, s.reasons.join("; "));
    }
    Ok(if partial { Done::Partial } else { Done::Complete })
}

fn load_records(path: &Path) -> anyhow::Result<Vec<lsm_core::ProjectRecord>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_records(file).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn load_corpus_profiles(path: Option<&Path>) -> Result<Vec<lsm_core::stats::CorpusProfiles>, Failure> {
    let Some(p) = path else { return Ok(Vec::new()) };
    require(&[p])?;
    Ok(read_profiles(p)?.iter().map(|p| p.corpus_profiles()).collect())
}

fn regress(records: &Path, config: &Path, out_dir: &Path, profiles: Option<&Path>) -> Outcome {
    require(&[records, config])?;
    let cfg = RunConfig::load(config)?;
    let profiles = load_corpus_profiles(profiles)?;
    let records = load_records(records)?;
    let ok = write_models(out_dir, &records, &profiles, cfg.thresholds.vif, cfg.svg)?;
    Ok(if ok { Done::Complete } else { Done::Partial })
}

fn describe(records: &Path, profiles: Option<&Path>, out: &Path) -> Outcome {
    require(&[records])?;
    let profiles = load_corpus_profiles(profiles)?;
    let records = load_records(records)?;
    let description = describe_lsm(&records, &profiles);
    write_out(out, (serde_json::to_string_pretty(&description)? + "\n").as_bytes())?;
    Ok(Done::Complete)
}

fn synth(spec: Option<&Path>, seed: Option<u64>, projects: Option<usize>, out: &Path) -> Outcome {
    let mut spec = match spec {
        None => SynthSpec::default(),
        Some(p) => {
            require(&[p])?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(n) = projects {
        spec.projects = n;
    }
    let corpus = generate(&spec).map_err(|e| match e {
        SynthError::Infeasible(_) => Failure::Config(e.to_string()),
        other => Failure::Fatal(other.into()),
    })?;
    write_to_disk(&corpus, out).map_err(anyhow::Error::from)?;
    println!("{} projects written to {}", corpus.projects.len(), out.display());
    Ok(Done::Complete)
}

fn run(config: &Path) -> Outcome {
    require(&[config])?;
    let cfg = RunConfig::load(config)?;
    let report = lsm_core::pipeline::run_pipeline(&cfg)?;
    for s in report.manifest.projects.iter().filter(|s| s.state != ProjectState::Ok) {
        eprintln!("{}: {:?} {}", s.project, s.state, s.reasons.join("; "));
    }
    println!(
        "{} projects, results in {}",
        report.manifest.projects.len(),
        report.out_dir.display()
    );
    Ok(if report.is_partial() { Done::Partial } else { Done::Complete })
}

fn validate(config: &Path) -> Outcome {
    require(&[config])?;
    let cfg = load_config(config)?;
    cfg.resources()?;
    let metas: Vec<ProjectMeta> = load_metas(&cfg)?.into_iter().map(|(_, m)| m).collect();
    let checks = validate_sample(&metas);
    println!("{}", serde_json::to_string_pretty(&checks)?);
    Ok(if checks.iter().all(|c| c.passes()) { Done::Complete } else { Done::Partial })
}
