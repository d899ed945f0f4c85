//! Synthetic project bundles with planted effects.
//!
//! Each project gets developers (a share of them elite through periodic write
//! actions), conversation threads whose elite and non-elite messages draw
//! function words at different per-project rates, and commit and bug
//! schedules driven by a planted model of the realized composite LSM.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::ingest::{archive_record, MonthlyBuckets, ProjectMeta, RawEvent, WINDOW_MONTHS};
use crate::lexicon::{category_percentages, is_tone_word, approx_summary, CategoryDictionary, CategoryProfile, TONE_NEGATIVE, TONE_POSITIVE};
use crate::metrics::lsm_vector;
use crate::pipeline::{ProjectInput, API_EXPORT, ARCHIVE_DIR};
use crate::textprep::{tokenize, AcronymDict, TokenStream};
use crate::timefmt;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How the noise scale of an outcome is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Sd(f64),
    /// Chosen so that a two-sided 5% test of a coefficient of size `beta` on
    /// lsm0 (or on its centered square) has the given power, using the
    /// realized spread of lsm0 across the generated projects.
    Power { power: f64, beta: f64, squared: bool },
}

/// `y = intercept + beta * lsm0 + beta_sq * (lsm0 - center)^2 + noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedModel {
    pub intercept: f64,
    pub beta: f64,
    #[serde(default)]
    pub beta_sq: f64,
    #[serde(default)]
    pub center: f64,
    pub noise: Noise,
}

impl PlantedModel {
    pub fn constant(intercept: f64, sd: f64) -> Self {
        PlantedModel {
            intercept,
            beta: 0.0,
            beta_sq: 0.0,
            center: 0.0,
            noise: Noise::Sd(sd),
        }
    }

    fn mean(&self, x: f64) -> f64 {
        self.intercept + self.beta * x + self.beta_sq * (x - self.center).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub projects: usize,
    /// Inclusive range of developers per project.
    pub developers: [usize; 2],
    /// Expected share of elite developers, in (0, 1).
    pub elite_fraction: f64,
    pub threads: [usize; 2],
    /// Replies per cross-status thread.
    pub replies: [usize; 2],
    pub words_per_message: [usize; 2],
    /// Share of threads whose participants all have one status.
    pub within_fraction: f64,
    /// Chance of an extra same-status reply, which the filter removes.
    pub same_status_rate: f64,
    /// Chance that a message carries code, links or other artifacts.
    pub artifact_rate: f64,
    /// Word percentages of the eight function-word categories, then positive
    /// and negative tone words.
    pub base_profile: [f64; 10],
    /// Range of the per-project divergence between the two sides' rates.
    pub style_gap: [f64; 2],
    pub write_interval_days: i64,
    pub min_corpus_words: usize,
    pub start: String,
    pub new_c: PlantedModel,
    pub bct: PlantedModel,
    pub new_b: PlantedModel,
    pub bfr: PlantedModel,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 1,
            projects: 200,
            developers: [20, 40],
            elite_fraction: 0.2,
            threads: [10, 14],
            replies: [2, 4],
            words_per_message: [20, 35],
            within_fraction: 0.1,
            same_status_rate: 0.1,
            artifact_rate: 0.3,
            base_profile: [9.0, 5.0, 7.0, 13.0, 8.0, 5.0, 6.0, 1.5, 1.0, 0.5],
            style_gap: [0.1, 1.0],
            write_interval_days: 75,
            min_corpus_words: crate::metrics::DEFAULT_MIN_CORPUS_WORDS,
            start: "2016-01-01T00:00:00Z".into(),
            new_c: PlantedModel {
                intercept: 2.0,
                beta: 4.0,
                beta_sq: 0.0,
                center: 0.0,
                noise: Noise::Power {
                    power: 0.95,
                    beta: 4.0,
                    squared: false,
                },
            },
            bct: PlantedModel::constant(10.0, 2.0),
            new_b: PlantedModel::constant(1.0, 0.2),
            bfr: PlantedModel::constant(0.7, 0.1),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Infeasible(m));
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return bad(format!("elite fraction {} must lie strictly between 0 and 1", self.elite_fraction));
        }
        if self.projects == 0 {
            return bad("no projects requested".into());
        }
        for (name, r) in [
            ("developers", self.developers),
            ("threads", self.threads),
            ("replies", self.replies),
            ("words_per_message", self.words_per_message),
        ] {
            if r[0] > r[1] {
                return bad(format!("{name} range {r:?} is empty"));
            }
        }
        if self.developers[0] < 4 {
            return bad("need at least 4 developers per project".into());
        }
        if self.replies[0] == 0 {
            return bad("cross-status threads need at least one reply".into());
        }
        if let Some(p) = self.base_profile.iter().find(|p| !(**p >= 0.0)) {
            return bad(format!("negative target percentage {p}"));
        }
        if self.base_profile.iter().sum::<f64>() >= 90.0 {
            return bad("target percentages leave no room for other words".into());
        }
        if !(self.style_gap[0] >= 0.0 && self.style_gap[0] <= self.style_gap[1]) {
            return bad(format!("style gap range {:?} is invalid", self.style_gap));
        }
        for (name, r) in [
            ("within_fraction", self.within_fraction),
            ("same_status_rate", self.same_status_rate),
            ("artifact_rate", self.artifact_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} {r} is not a probability"));
            }
        }
        if self.write_interval_days < 1 || self.write_interval_days > 80 {
            return bad("write interval must be 1..=80 days to keep elites continuously elite".into());
        }
        timefmt::parse(&self.start).map_err(|e| SynthError::Infeasible(format!("start: {e}")))?;
        Ok(())
    }

    pub fn models(&self) -> [&PlantedModel; 4] {
        [&self.new_c, &self.bct, &self.new_b, &self.bfr]
    }
}

/// Vocabulary used for generation.
struct Vocab {
    /// Per class: 8 categories, positive tone, negative tone.
    classes: Vec<Vec<String>>,
    filler: Vec<String>,
}

const FILLER: &[&str] = &[
    "parser", "module", "function", "update", "build", "release", "server", "client", "request", "value", "output",
    "input", "memory", "thread", "branch", "version", "feature", "layout", "cache", "query", "schema", "token",
    "buffer", "index", "handler", "router", "widget", "plugin", "script", "kernel", "driver", "socket", "packet",
    "stream", "vector", "matrix", "array", "string", "number", "format", "logger", "compiler", "runtime", "change",
    "patch", "review", "merge", "commit", "issue", "test", "check", "case", "path", "file", "line", "field", "type",
    "method", "class", "object", "option", "flag", "setting", "default", "error", "warning", "message", "result",
    "return", "call", "loop", "order", "list", "map", "key", "name", "label", "title", "window", "screen", "button",
    "color", "style", "page", "site", "user", "account", "session", "login", "password", "service", "container",
    "image", "network", "timeout", "retry", "limit", "size", "length", "width", "height", "storage", "disk",
    "database", "table", "column", "row", "record", "entry", "node", "tree", "graph", "edge", "cluster", "job",
    "task", "queue", "worker", "event", "signal", "state", "mode", "level", "step", "stage", "phase", "target",
    "source", "binary", "package", "library", "framework", "engine", "model", "view", "controller", "template",
    "render", "parse", "compile", "deploy", "install", "upgrade", "migrate", "refactor", "rename", "remove", "add",
    "move", "copy", "split", "join", "sort", "filter", "reduce", "fetch", "send", "receive", "load", "save", "open",
    "close", "start", "stop", "reset", "clear", "run", "exit", "print", "write", "read", "lock", "unlock",
];

impl Vocab {
    fn new(dict: &CategoryDictionary, acronyms: &AcronymDict) -> Self {
        let clean = |w: &str| tokenize(w).tokens == [w.to_string()] && acronyms.get(w).is_none();
        let mut classes: Vec<Vec<String>> = (0..8)
            .map(|c| {
                let mut ws: Vec<String> = dict
                    .literals(c)
                    .filter(|w| clean(w) && (0..8).filter(|k| dict.matches(*k, w)).count() == 1 && !is_tone_word(w))
                    .map(str::to_string)
                    .collect();
                ws.sort();
                ws.dedup();
                ws
            })
            .collect();
        for tone in [TONE_POSITIVE, TONE_NEGATIVE] {
            classes.push(
                tone.iter()
                    .filter(|w| clean(w) && !dict.is_function_word(w))
                    .map(|w| w.to_string())
                    .collect(),
            );
        }
        let filler = FILLER
            .iter()
            .filter(|w| clean(w) && !dict.is_function_word(w) && !is_tone_word(w))
            .map(|w| w.to_string())
            .collect();
        Vocab { classes, filler }
    }
}

/// Per-side word-class probabilities.
type Rates = [f64; 10];

fn side_rates(base: &[f64; 10], gap: f64, rng: &mut ChaCha8Rng) -> Rates {
    let mut r = [0.0; 10];
    for (i, b) in base.iter().enumerate() {
        let z: f64 = StandardNormal.sample(rng);
        r[i] = b / 100.0 * (gap * z).exp();
    }
    let total: f64 = r.iter().sum();
    if total > 0.9 {
        r.iter_mut().for_each(|v| *v *= 0.9 / total);
    }
    r
}

fn draw_words(rates: &Rates, vocab: &Vocab, n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    (0..n)
        .map(|_| {
            let mut u: f64 = rng.random();
            for (c, p) in rates.iter().enumerate() {
                if u < *p && !vocab.classes[c].is_empty() {
                    return vocab.classes[c].choose(rng).unwrap().clone();
                }
                u -= p;
            }
            vocab.filler.choose(rng).unwrap().clone()
        })
        .collect()
}

fn artifact(rng: &mut ChaCha8Rng, n: u64) -> String {
    match rng.random_range(0..8) {
        0 => format!("```\nfn check_{n}() -> bool {{ true }}\n```"),
        1 => format!("`parse_{n}(input)`"),
        2 => format!("https://ci.example.org/builds/{n}/log"),
        3 => format!("src/parser/mod_{n}.rs"),
        4 => format!("dev{n}@example.org"),
        5 => format!("{:x}", 0x1a2b3c4d5u64 + n),
        6 => format!("    at org.example.Parser.parse(Parser.java:{})", n % 500 + 1),
        _ => "> quoted text from an earlier reply".to_string(),
    }
}

/// Renders words as sentences, sprinkling artifacts and an optional mention.
fn render_body(words: &[String], mention: Option<&str>, artifact_rate: f64, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    if let Some(m) = mention {
        out.push('@');
        out.push_str(m);
        out.push(' ');
    }
    let mut start = true;
    for (i, w) in words.iter().enumerate() {
        if start {
            let mut cs = w.chars();
            if let Some(f) = cs.next() {
                out.extend(f.to_uppercase());
                out.push_str(cs.as_str());
            }
            start = false;
        } else {
            out.push_str(w);
        }
        let end = i + 1 == words.len() || rng.random_bool(0.12);
        if end {
            out.push('.');
            start = true;
            if rng.random_bool(artifact_rate / 2.0) {
                let n = rng.random_range(1..100_000);
                let a = artifact(rng, n);
                let sep = if a.contains('\n') || a.starts_with(' ') || a.starts_with('>') { "\n" } else { " " };
                out.push_str(sep);
                out.push_str(&a);
                out.push_str(sep);
                continue;
            }
        } else if rng.random_bool(0.05) {
            out.push(',');
        }
        out.push(' ');
    }
    out.trim_end().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectTruth {
    pub project: String,
    /// Realized composite LSM of the admitted cross-status text; `None` when a
    /// side falls below the minimum corpus size.
    pub lsm0: Option<f64>,
    pub style_gap: f64,
    /// Noise-free planted means, in outcome order.
    pub planted_mean: [Option<f64>; 4],
    /// Planted values including noise, before rounding to events.
    pub planted: [Option<f64>; 4],
    pub elite_words: usize,
    pub nonelite_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    /// Noise standard deviation actually used per outcome.
    pub noise_sd: [f64; 4],
    pub lsm0_sd: f64,
    pub projects: Vec<ProjectTruth>,
}

#[derive(Debug, Clone)]
pub struct SynthProject {
    pub meta: ProjectMeta,
    /// Event-archive records, one JSON object each.
    pub archive: Vec<Value>,
    pub accounts: BTreeMap<String, DateTime<Utc>>,
}

impl SynthProject {
    /// Parses the archive records exactly as the archive reader does.
    pub fn input(&self) -> ProjectInput {
        let events: Vec<RawEvent> = self
            .archive
            .iter()
            .flat_map(|v| archive_record(v).expect("generated records parse"))
            .collect();
        ProjectInput {
            meta: self.meta.clone(),
            events,
            accounts: self.accounts.clone(),
            aliases: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub projects: Vec<SynthProject>,
    pub truth: GroundTruth,
}

impl SynthCorpus {
    pub fn inputs(&self) -> Vec<ProjectInput> {
        self.projects.iter().map(SynthProject::input).collect()
    }
}

const LANGUAGES: [&str; 4] = ["Rust", "Go", "Python", "JavaScript"];
const DOMAINS: [&str; 3] = ["web", "tools", "data"];

struct Builder {
    repo: String,
    next_id: u64,
    records: Vec<Value>,
}

impl Builder {
    fn id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn push(&mut self, ty: &str, actor: &str, t: DateTime<Utc>, payload: Value) {
        let id = self.id();
        self.records.push(json!({
            "id": id.to_string(),
            "type": ty,
            "actor": {"login": actor},
            "created_at": timefmt::format(&t),
            "repo": {"name": self.repo},
            "payload": payload,
        }));
    }
}

/// Text half of a project: everything except the outcome events.
struct Draft {
    meta: ProjectMeta,
    builder: Builder,
    accounts: BTreeMap<String, DateTime<Utc>>,
    elites: Vec<String>,
    nonelites: Vec<String>,
    next_number: u64,
    truth: ProjectTruth,
}

fn rng_for(seed: u64, project: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(project as u64 * 8 + purpose);
    rng
}

fn profile_of(tokens: &TokenStream, dict: &CategoryDictionary) -> Option<CategoryProfile> {
    let pct = category_percentages(tokens, dict).ok()?;
    let summary = approx_summary(tokens, &pct).ok()?;
    Some(CategoryProfile {
        function_pct: pct,
        summary,
        total_words: tokens.total_count,
    })
}

fn draft_project(spec: &SynthSpec, idx: usize, vocab: &Vocab, dict: &CategoryDictionary) -> Draft {
    let mut rng = rng_for(spec.seed, idx, 0);
    let name = format!("synth-{idx:03}");
    let start = timefmt::parse(&spec.start).expect("validated");
    let created_at = start + Duration::days(rng.random_range(0..365));
    let window = MonthlyBuckets::empty(created_at);
    let window_end = window.window_end();
    let window_secs = (window_end - created_at).num_seconds();

    let n_dev = rng.random_range(spec.developers[0]..=spec.developers[1]);
    let expected = spec.elite_fraction * n_dev as f64;
    let lo = ((expected * 0.5).floor() as usize).max(1);
    let hi = ((expected * 1.5).ceil() as usize).clamp(lo, n_dev - 2);
    let n_elite = rng.random_range(lo..=hi);
    let elites: Vec<String> = (0..n_elite).map(|j| format!("p{idx}e{j}")).collect();
    let nonelites: Vec<String> = (0..n_dev - n_elite).map(|j| format!("p{idx}u{j}")).collect();
    let mut accounts = BTreeMap::new();
    for d in elites.iter().chain(&nonelites) {
        accounts.insert(d.clone(), created_at - Duration::days(rng.random_range(30..2500)));
    }
    let meta = ProjectMeta {
        name: name.clone(),
        created_at,
        sponsorship: Some(rng.random_bool(0.3)),
        main_language: LANGUAGES.choose(&mut rng).unwrap().to_string(),
        domain: DOMAINS.choose(&mut rng).unwrap().to_string(),
        validation: None,
    };
    let mut b = Builder {
        repo: format!("synth/{name}"),
        next_id: 0,
        records: Vec::new(),
    };

    // Periodic write actions keep every elite continuously elite.
    for e in &elites {
        let mut t = created_at - Duration::days(rng.random_range(1..20));
        while t < window_end {
            if rng.random_bool(0.5) {
                b.push("MilestoneEvent", e, t, json!({"action": "edited"}));
            } else {
                b.push("ReleaseEvent", e, t, json!({"action": "published"}));
            }
            let jitter = rng.random_range(0..=(spec.write_interval_days / 6));
            t += Duration::days(spec.write_interval_days - jitter);
        }
    }

    let gap = rng.random_range(spec.style_gap[0]..=spec.style_gap[1]);
    let elite_rates = side_rates(&spec.base_profile, gap, &mut rng);
    let nonelite_rates = side_rates(&spec.base_profile, gap, &mut rng);
    let mut elite_tokens = Vec::new();
    let mut nonelite_tokens = Vec::new();
    let mut number = 0u64;
    let n_threads = rng.random_range(spec.threads[0]..=spec.threads[1]);
    for _ in 0..n_threads {
        number += 1;
        let within = rng.random_bool(spec.within_fraction);
        let within_elite = within && rng.random_bool(0.5);
        let is_pr = rng.random_bool(0.4);
        let opener_pool = if within_elite { &elites } else { &nonelites };
        let opener = opener_pool.choose(&mut rng).unwrap().clone();
        let mut t = created_at + Duration::seconds(rng.random_range(0..window_secs - 40 * 86_400));
        let nwords = |rng: &mut ChaCha8Rng| rng.random_range(spec.words_per_message[0]..=spec.words_per_message[1]);

        let opener_rates = if within_elite { &elite_rates } else { &nonelite_rates };
        let k = nwords(&mut rng);
        let words = draw_words(opener_rates, vocab, k, &mut rng);
        let body = render_body(&words, None, spec.artifact_rate, &mut rng);
        if !within {
            nonelite_tokens.extend(words);
        }
        let title = format!("{} {}", vocab.filler.choose(&mut rng).unwrap(), vocab.filler.choose(&mut rng).unwrap());
        if is_pr {
            b.push(
                "PullRequestEvent",
                &opener,
                t,
                json!({"action": "opened", "number": number,
                       "pull_request": {"number": number, "title": title, "body": body, "user": {"login": opener}}}),
            );
        } else {
            b.push(
                "IssuesEvent",
                &opener,
                t,
                json!({"action": "opened",
                       "issue": {"number": number, "title": title, "body": body, "user": {"login": opener}, "labels": []}}),
            );
        }

        let mut prev_author = opener.clone();
        let mut prev_elite = within_elite;
        let replies = rng.random_range(spec.replies[0]..=spec.replies[1]);
        let comment = |b: &mut Builder, author: &str, t: DateTime<Utc>, body: String| {
            let cid = b.id() + 1_000_000;
            let mut issue = json!({"number": number});
            if is_pr {
                issue["pull_request"] = json!({"url": format!("https://example.org/pull/{number}")});
            }
            b.push(
                "IssueCommentEvent",
                author,
                t,
                json!({"action": "created", "issue": issue, "comment": {"id": cid, "body": body, "user": {"login": author}}}),
            );
        };
        for _ in 0..replies {
            let elite_turn = if within { within_elite } else { !prev_elite };
            t += Duration::seconds(rng.random_range(600..3 * 86_400));
            let pool = if elite_turn { &elites } else { &nonelites };
            let author = pool.choose(&mut rng).unwrap().clone();
            let mention = (rng.random_bool(0.3) && author != prev_author).then(|| prev_author.clone());
            let k = nwords(&mut rng);
            let rates = if elite_turn { &elite_rates } else { &nonelite_rates };
            let words = draw_words(rates, vocab, k, &mut rng);
            let body = render_body(&words, mention.as_deref(), spec.artifact_rate, &mut rng);
            if !within {
                if elite_turn { elite_tokens.extend(words) } else { nonelite_tokens.extend(words) }
            }
            comment(&mut b, &author, t, body);
            prev_author = author;
            prev_elite = elite_turn;

            if !within && rng.random_bool(spec.same_status_rate) {
                // Same-status follow-up without mentions: dropped by the filter.
                t += Duration::seconds(rng.random_range(600..86_400));
                let author = pool.choose(&mut rng).unwrap().clone();
                let k = nwords(&mut rng);
                let words = draw_words(rates, vocab, k, &mut rng);
                let body = render_body(&words, None, spec.artifact_rate, &mut rng);
                comment(&mut b, &author, t, body);
                prev_author = author;
            }
        }
    }

    let elite_ts = TokenStream::new(elite_tokens);
    let nonelite_ts = TokenStream::new(nonelite_tokens);
    let lsm0 = match (profile_of(&elite_ts, dict), profile_of(&nonelite_ts, dict)) {
        (Some(e), Some(n)) => lsm_vector(&e, &n, spec.min_corpus_words).ok().map(|v| v.lsm[0]),
        _ => None,
    };
    Draft {
        meta,
        builder: b,
        accounts,
        elites,
        nonelites,
        next_number: number,
        truth: ProjectTruth {
            project: name,
            lsm0,
            style_gap: gap,
            planted_mean: [None; 4],
            planted: [None; 4],
            elite_words: elite_ts.total_count,
            nonelite_words: nonelite_ts.total_count,
        },
    }
}

fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Residual spread of the centered square of `xs` after regressing it on
/// `xs`.
fn squared_resid_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    let sm = sq.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&sq).map(|(x, s)| (x - m) * (s - sm)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let resid: Vec<f64> = xs.iter().zip(&sq).map(|(x, s)| s - sm - slope * (x - m)).collect();
    sd(&resid)
}

/// Noise sd that gives a two-sided 5% test on a coefficient `beta` the
/// requested power, for a regressor with spread `spread` over `n` rows.
pub fn noise_for_power(beta: f64, spread: f64, n: usize, power: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
    let z = StdNormal::standard();
    let delta = z.inverse_cdf(0.975) + z.inverse_cdf(power);
    (beta.abs() * spread * (n as f64).sqrt() / delta).max(0.0)
}

fn days(d: f64) -> Duration {
    Duration::seconds((d * 86_400.0).round() as i64)
}

fn add_outcome_events(d: &mut Draft, values: [Option<f64>; 4], rng: &mut ChaCha8Rng) {
    let buckets = MonthlyBuckets::empty(d.meta.created_at);
    let pusher = d.elites[0].clone();
    let closer = d.elites[d.elites.len() - 1].clone();
    let reporter = d.nonelites[0].clone();
    let [new_c, bct, new_b, bfr] = values.map(|v| v.unwrap_or(0.0));
    let months = WINDOW_MONTHS;

    let spread = |total: usize, rng: &mut ChaCha8Rng| {
        let mut per = vec![total / months; months];
        for _ in 0..total % months {
            per[rng.random_range(0..months)] += 1;
        }
        per
    };
    let commits = spread((36.0 * new_c.max(0.0)).round() as usize, rng);
    let bugs = spread((36.0 * new_b.max(0.0)).round() as usize, rng);
    let cycle = bct.clamp(0.5, 24.0);
    let fix_rate = bfr.clamp(0.0, 1.0);
    let mut sha = 0u64;
    for m in 0..months {
        let (from, to) = buckets.span(m);
        let span = (to - from).num_seconds();
        if commits[m] > 0 {
            let t = from + Duration::seconds(rng.random_range(0..span));
            let list: Vec<Value> = (0..commits[m])
                .map(|_| {
                    sha += 1;
                    json!({"sha": format!("{:040x}", (d.builder.repo.len() as u64) << 48 | sha), "author": {"login": pusher}})
                })
                .collect();
            d.builder.push(
                "PushEvent",
                &pusher,
                t,
                json!({"ref": "refs/heads/main", "default_branch": "main", "commits": list}),
            );
        }
        let closes = (fix_rate * bugs[m] as f64).round() as usize;
        for i in 0..bugs[m] {
            d.next_number += 1;
            let number = d.next_number;
            let opened = from + Duration::days(1) + Duration::seconds(rng.random_range(0..2 * 86_400));
            d.builder.push(
                "IssuesEvent",
                &reporter,
                opened,
                json!({"action": "opened",
                       "issue": {"number": number, "title": "Bug: crash in parser", "body": "", "user": {"login": reporter}, "labels": [{"name": "bug"}]}}),
            );
            if i < closes {
                d.builder.push(
                    "IssuesEvent",
                    &closer,
                    opened + days(cycle),
                    json!({"action": "closed", "issue": {"number": number, "user": {"login": reporter}}}),
                );
            }
        }
    }
}

/// Generates the corpus. Texts come first; the noise scales are then set from
/// the realized lsm0 values and the outcome events are drawn.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let dict = CategoryDictionary::bundled();
    let vocab = Vocab::new(&dict, &AcronymDict::seed());
    let mut drafts: Vec<Draft> = (0..spec.projects)
        .into_par_iter()
        .map(|i| draft_project(spec, i, &vocab, &dict))
        .collect();

    let xs: Vec<f64> = drafts.iter().filter_map(|d| d.truth.lsm0).collect();
    let lsm0_sd = sd(&xs);
    let noise_sd = spec.models().map(|m| match m.noise {
        Noise::Sd(s) => s.max(0.0),
        Noise::Power { power, beta, squared } => {
            let spread = if squared { squared_resid_sd(&xs) } else { lsm0_sd };
            noise_for_power(beta, spread, xs.len(), power)
        }
    });

    for (i, d) in drafts.iter_mut().enumerate() {
        let mut rng = rng_for(spec.seed, i, 1);
        let mut planted = [None; 4];
        let mut means = [None; 4];
        if let Some(x) = d.truth.lsm0 {
            for (k, m) in spec.models().iter().enumerate() {
                let mean = m.mean(x);
                let eps = if noise_sd[k] > 0.0 {
                    Normal::new(0.0, noise_sd[k]).expect("finite sd").sample(&mut rng)
                } else {
                    0.0
                };
                means[k] = Some(mean);
                planted[k] = Some(mean + eps);
            }
        }
        d.truth.planted_mean = means;
        d.truth.planted = planted;
        let values = if d.truth.lsm0.is_some() {
            planted
        } else {
            spec.models().map(|m| Some(m.intercept))
        };
        add_outcome_events(d, values, &mut rng);
    }

    let mut projects = Vec::with_capacity(drafts.len());
    let mut truths = Vec::with_capacity(drafts.len());
    for d in drafts {
        let mut records = d.builder.records;
        records.sort_by(|a, b| a["created_at"].as_str().cmp(&b["created_at"].as_str()));
        projects.push(SynthProject {
            meta: d.meta,
            archive: records,
            accounts: d.accounts,
        });
        truths.push(d.truth);
    }
    Ok(SynthCorpus {
        projects,
        truth: GroundTruth {
            spec: spec.clone(),
            noise_sd,
            lsm0_sd,
            projects: truths,
        },
    })
}

fn write(path: &Path, contents: &[u8]) -> Result<(), SynthError> {
    let io = |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes one bundle per project, `ground_truth.json`, and a `run.toml`
/// that runs the pipeline over the bundles into `results/`.
pub fn write_to_disk(corpus: &SynthCorpus, dir: &Path) -> Result<(), SynthError> {
    let mut cfg = RunConfig::new("results");
    cfg.seed = corpus.truth.spec.seed;
    cfg.thresholds.min_corpus_words = corpus.truth.spec.min_corpus_words;
    for p in &corpus.projects {
        let pdir = dir.join(&p.meta.name);
        let meta = toml::to_string(&p.meta).expect("meta serializes");
        write(&pdir.join("meta.toml"), meta.as_bytes())?;
        let mut lines = String::new();
        for r in &p.archive {
            lines.push_str(&serde_json::to_string(r).expect("record serializes"));
            lines.push('\n');
        }
        write(&pdir.join(ARCHIVE_DIR).join("events.jsonl"), lines.as_bytes())?;
        let contributors: Vec<Value> = p
            .accounts
            .iter()
            .map(|(login, t)| json!({"login": login, "created_at": timefmt::format(t)}))
            .collect();
        let api = json!({"repo": {"full_name": format!("synth/{}", p.meta.name)}, "contributors": contributors});
        write(
            &pdir.join(API_EXPORT),
            (serde_json::to_string_pretty(&api).expect("export serializes") + "\n").as_bytes(),
        )?;
        cfg.projects.push(crate::config::ProjectEntry {
            meta: Path::new(&p.meta.name).join("meta.toml"),
        });
    }
    let truth = serde_json::to_string_pretty(&corpus.truth).expect("truth serializes") + "\n";
    write(&dir.join("ground_truth.json"), truth.as_bytes())?;
    let run = toml::to_string(&cfg).expect("config serializes");
    write(&dir.join("run.toml"), run.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::{expand_acronyms, strip_se_artifacts};

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            seed,
            projects: 6,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn rendered_bodies_tokenize_back_to_words() {
        let dict = CategoryDictionary::bundled();
        let acr = AcronymDict::seed();
        let vocab = Vocab::new(&dict, &acr);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rates = side_rates(&SynthSpec::default().base_profile, 0.5, &mut rng);
        for _ in 0..300 {
            let words = draw_words(&rates, &vocab, 30, &mut rng);
            let body = render_body(&words, Some("p1u3"), 1.0, &mut rng);
            let toks = tokenize(&expand_acronyms(&strip_se_artifacts(&body), &acr));
            assert_eq!(toks.tokens, words, "{body}");
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate(&small(5)).unwrap();
        let b = generate(&small(5)).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.projects[2].archive, b.projects[2].archive);
        let c = generate(&small(6)).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn zero_elite_fraction_rejected() {
        let spec = SynthSpec {
            elite_fraction: 0.0,
            ..small(1)
        };
        assert!(matches!(generate(&spec), Err(SynthError::Infeasible(_))));
        let mut spec = small(1);
        spec.base_profile[2] = -1.0;
        assert!(matches!(generate(&spec), Err(SynthError::Infeasible(_))));
    }

    #[test]
    fn power_noise_formula() {
        // 1.96 + 1.645 = 3.605 standard errors.
        let s = noise_for_power(10.0, 0.05, 200, 0.95);
        assert!((s - 10.0 * 0.05 * 200f64.sqrt() / 3.6048).abs() < 1e-3);
    }
}
