//! Event ingestion: archive and API-export readers, deduplication, identity
//! resolution, and the 36-month monthly windowing.

mod dedup;
pub mod fetch;
mod identity;
mod read;
mod window;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use dedup::dedup_events;
pub use identity::{normalize_name, resolve_identities, AliasKind, AliasMap, IdentityResolver};
pub use read::{read_api_accounts, read_event_stream, ErrorPolicy, EventFormat};
pub(crate) use read::archive_record;
pub use window::{window_and_bucket, MonthlyBuckets, WINDOW_MONTHS};

/// Payload keys populated by the readers.
pub mod keys {
    pub const BODY: &str = "body";
    pub const TITLE: &str = "title";
    pub const LABELS: &str = "labels";
    /// Author of the issue or comment an event acts upon.
    pub const TARGET_AUTHOR: &str = "target_author";
    pub const COMMENT_ID: &str = "comment_id";
    pub const AUTHOR_EMAIL: &str = "author_email";
    pub const AUTHOR_NAME: &str = "author_name";
    pub const AUTHOR_LOGIN: &str = "author_login";
    pub const SHA: &str = "sha";
    pub const MEMBER: &str = "member";
    /// Source tag, `archive` or `api`.
    pub const SOURCE: &str = "source";
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("unknown event stream format `{0}` (expected `archive-jsonl` or `api-export-json`)")]
    UnknownFormat(String),
    #[error("alias map: {0}")]
    AliasMap(String),
    #[error("project meta {path}: {message}")]
    Meta { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Kind of a repository event. Unrecognized source kinds are kept verbatim in
/// [`EventKind::Other`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Commit,
    IssueOpened,
    IssueClosed,
    IssueLabeled,
    PROpened,
    PRMerged,
    PRClosed,
    CommentCreated,
    CommentEdited,
    CommentDeleted,
    CollaboratorAdded,
    MilestoneEdited,
    ReleasePublished,
    PushDefaultBranch,
    Other(String),
}

impl EventKind {
    const NAMED: [(&'static str, EventKind); 14] = [
        ("Commit", EventKind::Commit),
        ("IssueOpened", EventKind::IssueOpened),
        ("IssueClosed", EventKind::IssueClosed),
        ("IssueLabeled", EventKind::IssueLabeled),
        ("PROpened", EventKind::PROpened),
        ("PRMerged", EventKind::PRMerged),
        ("PRClosed", EventKind::PRClosed),
        ("CommentCreated", EventKind::CommentCreated),
        ("CommentEdited", EventKind::CommentEdited),
        ("CommentDeleted", EventKind::CommentDeleted),
        ("CollaboratorAdded", EventKind::CollaboratorAdded),
        ("MilestoneEdited", EventKind::MilestoneEdited),
        ("ReleasePublished", EventKind::ReleasePublished),
        ("PushDefaultBranch", EventKind::PushDefaultBranch),
    ];

    pub fn name(&self) -> &str {
        match self {
            EventKind::Other(s) => s,
            kind => {
                Self::NAMED
                    .iter()
                    .find(|(_, k)| k == kind)
                    .map(|(n, _)| *n)
                    .unwrap_or_default()
            }
        }
    }

    /// Total mapping: names outside the fixed set become `Other(name)`.
    pub fn from_name(name: &str) -> EventKind {
        Self::NAMED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| k.clone())
            .unwrap_or_else(|| EventKind::Other(name.to_string()))
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for EventKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(EventKind::from_name(&String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreadKind {
    Issue,
    PullRequest,
    Commit,
}

impl ThreadKind {
    fn prefix(self) -> &'static str {
        match self {
            ThreadKind::Issue => "issue",
            ThreadKind::PullRequest => "pull",
            ThreadKind::Commit => "commit",
        }
    }
}

/// Reference to the issue, pull request, or commit an event is attached to.
/// Rendered as `issue/12`, `pull/7`, or `commit/<sha>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TargetRef {
    pub kind: ThreadKind,
    pub key: String,
}

impl TargetRef {
    pub fn new(kind: ThreadKind, key: impl Into<String>) -> Self {
        TargetRef {
            kind,
            key: key.into(),
        }
    }
}

impl fmt::Display for TargetRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind.prefix(), self.key)
    }
}

impl FromStr for TargetRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (prefix, key) = s
            .split_once('/')
            .ok_or_else(|| format!("target `{s}` is not of the form kind/key"))?;
        let kind = match prefix {
            "issue" => ThreadKind::Issue,
            "pull" => ThreadKind::PullRequest,
            "commit" => ThreadKind::Commit,
            other => return Err(format!("unknown target kind `{other}`")),
        };
        if key.is_empty() {
            return Err(format!("target `{s}` has an empty key"));
        }
        Ok(TargetRef::new(kind, key))
    }
}

impl Serialize for TargetRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TargetRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// One timestamped repository event. Field order is the serialized order of
/// the normalized JSONL output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub event_id: String,
    pub kind: EventKind,
    pub actor: String,
    #[serde(with = "crate::timefmt")]
    pub timestamp: DateTime<Utc>,
    pub target: Option<TargetRef>,
    #[serde(default)]
    pub payload: BTreeMap<String, Value>,
}

impl RawEvent {
    pub fn new(
        event_id: impl Into<String>,
        kind: EventKind,
        actor: impl Into<String>,
        timestamp: DateTime<Utc>,
    ) -> Self {
        RawEvent {
            event_id: event_id.into(),
            kind,
            actor: actor.into(),
            timestamp,
            target: None,
            payload: BTreeMap::new(),
        }
    }

    pub fn with_target(mut self, target: TargetRef) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_field(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.payload.insert(key.to_string(), value.into());
        self
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    pub fn body(&self) -> Option<&str> {
        self.text(keys::BODY)
    }

    pub fn title(&self) -> Option<&str> {
        self.text(keys::TITLE)
    }

    pub fn labels(&self) -> Vec<String> {
        match self.payload.get(keys::LABELS) {
            Some(Value::Array(items)) => items
                .iter()
                .filter_map(|v| v.as_str().map(str::to_string))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn target_author(&self) -> Option<&str> {
        self.text(keys::TARGET_AUTHOR)
    }

    /// Identifier of the comment a comment event refers to.
    pub fn comment_id(&self) -> Option<String> {
        match self.payload.get(keys::COMMENT_ID)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }

    /// One normalized JSONL line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("RawEvent serialization is infallible")
    }
}

/// A developer after identity resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeveloperId {
    pub canonical_login: String,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
    #[serde(default, with = "crate::timefmt::option")]
    pub account_created_at: Option<DateTime<Utc>>,
}

impl DeveloperId {
    pub fn new(login: impl Into<String>) -> Self {
        DeveloperId {
            canonical_login: login.into(),
            aliases: BTreeSet::new(),
            account_created_at: None,
        }
    }
}

/// All developers known in one project, keyed by canonical login.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    pub developers: BTreeMap<String, DeveloperId>,
}

impl Roster {
    /// Builds the roster from resolved events: every actor and every target
    /// author becomes a developer. Alias groups and account dates are attached
    /// where known.
    pub fn build(
        events: &[RawEvent],
        aliases: Option<&AliasMap>,
        accounts: &BTreeMap<String, DateTime<Utc>>,
    ) -> Self {
        let mut developers: BTreeMap<String, DeveloperId> = BTreeMap::new();
        let mut touch = |login: &str| {
            developers
                .entry(login.to_string())
                .or_insert_with(|| DeveloperId::new(login));
        };
        for e in events {
            touch(&e.actor);
            if let Some(a) = e.target_author() {
                touch(a);
            }
        }
        if let Some(aliases) = aliases {
            for (canonical, group) in aliases.groups() {
                if let Some(dev) = developers.get_mut(canonical) {
                    dev.aliases
                        .extend(group.iter().map(|(kind, v)| format!("{}:{v}", kind.as_str())));
                }
            }
        }
        for (login, created) in accounts {
            let canonical = aliases
                .and_then(|a| a.lookup(AliasKind::Login, login))
                .map(str::to_string)
                .unwrap_or_else(|| login.to_lowercase());
            if let Some(dev) = developers.get_mut(&canonical) {
                dev.account_created_at = Some(match dev.account_created_at {
                    Some(existing) => existing.min(*created),
                    None => *created,
                });
            }
        }
        Roster { developers }
    }

    pub fn contains(&self, login: &str) -> bool {
        self.developers.contains_key(login)
    }

    pub fn logins(&self) -> impl Iterator<Item = &str> {
        self.developers.keys().map(String::as_str)
    }
}

/// Counts used by the sampling filter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationCounts {
    pub pull_requests: u64,
    pub contributors: u64,
    pub history_months: u32,
    #[serde(default = "default_true")]
    pub uses_pull_requests: bool,
    #[serde(default = "default_true")]
    pub has_elites: bool,
}

fn default_true() -> bool {
    true
}

/// Per-project metadata, read from `meta.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub name: String,
    #[serde(with = "crate::timefmt")]
    pub created_at: DateTime<Utc>,
    /// Manually coded; a missing value is a configuration error downstream.
    pub sponsorship: Option<bool>,
    pub main_language: String,
    pub domain: String,
    #[serde(default)]
    pub validation: Option<ValidationCounts>,
}

impl ProjectMeta {
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        toml::from_str(&text).map_err(|e| IngestError::Meta {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
