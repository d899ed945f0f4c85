//! Readers for the two event sources.
//!
//! `archive-jsonl`: one JSON object per line with fields
//! `{id, type, actor: {login}, created_at, repo: {name}, payload}` using the
//! public event-archive type names (`PushEvent`, `IssuesEvent`, ...).
//!
//! `api-export-json`: a single JSON document with one array per REST endpoint
//! (`issues`, `issue_comments`, `review_comments`, `commits`,
//! `commit_comments`, `contributors`) plus a `repo` object. The exact layout is
//! documented in `docs/formats.md`.
//!
//! Entity-creating events get source-independent ids (`issue/12`, `pull/7`,
//! `comment/991`, `commit/<sha>`) so the same entity read from both sources
//! collapses in [`super::dedup_events`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde_json::Value;

use super::{keys, EventKind, IngestError, RawEvent, TargetRef, ThreadKind};
use crate::timefmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    ArchiveJsonl,
    ApiExportJson,
}

impl FromStr for EventFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "archive-jsonl" | "ArchiveJsonl" => Ok(EventFormat::ArchiveJsonl),
            "api-export-json" | "ApiExportJson" => Ok(EventFormat::ApiExportJson),
            other => Err(IngestError::UnknownFormat(other.to_string())),
        }
    }
}

/// What to do with a record that fails to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorPolicy {
    #[default]
    Abort,
    SkipAndLog,
}

pub fn read_event_stream(
    path: &Path,
    format: EventFormat,
    policy: ErrorPolicy,
) -> Result<Vec<RawEvent>, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let display = path.display().to_string();
    match format {
        EventFormat::ArchiveJsonl => parse_archive(&text, &display, policy),
        EventFormat::ApiExportJson => parse_api_export(&text, &display, policy),
    }
}

/// Account creation instants from the `contributors` array of an API export.
pub fn read_api_accounts(path: &Path) -> Result<BTreeMap<String, DateTime<Utc>>, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| IngestError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut out = BTreeMap::new();
    for c in array(&doc, "contributors") {
        if let (Some(login), Some(created)) = (str_at(c, &["login"]), time_at(c, &["created_at"])) {
            out.insert(login.to_string(), created);
        }
    }
    Ok(out)
}

fn handle(
    policy: ErrorPolicy,
    path: &str,
    line: usize,
    message: String,
) -> Result<(), IngestError> {
    match policy {
        ErrorPolicy::Abort => Err(IngestError::Parse {
            path: path.to_string(),
            line,
            message,
        }),
        ErrorPolicy::SkipAndLog => {
            log::warn!("{path}:{line}: skipping malformed record: {message}");
            Ok(())
        }
    }
}

pub(crate) fn parse_archive(
    text: &str,
    path: &str,
    policy: ErrorPolicy,
) -> Result<Vec<RawEvent>, IngestError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(line)
            .map_err(|e| e.to_string())
            .and_then(|v| archive_record(&v));
        match parsed {
            Ok(events) => out.extend(events),
            Err(message) => handle(policy, path, idx + 1, message)?,
        }
    }
    Ok(out)
}

fn get<'a>(v: &'a Value, path: &[&str]) -> Option<&'a Value> {
    path.iter().try_fold(v, |v, k| v.get(*k))
}

fn str_at<'a>(v: &'a Value, path: &[&str]) -> Option<&'a str> {
    get(v, path).and_then(Value::as_str)
}

fn time_at(v: &Value, path: &[&str]) -> Option<DateTime<Utc>> {
    str_at(v, path).and_then(|s| timefmt::parse(s).ok())
}

fn key_at(v: &Value, path: &[&str]) -> Option<String> {
    match get(v, path)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn array<'a>(v: &'a Value, key: &str) -> &'a [Value] {
    v.get(key)
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .unwrap_or(&[])
}

fn label_names(v: &Value) -> Value {
    Value::Array(
        v.as_array()
            .map(|items| {
                items
                    .iter()
                    .filter_map(|l| l.get("name").and_then(Value::as_str).or(l.as_str()))
                    .map(|s| Value::String(s.to_string()))
                    .collect()
            })
            .unwrap_or_default(),
    )
}

fn required<'a, T>(v: Option<T>, what: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("missing field `{what}`"))
}

pub(crate) fn archive_record(v: &Value) -> Result<Vec<RawEvent>, String> {
    let id = required(key_at(v, &["id"]), "id")?;
    let ty = required(str_at(v, &["type"]), "type")?;
    let actor = required(str_at(v, &["actor", "login"]), "actor.login")?;
    let created = required(str_at(v, &["created_at"]), "created_at")?;
    let ts = timefmt::parse(created).map_err(|e| format!("bad created_at `{created}`: {e}"))?;
    let payload = v.get("payload").cloned().unwrap_or(Value::Null);
    let action = str_at(&payload, &["action"]).unwrap_or("");
    let base = |kind: EventKind| {
        RawEvent::new(id.clone(), kind, actor, ts).with_field(keys::SOURCE, "archive")
    };

    let events = match ty {
        "PushEvent" => {
            let git_ref = str_at(&payload, &["ref"]).unwrap_or("");
            let default_branch = str_at(&payload, &["default_branch"]);
            let branch = git_ref.strip_prefix("refs/heads/").unwrap_or(git_ref);
            let is_default = match default_branch {
                Some(d) => branch == d,
                None => branch == "main" || branch == "master",
            };
            if !is_default {
                vec![base(EventKind::Other("PushEvent".into()))]
            } else {
                let mut out = vec![base(EventKind::PushDefaultBranch)];
                for (i, c) in array(&payload, "commits").iter().enumerate() {
                    let sha = key_at(c, &["sha"]).ok_or_else(|| format!("commit {i} has no sha"))?;
                    let email = str_at(c, &["author", "email"]);
                    let name = str_at(c, &["author", "name"]);
                    let login = str_at(c, &["author", "login"]);
                    let commit_actor = login.or(email).or(name).unwrap_or(actor);
                    let mut e = RawEvent::new(format!("commit/{sha}"), EventKind::Commit, commit_actor, ts)
                        .with_target(TargetRef::new(ThreadKind::Commit, sha.clone()))
                        .with_field(keys::SHA, sha)
                        .with_field(keys::SOURCE, "archive");
                    if let Some(email) = email {
                        e = e.with_field(keys::AUTHOR_EMAIL, email);
                    }
                    if let Some(name) = name {
                        e = e.with_field(keys::AUTHOR_NAME, name);
                    }
                    if let Some(login) = login {
                        e = e.with_field(keys::AUTHOR_LOGIN, login);
                    }
                    out.push(e);
                }
                out
            }
        }
        "IssuesEvent" => {
            let issue = payload.get("issue").cloned().unwrap_or(Value::Null);
            let number = required(key_at(&issue, &["number"]), "payload.issue.number")?;
            let target = TargetRef::new(ThreadKind::Issue, number.clone());
            let author = str_at(&issue, &["user", "login"]);
            let (kind, event_id) = match action {
                "opened" => (EventKind::IssueOpened, format!("issue/{number}")),
                "closed" => (EventKind::IssueClosed, id.clone()),
                "labeled" => (EventKind::IssueLabeled, id.clone()),
                "reopened" => (EventKind::Other("IssueReopened".into()), id.clone()),
                other => (EventKind::Other(format!("IssuesEvent.{other}")), id.clone()),
            };
            let mut e = base(kind.clone()).with_target(target);
            e.event_id = event_id;
            if let Some(a) = author {
                e = e.with_field(keys::TARGET_AUTHOR, a);
            }
            if kind == EventKind::IssueOpened {
                e = e
                    .with_field(keys::TITLE, str_at(&issue, &["title"]).unwrap_or(""))
                    .with_field(keys::BODY, str_at(&issue, &["body"]).unwrap_or(""))
                    .with_field(keys::LABELS, label_names(issue.get("labels").unwrap_or(&Value::Null)));
            } else if kind == EventKind::IssueLabeled {
                let label = str_at(&payload, &["label", "name"]).unwrap_or("");
                e = e.with_field(keys::LABELS, Value::Array(vec![Value::String(label.to_string())]));
            }
            vec![e]
        }
        "PullRequestEvent" => {
            let pr = payload.get("pull_request").cloned().unwrap_or(Value::Null);
            let number = key_at(&payload, &["number"])
                .or_else(|| key_at(&pr, &["number"]))
                .ok_or("missing field `payload.number`")?;
            let merged = get(&pr, &["merged"]).and_then(Value::as_bool).unwrap_or(false);
            let (kind, event_id) = match action {
                "opened" => (EventKind::PROpened, format!("pull/{number}")),
                "closed" if merged => (EventKind::PRMerged, id.clone()),
                "closed" => (EventKind::PRClosed, id.clone()),
                other => (EventKind::Other(format!("PullRequestEvent.{other}")), id.clone()),
            };
            let mut e = base(kind.clone()).with_target(TargetRef::new(ThreadKind::PullRequest, number));
            e.event_id = event_id;
            if let Some(a) = str_at(&pr, &["user", "login"]) {
                e = e.with_field(keys::TARGET_AUTHOR, a);
            }
            if kind == EventKind::PROpened {
                e = e
                    .with_field(keys::TITLE, str_at(&pr, &["title"]).unwrap_or(""))
                    .with_field(keys::BODY, str_at(&pr, &["body"]).unwrap_or(""));
            }
            vec![e]
        }
        "IssueCommentEvent" | "PullRequestReviewCommentEvent" | "CommitCommentEvent" => {
            let comment = payload.get("comment").cloned().unwrap_or(Value::Null);
            let comment_id = required(key_at(&comment, &["id"]), "payload.comment.id")?;
            let target = match ty {
                "IssueCommentEvent" => {
                    let number = required(key_at(&payload, &["issue", "number"]), "payload.issue.number")?;
                    let is_pr = get(&payload, &["issue", "pull_request"]).is_some_and(|p| !p.is_null());
                    TargetRef::new(if is_pr { ThreadKind::PullRequest } else { ThreadKind::Issue }, number)
                }
                "PullRequestReviewCommentEvent" => {
                    let number = key_at(&payload, &["pull_request", "number"])
                        .ok_or("missing field `payload.pull_request.number`")?;
                    TargetRef::new(ThreadKind::PullRequest, number)
                }
                _ => {
                    let sha = required(key_at(&comment, &["commit_id"]), "payload.comment.commit_id")?;
                    TargetRef::new(ThreadKind::Commit, sha)
                }
            };
            let kind = match action {
                "" | "created" => EventKind::CommentCreated,
                "edited" => EventKind::CommentEdited,
                "deleted" => EventKind::CommentDeleted,
                other => EventKind::Other(format!("{ty}.{other}")),
            };
            let mut e = base(kind.clone())
                .with_target(target)
                .with_field(keys::COMMENT_ID, comment_id.clone());
            if kind == EventKind::CommentCreated {
                e.event_id = format!("comment/{comment_id}");
            }
            if let Some(a) = str_at(&comment, &["user", "login"]) {
                e = e.with_field(keys::TARGET_AUTHOR, a);
            }
            if kind != EventKind::CommentDeleted {
                e = e.with_field(keys::BODY, str_at(&comment, &["body"]).unwrap_or(""));
            }
            vec![e]
        }
        "MemberEvent" => {
            let kind = if action == "added" {
                EventKind::CollaboratorAdded
            } else {
                EventKind::Other(format!("MemberEvent.{action}"))
            };
            let mut e = base(kind);
            if let Some(m) = str_at(&payload, &["member", "login"]) {
                e = e.with_field(keys::MEMBER, m);
            }
            vec![e]
        }
        "MilestoneEvent" => vec![base(EventKind::MilestoneEdited)],
        "ReleaseEvent" => {
            let kind = if action == "published" {
                EventKind::ReleasePublished
            } else {
                EventKind::Other(format!("ReleaseEvent.{action}"))
            };
            vec![base(kind)]
        }
        // Already-normalized kind names are accepted as-is.
        other => vec![base(EventKind::from_name(other))],
    };
    Ok(events)
}

fn trailing_key(url: &str) -> Option<String> {
    url.rsplit('/').next().filter(|s| !s.is_empty()).map(str::to_string)
}

pub(crate) fn parse_api_export(
    text: &str,
    path: &str,
    policy: ErrorPolicy,
) -> Result<Vec<RawEvent>, IngestError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let doc: Value = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: path.to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    let mut entry = 0usize;

    let issues = array(&doc, "issues");
    let pr_numbers: BTreeSet<String> = issues
        .iter()
        .filter(|i| i.get("pull_request").is_some_and(|p| !p.is_null()))
        .filter_map(|i| key_at(i, &["number"]))
        .collect();

    let mut push = |res: Result<Vec<RawEvent>, String>, entry: usize| -> Result<(), IngestError> {
        match res {
            Ok(events) => {
                out.extend(events);
                Ok(())
            }
            Err(message) => handle(policy, path, entry, message),
        }
    };

    for issue in issues {
        entry += 1;
        push(api_issue(issue), entry)?;
    }
    for c in array(&doc, "issue_comments") {
        entry += 1;
        let res = (|| {
            let number = key_at(c, &["issue_number"])
                .or_else(|| str_at(c, &["issue_url"]).and_then(trailing_key))
                .ok_or("comment has neither issue_number nor issue_url")?;
            let kind = if pr_numbers.contains(&number) {
                ThreadKind::PullRequest
            } else {
                ThreadKind::Issue
            };
            api_comment(c, TargetRef::new(kind, number))
        })();
        push(res, entry)?;
    }
    for c in array(&doc, "review_comments") {
        entry += 1;
        let res = (|| {
            let number = key_at(c, &["pull_number"])
                .or_else(|| str_at(c, &["pull_request_url"]).and_then(trailing_key))
                .ok_or("review comment has neither pull_number nor pull_request_url")?;
            api_comment(c, TargetRef::new(ThreadKind::PullRequest, number))
        })();
        push(res, entry)?;
    }
    for c in array(&doc, "commit_comments") {
        entry += 1;
        let res = (|| {
            let sha = required(key_at(c, &["commit_id"]), "commit_id")?;
            api_comment(c, TargetRef::new(ThreadKind::Commit, sha))
        })();
        push(res, entry)?;
    }
    for c in array(&doc, "commits") {
        entry += 1;
        push(api_commit(c), entry)?;
    }
    Ok(out)
}

fn api_issue(issue: &Value) -> Result<Vec<RawEvent>, String> {
    let number = required(key_at(issue, &["number"]), "number")?;
    let author = required(str_at(issue, &["user", "login"]), "user.login")?;
    let opened = required(time_at(issue, &["created_at"]), "created_at")?;
    let is_pr = issue.get("pull_request").is_some_and(|p| !p.is_null());
    let (thread, open_kind, prefix) = if is_pr {
        (ThreadKind::PullRequest, EventKind::PROpened, "pull")
    } else {
        (ThreadKind::Issue, EventKind::IssueOpened, "issue")
    };
    let target = TargetRef::new(thread, number.clone());
    let labels = label_names(issue.get("labels").unwrap_or(&Value::Null));
    let mut out = vec![RawEvent::new(format!("{prefix}/{number}"), open_kind, author, opened)
        .with_target(target.clone())
        .with_field(keys::TARGET_AUTHOR, author)
        .with_field(keys::TITLE, str_at(issue, &["title"]).unwrap_or(""))
        .with_field(keys::BODY, str_at(issue, &["body"]).unwrap_or(""))
        .with_field(keys::LABELS, labels)
        .with_field(keys::SOURCE, "api")];

    let merged_at = time_at(issue, &["pull_request", "merged_at"]);
    let merged_by = str_at(issue, &["pull_request", "merged_by", "login"])
        .or_else(|| str_at(issue, &["merged_by", "login"]));
    let closed_at = time_at(issue, &["closed_at"]);
    let closed_by = str_at(issue, &["closed_by", "login"]);
    let close = match (is_pr, merged_at, merged_by, closed_at, closed_by) {
        (true, Some(t), Some(by), _, _) => Some((EventKind::PRMerged, t, by)),
        (true, _, _, Some(t), Some(by)) => Some((EventKind::PRClosed, t, by)),
        (false, _, _, Some(t), Some(by)) => Some((EventKind::IssueClosed, t, by)),
        // Without the closing actor the close is left to the archive source.
        _ => None,
    };
    if let Some((kind, t, by)) = close {
        out.push(
            RawEvent::new(format!("{prefix}/{number}/{}", kind.name()), kind, by, t)
                .with_target(target)
                .with_field(keys::TARGET_AUTHOR, author)
                .with_field(keys::SOURCE, "api"),
        );
    }
    Ok(out)
}

fn api_comment(c: &Value, target: TargetRef) -> Result<Vec<RawEvent>, String> {
    let id = required(key_at(c, &["id"]), "id")?;
    let author = required(str_at(c, &["user", "login"]), "user.login")?;
    let created = required(time_at(c, &["created_at"]), "created_at")?;
    Ok(vec![RawEvent::new(format!("comment/{id}"), EventKind::CommentCreated, author, created)
        .with_target(target)
        .with_field(keys::COMMENT_ID, id)
        .with_field(keys::TARGET_AUTHOR, author)
        .with_field(keys::BODY, str_at(c, &["body"]).unwrap_or(""))
        .with_field(keys::SOURCE, "api")])
}

fn api_commit(c: &Value) -> Result<Vec<RawEvent>, String> {
    let sha = required(key_at(c, &["sha"]), "sha")?;
    let email = str_at(c, &["commit", "author", "email"]);
    let name = str_at(c, &["commit", "author", "name"]);
    let login = str_at(c, &["author", "login"]);
    let date = required(time_at(c, &["commit", "author", "date"]), "commit.author.date")?;
    let actor = required(login.or(email).or(name), "author")?;
    let mut e = RawEvent::new(format!("commit/{sha}"), EventKind::Commit, actor, date)
        .with_target(TargetRef::new(ThreadKind::Commit, sha.clone()))
        .with_field(keys::SHA, sha)
        .with_field(keys::SOURCE, "api");
    if let Some(email) = email {
        e = e.with_field(keys::AUTHOR_EMAIL, email);
    }
    if let Some(name) = name {
        e = e.with_field(keys::AUTHOR_NAME, name);
    }
    if let Some(login) = login {
        e = e.with_field(keys::AUTHOR_LOGIN, login);
    }
    Ok(vec![e])
}
