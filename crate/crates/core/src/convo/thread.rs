use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ConversationThread, Message};
use crate::ingest::{EventKind, RawEvent, Roster, TargetRef, ThreadKind};
use crate::textprep::remove_code;

static HANDLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[^\w@.\-/`])@([A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?(?:\[bot\])?)").unwrap());

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Mentions {
    pub resolved: BTreeSet<String>,
    pub unresolved: BTreeSet<String>,
}

fn resolve_handle(handle: &str, roster: &Roster) -> Option<String> {
    let h = handle.to_lowercase();
    if roster.contains(&h) {
        return Some(h);
    }
    let alias = format!("login:{h}");
    roster
        .developers
        .values()
        .find(|d| d.aliases.contains(&alias))
        .map(|d| d.canonical_login.clone())
}

/// `@handle` occurrences at a word boundary, outside code spans and blocks.
pub fn extract_mentions(body: &str, roster: &Roster) -> Mentions {
    let text = remove_code(body);
    let mut out = Mentions::default();
    for cap in HANDLE.captures_iter(&text) {
        let handle = &cap[1];
        match resolve_handle(handle, roster) {
            Some(id) => {
                out.resolved.insert(id);
            }
            None => {
                out.unresolved.insert(handle.to_lowercase());
            }
        }
    }
    out
}

/// Login glob patterns (`*` wildcard, case-insensitive) identifying bots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BotFilter {
    patterns: Vec<String>,
}

impl Default for BotFilter {
    fn default() -> Self {
        BotFilter::new(["*[bot]"])
    }
}

fn glob_match(pattern: &[u8], text: &[u8]) -> bool {
    match pattern.split_first() {
        None => text.is_empty(),
        Some((b'*', rest)) => (0..=text.len()).any(|i| glob_match(rest, &text[i..])),
        Some((c, rest)) => text.first() == Some(c) && glob_match(rest, &text[1..]),
    }
}

impl BotFilter {
    pub fn new<S: AsRef<str>>(patterns: impl IntoIterator<Item = S>) -> Self {
        BotFilter {
            patterns: patterns.into_iter().map(|p| p.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn is_bot(&self, login: &str) -> bool {
        let login = login.to_lowercase();
        self.patterns.iter().any(|p| glob_match(p.as_bytes(), login.as_bytes()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub threads: usize,
    pub messages: usize,
    /// Comments whose issue, PR, or commit is not among the events.
    pub orphans: usize,
    pub bot_messages: usize,
}

struct Draft<'a> {
    event: &'a RawEvent,
    target: TargetRef,
    body: String,
    deleted: bool,
}

/// Groups opening posts and comments into threads. The opening post of an
/// issue or PR is its initiator; commit threads start at their first comment.
/// Edits replace the body, deleted comments vanish, bot messages are dropped.
pub fn build_threads(events: &[RawEvent], roster: &Roster, bots: &BotFilter) -> (Vec<ConversationThread>, BuildStats) {
    let mut order: Vec<&RawEvent> = events.iter().collect();
    order.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.event_id.cmp(&b.event_id)));

    let mut stats = BuildStats::default();
    let mut openers: BTreeMap<TargetRef, &RawEvent> = BTreeMap::new();
    let mut commits: HashSet<&TargetRef> = HashSet::new();
    let mut comments: BTreeMap<String, Draft> = BTreeMap::new();

    for e in order {
        let Some(target) = &e.target else { continue };
        match &e.kind {
            EventKind::IssueOpened | EventKind::PROpened => {
                openers.entry(target.clone()).or_insert(e);
            }
            EventKind::Commit => {
                commits.insert(target);
            }
            EventKind::CommentCreated => {
                let Some(cid) = e.comment_id() else { continue };
                comments.entry(cid).or_insert_with(|| Draft {
                    event: e,
                    target: target.clone(),
                    body: e.body().unwrap_or("").to_string(),
                    deleted: false,
                });
            }
            EventKind::CommentEdited => {
                if let Some(d) = e.comment_id().and_then(|cid| comments.get_mut(&cid)) {
                    d.body = e.body().unwrap_or("").to_string();
                }
            }
            EventKind::CommentDeleted => {
                if let Some(d) = e.comment_id().and_then(|cid| comments.get_mut(&cid)) {
                    d.deleted = true;
                }
            }
            _ => {}
        }
    }

    let message = |e: &RawEvent, id: String, body: String, thread: &TargetRef| {
        let m = extract_mentions(&body, roster);
        Message {
            id,
            author: e.actor.clone(),
            timestamp: e.timestamp,
            body,
            mentions: m.resolved,
            unresolved_mentions: m.unresolved,
            thread: thread.clone(),
            is_initiator: false,
        }
    };

    let mut grouped: BTreeMap<TargetRef, Vec<Message>> = BTreeMap::new();
    for (target, e) in &openers {
        let body = e.body().unwrap_or("").to_string();
        grouped
            .entry(target.clone())
            .or_default()
            .push(message(e, e.event_id.clone(), body, target));
    }
    for (cid, d) in comments {
        if d.deleted {
            continue;
        }
        let known = match d.target.kind {
            ThreadKind::Commit => commits.contains(&d.target),
            _ => openers.contains_key(&d.target),
        };
        if !known {
            log::debug!("orphan comment {cid} on {}", d.target);
            stats.orphans += 1;
            continue;
        }
        grouped
            .entry(d.target.clone())
            .or_default()
            .push(message(d.event, format!("comment/{cid}"), d.body, &d.target));
    }

    let mut threads = Vec::new();
    for (id, mut messages) in grouped {
        let before = messages.len();
        messages.retain(|m| !bots.is_bot(&m.author));
        stats.bot_messages += before - messages.len();
        if !messages.iter().any(|m| !m.body.trim().is_empty()) {
            continue;
        }
        messages.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
        messages[0].is_initiator = true;
        stats.messages += messages.len();
        threads.push(ConversationThread {
            kind: id.kind,
            id,
            messages,
        });
    }
    stats.threads = threads.len();
    (threads, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::keys;
    use crate::timefmt;
    use chrono::{DateTime, Duration, Utc};

    fn t(h: i64) -> DateTime<Utc> {
        timefmt::parse("2021-03-01T00:00:00Z").unwrap() + Duration::hours(h)
    }

    fn roster(logins: &[&str]) -> Roster {
        let events: Vec<RawEvent> = logins
            .iter()
            .map(|l| RawEvent::new(format!("x/{l}"), EventKind::Other("X".into()), *l, t(0)))
            .collect();
        Roster::build(&events, None, &BTreeMap::new())
    }

    fn issue(n: u32, actor: &str, h: i64, body: &str) -> RawEvent {
        RawEvent::new(format!("issue/{n}"), EventKind::IssueOpened, actor, t(h))
            .with_target(TargetRef::new(ThreadKind::Issue, n.to_string()))
            .with_field(keys::BODY, body)
    }

    fn comment(cid: u32, target: TargetRef, actor: &str, h: i64, body: &str) -> RawEvent {
        RawEvent::new(format!("comment/{cid}"), EventKind::CommentCreated, actor, t(h))
            .with_target(target)
            .with_field(keys::COMMENT_ID, cid.to_string())
            .with_field(keys::BODY, body)
    }

    fn on_issue(n: u32) -> TargetRef {
        TargetRef::new(ThreadKind::Issue, n.to_string())
    }

    #[test]
    fn mentions() {
        let r = roster(&["alice", "bob"]);
        assert_eq!(extract_mentions("thanks @alice!", &r).resolved, BTreeSet::from(["alice".to_string()]));
        assert!(extract_mentions("email me at bob@example.com", &r).resolved.is_empty());
        assert!(extract_mentions("`@alice` in code", &r).resolved.is_empty());
        assert!(extract_mentions("```\n@alice\n```", &r).resolved.is_empty());
        let m = extract_mentions("@Bob and @carol", &r);
        assert_eq!(m.resolved, BTreeSet::from(["bob".to_string()]));
        assert_eq!(m.unresolved, BTreeSet::from(["carol".to_string()]));
    }

    #[test]
    fn issue_with_comments() {
        let events = vec![
            issue(1, "ann", 0, "it breaks"),
            comment(10, on_issue(1), "ben", 1, "which version"),
            comment(11, on_issue(1), "ann", 2, "the latest"),
            comment(12, on_issue(1), "ben", 3, "ok"),
        ];
        let (threads, stats) = build_threads(&events, &roster(&["ann", "ben"]), &BotFilter::default());
        assert_eq!(threads.len(), 1);
        assert_eq!(threads[0].messages.len(), 4);
        assert!(threads[0].messages[0].is_initiator);
        assert_eq!(threads[0].messages[0].body, "it breaks");
        assert!(threads[0].messages[1..].iter().all(|m| !m.is_initiator));
        assert_eq!(stats.orphans, 0);
    }

    #[test]
    fn commit_without_comments_has_no_thread() {
        let c = RawEvent::new("commit/abc", EventKind::Commit, "ann", t(0))
            .with_target(TargetRef::new(ThreadKind::Commit, "abc"));
        let (threads, _) = build_threads(&[c.clone()], &roster(&["ann"]), &BotFilter::default());
        assert!(threads.is_empty());
        let cc = comment(5, TargetRef::new(ThreadKind::Commit, "abc"), "ben", 1, "nice one");
        let (threads, _) = build_threads(&[c, cc], &roster(&["ann"]), &BotFilter::default());
        assert_eq!(threads.len(), 1);
        assert!(threads[0].messages[0].is_initiator);
        assert_eq!(threads[0].messages[0].author, "ben");
    }

    #[test]
    fn orphans_edits_deletes_and_bots() {
        let edit = RawEvent::new("e1", EventKind::CommentEdited, "ben", t(5))
            .with_target(on_issue(1))
            .with_field(keys::COMMENT_ID, "10")
            .with_field(keys::BODY, "final text");
        let del = RawEvent::new("d1", EventKind::CommentDeleted, "ann", t(6))
            .with_target(on_issue(1))
            .with_field(keys::COMMENT_ID, "11");
        let events = vec![
            issue(1, "ann", 0, "body"),
            comment(10, on_issue(1), "ben", 1, "draft"),
            comment(11, on_issue(1), "cy", 2, "gone"),
            comment(12, on_issue(1), "dependabot[bot]", 3, "bump"),
            comment(13, on_issue(99), "ben", 4, "parent outside window"),
            edit,
            del,
        ];
        let (threads, stats) = build_threads(&events, &roster(&["ann", "ben", "cy"]), &BotFilter::default());
        let bodies: Vec<_> = threads[0].messages.iter().map(|m| m.body.as_str()).collect();
        assert_eq!(bodies, ["body", "final text"]);
        assert_eq!(stats.orphans, 1);
        assert_eq!(stats.bot_messages, 1);
    }

    #[test]
    fn bot_globs() {
        let f = BotFilter::new(["*[bot]", "ci-*"]);
        assert!(f.is_bot("Renovate[bot]"));
        assert!(f.is_bot("ci-runner"));
        assert!(!f.is_bot("robot"));
    }
}
