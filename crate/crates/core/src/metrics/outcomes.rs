use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::ingest::{EventKind, MonthlyBuckets, RawEvent, ThreadKind, WINDOW_MONTHS};

pub const DEFAULT_BUG_KEYWORDS: [&str; 6] = ["bug", "defect", "error", "fault", "crash", "fix"];

/// Case-insensitive whole-word keyword search over issue titles and labels.
#[derive(Debug, Clone)]
pub struct BugDetector {
    pattern: Option<Regex>,
}

impl Default for BugDetector {
    fn default() -> Self {
        BugDetector::new(DEFAULT_BUG_KEYWORDS)
    }
}

impl BugDetector {
    pub fn new<S: AsRef<str>>(keywords: impl IntoIterator<Item = S>) -> Self {
        let alts: Vec<String> = keywords
            .into_iter()
            .map(|k| k.as_ref().trim().to_string())
            .filter(|k| !k.is_empty())
            .map(|k| regex::escape(&k))
            .collect();
        let pattern = (!alts.is_empty()).then(|| Regex::new(&format!(r"(?i)\b(?:{})\b", alts.join("|"))).unwrap());
        BugDetector { pattern }
    }

    pub fn is_bug<S: AsRef<str>>(&self, title: &str, labels: &[S]) -> bool {
        let Some(re) = &self.pattern else { return false };
        re.is_match(title) || labels.iter().any(|l| re.is_match(l.as_ref()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugIssue {
    pub id: String,
    #[serde(with = "crate::timefmt")]
    pub opened: DateTime<Utc>,
    /// Final close; `None` while open at the end of the events.
    #[serde(with = "crate::timefmt::option")]
    pub closed: Option<DateTime<Utc>>,
}

/// Issues (not PRs) opened among `events` whose title or labels carry a bug
/// keyword. Labels added after opening count. A reopened issue is closed at
/// its last close, or open if the last transition was a reopen.
pub fn collect_bug_issues<'a>(events: impl IntoIterator<Item = &'a RawEvent>, detector: &BugDetector) -> Vec<BugIssue> {
    struct State {
        opened: DateTime<Utc>,
        title: String,
        labels: Vec<String>,
        closed: Option<DateTime<Utc>>,
    }
    let mut events: Vec<&RawEvent> = events
        .into_iter()
        .filter(|e| e.target.as_ref().is_some_and(|t| t.kind == ThreadKind::Issue))
        .collect();
    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.event_id.cmp(&b.event_id)));
    let mut issues: BTreeMap<String, State> = BTreeMap::new();
    for e in events {
        let key = e.target.as_ref().map(|t| t.to_string()).unwrap_or_default();
        match &e.kind {
            EventKind::IssueOpened => {
                issues.entry(key).or_insert_with(|| State {
                    opened: e.timestamp,
                    title: e.title().unwrap_or("").to_string(),
                    labels: e.labels(),
                    closed: None,
                });
            }
            kind => {
                let Some(st) = issues.get_mut(&key) else { continue };
                match kind {
                    EventKind::IssueLabeled => st.labels.extend(e.labels()),
                    EventKind::IssueClosed => st.closed = Some(e.timestamp),
                    EventKind::Other(name) if name == "IssueReopened" => st.closed = None,
                    _ => {}
                }
            }
        }
    }
    issues
        .into_iter()
        .filter(|(_, st)| detector.is_bug(&st.title, &st.labels))
        .map(|(id, st)| BugIssue {
            id,
            opened: st.opened,
            closed: st.closed,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MonthsUsed {
    pub new_c: usize,
    pub bct: usize,
    pub new_b: usize,
    pub bfr: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSet {
    pub new_c: f64,
    /// Days; `None` when no bug was closed in any month.
    pub bct: Option<f64>,
    pub new_b: f64,
    /// `None` when no bug was opened in any month.
    pub bfr: Option<f64>,
    pub months_used: MonthsUsed,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Monthly commit and bug counts averaged over the window. BFR skips months
/// without new bugs, BCT months without closed bugs.
pub fn compute_outcomes(buckets: &MonthlyBuckets, bugs: &[BugIssue]) -> OutcomeSet {
    let months = WINDOW_MONTHS;
    let commits: Vec<f64> = buckets
        .months
        .iter()
        .map(|m| m.iter().filter(|e| e.kind == EventKind::Commit).count() as f64)
        .collect();
    let mut opened = vec![0usize; months];
    let mut fixed = vec![0usize; months];
    let mut cycle: Vec<Vec<f64>> = vec![Vec::new(); months];
    for b in bugs {
        if let Some(m) = buckets.month_of(b.opened) {
            opened[m] += 1;
        }
        if let Some(c) = b.closed {
            if let Some(m) = buckets.month_of(c) {
                fixed[m] += 1;
                cycle[m].push((c - b.opened).num_seconds() as f64 / SECONDS_PER_DAY);
            }
        }
    }
    let new_b: Vec<f64> = opened.iter().map(|&n| n as f64).collect();
    let bfr: Vec<f64> = (0..months)
        .filter(|&m| opened[m] > 0)
        .map(|m| fixed[m] as f64 / opened[m] as f64)
        .collect();
    let bct: Vec<f64> = cycle.iter().filter_map(|c| mean(c)).collect();
    OutcomeSet {
        new_c: mean(&commits).unwrap_or(0.0),
        bct: mean(&bct),
        new_b: mean(&new_b).unwrap_or(0.0),
        bfr: mean(&bfr),
        months_used: MonthsUsed {
            new_c: commits.len(),
            bct: bct.len(),
            new_b: new_b.len(),
            bfr: bfr.len(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{keys, window_and_bucket, ProjectMeta, TargetRef};
    use crate::timefmt;
    use chrono::Duration;

    fn t0() -> DateTime<Utc> {
        timefmt::parse("2019-05-01T00:00:00Z").unwrap()
    }

    fn meta() -> ProjectMeta {
        ProjectMeta {
            name: "p".into(),
            created_at: t0(),
            sponsorship: Some(false),
            main_language: "Go".into(),
            domain: "web".into(),
            validation: None,
        }
    }

    #[test]
    fn keyword_rule() {
        let d = BugDetector::default();
        assert!(d.is_bug("Crash when saving", &[] as &[&str]));
        assert!(!d.is_bug("Add dark mode", &["enhancement"]));
        assert!(d.is_bug("", &["bug"]));
        assert!(d.is_bug("x", &["type: Bug"]));
        assert!(!d.is_bug("Fixes for debugging", &[] as &[&str]));
        assert!(!BugDetector::new(Vec::<String>::new()).is_bug("bug", &["bug"]));
    }

    fn issue_events(n: u32, title: &str, open: i64, transitions: &[(i64, &str)]) -> Vec<RawEvent> {
        let target = TargetRef::new(ThreadKind::Issue, n.to_string());
        let mut out = vec![RawEvent::new(format!("issue/{n}"), EventKind::IssueOpened, "u", t0() + Duration::days(open))
            .with_target(target.clone())
            .with_field(keys::TITLE, title)];
        for (i, (d, what)) in transitions.iter().enumerate() {
            let kind = match *what {
                "close" => EventKind::IssueClosed,
                "reopen" => EventKind::Other("IssueReopened".into()),
                _ => EventKind::IssueLabeled,
            };
            let mut e = RawEvent::new(format!("{n}/{i}"), kind, "m", t0() + Duration::days(*d)).with_target(target.clone());
            if *what == "label" {
                e = e.with_field(keys::LABELS, vec!["bug"]);
            }
            out.push(e);
        }
        out
    }

    #[test]
    fn bug_lifecycle() {
        let mut events = issue_events(1, "error on start", 0, &[(3, "close"), (4, "reopen"), (9, "close")]);
        events.extend(issue_events(2, "feature", 1, &[(2, "label")]));
        events.extend(issue_events(3, "bug", 1, &[(2, "close"), (5, "reopen")]));
        events.extend(issue_events(4, "docs", 1, &[]));
        let bugs = collect_bug_issues(&events, &BugDetector::default());
        let ids: Vec<_> = bugs.iter().map(|b| b.id.as_str()).collect();
        assert_eq!(ids, ["issue/1", "issue/2", "issue/3"]);
        assert_eq!(bugs[0].closed, Some(t0() + Duration::days(9)));
        assert_eq!(bugs[2].closed, None);
    }

    fn commits_per_month(n: usize) -> Vec<RawEvent> {
        let b = window_and_bucket(Vec::new(), &meta());
        (0..WINDOW_MONTHS)
            .flat_map(|m| {
                let start = b.span(m).0;
                (0..n).map(move |i| RawEvent::new(format!("c{m}-{i}"), EventKind::Commit, "a", start + Duration::hours(i as i64)))
            })
            .collect()
    }

    #[test]
    fn constant_commits() {
        let b = window_and_bucket(commits_per_month(5), &meta());
        let o = compute_outcomes(&b, &[]);
        assert_eq!(o.new_c, 5.0);
        assert_eq!(o.new_b, 0.0);
        assert_eq!(o.bct, None);
        assert_eq!(o.bfr, None);
        assert_eq!(o.months_used, MonthsUsed { new_c: 36, bct: 0, new_b: 36, bfr: 0 });
    }

    fn bug(open: i64, close: Option<i64>) -> BugIssue {
        BugIssue {
            id: format!("b{open}-{close:?}"),
            opened: t0() + Duration::days(open),
            closed: close.map(|c| t0() + Duration::days(c)),
        }
    }

    #[test]
    fn bfr_bct_rules() {
        let b = window_and_bucket(Vec::new(), &meta());
        // Month 0: 4 new, 3 fixed after 10, 20 and 3 days.
        // Month 1 (June): 0 new, 2 fixed from May.
        let bugs = vec![
            bug(0, Some(10)),
            bug(1, Some(21)),
            bug(2, Some(5)),
            bug(3, None),
            bug(4, Some(35)),
            bug(5, Some(40)),
        ];
        let o = compute_outcomes(&b, &bugs);
        // Month 0 has 6 new bugs, 3 fixed.
        assert_eq!(o.months_used.bfr, 1);
        assert_eq!(o.bfr, Some(0.5));
        assert_eq!(o.months_used.bct, 2);
        let m0 = (10.0 + 20.0 + 3.0) / 3.0;
        let m1 = (31.0 + 35.0) / 2.0;
        assert!((o.bct.unwrap() - (m0 + m1) / 2.0).abs() < 1e-12);
        assert!((o.new_b - 6.0 / 36.0).abs() < 1e-12);

        let four_three = vec![bug(0, Some(10)), bug(1, Some(21)), bug(2, Some(5)), bug(3, None)];
        assert_eq!(compute_outcomes(&b, &four_three).bfr, Some(0.75));
        let single = vec![bug(0, Some(10)), bug(1, Some(21))];
        assert_eq!(compute_outcomes(&b, &single).bct, Some(15.0));
    }
}
