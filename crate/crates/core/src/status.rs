//! Time-varying elite status.
//!
//! A developer becomes elite when performing an action that requires write
//! permission and stays elite for 90 days after their latest such action.
//! Grants that overlap or abut merge into maximal disjoint intervals.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::{EventKind, MonthlyBuckets, RawEvent};

pub const ELITE_WINDOW_DAYS: i64 = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Elite,
    NonElite,
}

impl Status {
    pub fn opposite(self) -> Status {
        match self {
            Status::Elite => Status::NonElite,
            Status::NonElite => Status::Elite,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatusError {
    #[error("events must be sorted by timestamp: event {index} ({id}) precedes its predecessor")]
    Unsorted { index: usize, id: String },
}

/// Event kinds counted as write-permission actions.
///
/// `IssueClosed` and `CommentDeleted` only count when the actor is not the
/// author of the issue or comment, since reporters may close their own issues
/// and delete their own comments without write access.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WriteActionSet {
    kinds: BTreeSet<String>,
}

impl Default for WriteActionSet {
    fn default() -> Self {
        WriteActionSet::from_names([
            "IssueClosed",
            "IssueLabeled",
            "PRMerged",
            "PushDefaultBranch",
            "CollaboratorAdded",
            "MilestoneEdited",
            "ReleasePublished",
            "CommentDeleted",
        ])
    }
}

impl WriteActionSet {
    pub fn from_names<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Self {
        WriteActionSet {
            kinds: names.into_iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    pub fn contains(&self, kind: &EventKind) -> bool {
        self.kinds.contains(kind.name())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.kinds.iter().map(String::as_str)
    }
}

pub fn is_write_action(event: &RawEvent, set: &WriteActionSet) -> bool {
    if !set.contains(&event.kind) {
        return false;
    }
    match event.kind {
        EventKind::IssueClosed | EventKind::CommentDeleted => {
            matches!(event.target_author(), Some(author) if author != event.actor)
        }
        _ => true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliteInterval {
    #[serde(rename = "login")]
    pub developer: String,
    #[serde(with = "crate::timefmt")]
    pub start: DateTime<Utc>,
    #[serde(with = "crate::timefmt")]
    pub end: DateTime<Utc>,
}

impl EliteInterval {
    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }
}

/// Merged elite intervals per developer, each list sorted and disjoint.
/// Serializes as a flat array of `{login, start, end}`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EliteIntervals {
    by_dev: BTreeMap<String, Vec<(DateTime<Utc>, DateTime<Utc>)>>,
}

impl EliteIntervals {
    pub fn of(&self, developer: &str) -> &[(DateTime<Utc>, DateTime<Utc>)] {
        self.by_dev.get(developer).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn developers(&self) -> impl Iterator<Item = &str> {
        self.by_dev.keys().map(String::as_str)
    }

    pub fn to_list(&self) -> Vec<EliteInterval> {
        self.by_dev
            .iter()
            .flat_map(|(dev, spans)| {
                spans.iter().map(move |(s, e)| EliteInterval {
                    developer: dev.clone(),
                    start: *s,
                    end: *e,
                })
            })
            .collect()
    }

    pub fn from_list(list: Vec<EliteInterval>) -> Self {
        let mut by_dev: BTreeMap<String, Vec<(DateTime<Utc>, DateTime<Utc>)>> = BTreeMap::new();
        for iv in list {
            by_dev.entry(iv.developer).or_default().push((iv.start, iv.end));
        }
        for spans in by_dev.values_mut() {
            spans.sort();
        }
        EliteIntervals { by_dev }
    }

    /// Whether `developer` is elite at any instant of `[from, to)`.
    pub fn overlaps(&self, developer: &str, from: DateTime<Utc>, to: DateTime<Utc>) -> bool {
        self.of(developer).iter().any(|(s, e)| *s < to && from < *e)
    }

    /// Sets a developer's spans directly; spans must be sorted and disjoint.
    pub fn insert(&mut self, developer: &str, spans: Vec<(DateTime<Utc>, DateTime<Utc>)>) {
        self.by_dev.insert(developer.to_string(), spans);
    }
}

impl Serialize for EliteIntervals {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_list().serialize(s)
    }
}

impl<'de> Deserialize<'de> for EliteIntervals {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(EliteIntervals::from_list(Vec::deserialize(d)?))
    }
}

pub fn compute_elite_intervals(events: &[RawEvent], set: &WriteActionSet) -> Result<EliteIntervals, StatusError> {
    if let Some(i) = (1..events.len()).find(|&i| events[i].timestamp < events[i - 1].timestamp) {
        return Err(StatusError::Unsorted {
            index: i,
            id: events[i].event_id.clone(),
        });
    }
    let window = Duration::days(ELITE_WINDOW_DAYS);
    let mut by_dev: BTreeMap<String, Vec<(DateTime<Utc>, DateTime<Utc>)>> = BTreeMap::new();
    for e in events.iter().filter(|e| is_write_action(e, set)) {
        let spans = by_dev.entry(e.actor.clone()).or_default();
        let grant_end = e.timestamp + window;
        match spans.last_mut() {
            Some((_, end)) if e.timestamp <= *end => *end = (*end).max(grant_end),
            _ => spans.push((e.timestamp, grant_end)),
        }
    }
    Ok(EliteIntervals { by_dev })
}

pub fn status_at(developer: &str, t: DateTime<Utc>, intervals: &EliteIntervals) -> Status {
    let spans = intervals.of(developer);
    // First span starting after t; the candidate is the one before it.
    let idx = spans.partition_point(|(s, _)| *s <= t);
    if idx > 0 && t < spans[idx - 1].1 {
        Status::Elite
    } else {
        Status::NonElite
    }
}

/// Anything that can answer "what was this developer's status at t".
pub trait StatusLookup {
    fn status(&self, developer: &str, t: DateTime<Utc>) -> Status;
}

impl StatusLookup for EliteIntervals {
    fn status(&self, developer: &str, t: DateTime<Utc>) -> Status {
        status_at(developer, t, self)
    }
}

impl<F: Fn(&str, DateTime<Utc>) -> Status> StatusLookup for F {
    fn status(&self, developer: &str, t: DateTime<Utc>) -> Status {
        self(developer, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliteRatio {
    /// Per month; `None` for months without any never-elite active developer.
    pub monthly: Vec<Option<f64>>,
    /// Mean over defined months; `None` when every month is degenerate.
    pub mean: Option<f64>,
}

/// Ratio of developers elite at any point in a month to developers active in
/// that month (authored at least one event) but never elite during it.
pub fn elite_ratio(buckets: &MonthlyBuckets, intervals: &EliteIntervals) -> EliteRatio {
    let monthly: Vec<Option<f64>> = buckets
        .months
        .iter()
        .enumerate()
        .map(|(m, events)| {
            let (from, to) = buckets.span(m);
            let elites = intervals
                .developers()
                .filter(|d| intervals.overlaps(d, from, to))
                .count();
            let active: BTreeSet<&str> = events.iter().map(|e| e.actor.as_str()).collect();
            let non_elites = active
                .iter()
                .filter(|d| !intervals.overlaps(d, from, to))
                .count();
            (non_elites > 0).then(|| elites as f64 / non_elites as f64)
        })
        .collect();
    let defined: Vec<f64> = monthly.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    EliteRatio { monthly, mean }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{keys, ProjectMeta};
    use crate::timefmt;

    fn t0() -> DateTime<Utc> {
        timefmt::parse("2020-01-01T00:00:00Z").unwrap()
    }

    fn day(d: i64) -> DateTime<Utc> {
        t0() + Duration::days(d)
    }

    fn ev(kind: EventKind, actor: &str, d: i64) -> RawEvent {
        RawEvent::new(format!("{actor}-{d}"), kind, actor, day(d))
    }

    #[test]
    fn default_write_set_membership() {
        let set = WriteActionSet::default();
        assert!(is_write_action(&ev(EventKind::PRMerged, "rev", 0), &set));
        assert!(!is_write_action(&ev(EventKind::CommentCreated, "x", 0), &set));
        let self_close = ev(EventKind::IssueClosed, "rep", 0).with_field(keys::TARGET_AUTHOR, "rep");
        assert!(!is_write_action(&self_close, &set));
        let other_close = ev(EventKind::IssueClosed, "maint", 0).with_field(keys::TARGET_AUTHOR, "rep");
        assert!(is_write_action(&other_close, &set));
        let custom = WriteActionSet::from_names(["CommentCreated"]);
        assert!(is_write_action(&ev(EventKind::CommentCreated, "x", 0), &custom));
        assert!(!is_write_action(&ev(EventKind::PRMerged, "x", 0), &custom));
    }

    #[test]
    fn single_action_grants_ninety_days() {
        let iv = compute_elite_intervals(&[ev(EventKind::PRMerged, "a", 0)], &WriteActionSet::default()).unwrap();
        assert_eq!(iv.of("a"), &[(day(0), day(90))]);
    }

    #[test]
    fn renewal_extends_and_gap_splits() {
        let set = WriteActionSet::default();
        let iv = compute_elite_intervals(&[ev(EventKind::PRMerged, "a", 0), ev(EventKind::PRMerged, "a", 60)], &set).unwrap();
        assert_eq!(iv.of("a"), &[(day(0), day(150))]);
        let iv = compute_elite_intervals(&[ev(EventKind::PRMerged, "a", 0), ev(EventKind::PRMerged, "a", 200)], &set).unwrap();
        assert_eq!(iv.of("a"), &[(day(0), day(90)), (day(200), day(290))]);
        // Abutting grants merge.
        let iv = compute_elite_intervals(&[ev(EventKind::PRMerged, "a", 0), ev(EventKind::PRMerged, "a", 90)], &set).unwrap();
        assert_eq!(iv.of("a"), &[(day(0), day(180))]);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let err = compute_elite_intervals(
            &[ev(EventKind::PRMerged, "a", 5), ev(EventKind::PRMerged, "b", 1)],
            &WriteActionSet::default(),
        )
        .unwrap_err();
        assert_eq!(err, StatusError::Unsorted { index: 1, id: "b-1".into() });
    }

    #[test]
    fn status_boundaries() {
        let iv = compute_elite_intervals(&[ev(EventKind::PRMerged, "a", 10)], &WriteActionSet::default()).unwrap();
        assert_eq!(status_at("a", day(10), &iv), Status::Elite);
        assert_eq!(status_at("a", day(100), &iv), Status::NonElite);
        assert_eq!(status_at("a", day(9), &iv), Status::NonElite);
        assert_eq!(status_at("nobody", day(50), &iv), Status::NonElite);
    }

    #[test]
    fn intervals_json_shape() {
        let iv = compute_elite_intervals(&[ev(EventKind::PRMerged, "a", 0)], &WriteActionSet::default()).unwrap();
        let json = serde_json::to_string(&iv).unwrap();
        assert_eq!(json, r#"[{"login":"a","start":"2020-01-01T00:00:00Z","end":"2020-03-31T00:00:00Z"}]"#);
        let back: EliteIntervals = serde_json::from_str(&json).unwrap();
        assert_eq!(back, iv);
    }

    fn meta() -> ProjectMeta {
        ProjectMeta {
            name: "p".into(),
            created_at: t0(),
            sponsorship: Some(true),
            main_language: "C".into(),
            domain: "d".into(),
            validation: None,
        }
    }

    #[test]
    fn elite_ratio_counts_and_degenerate_months() {
        // Month 0: 2 elites, 8 non-elites. Month 1: 0 elites, 5 non-elites.
        // Month 2: 3 elites, no non-elites (excluded).
        let mut intervals = EliteIntervals::default();
        for e in ["e1", "e2"] {
            intervals.insert(e, vec![(day(0), day(20))]);
        }
        for e in ["f1", "f2", "f3"] {
            intervals.insert(e, vec![(day(62), day(70))]);
        }
        let mut events = Vec::new();
        for i in 0..8 {
            events.push(ev(EventKind::CommentCreated, &format!("n{i}"), 3));
        }
        events.push(ev(EventKind::CommentCreated, "e1", 4));
        for i in 0..5 {
            events.push(ev(EventKind::CommentCreated, &format!("m{i}"), 35));
        }
        events.push(ev(EventKind::PRMerged, "f1", 65));
        let buckets = crate::ingest::window_and_bucket(events, &meta());
        let r = elite_ratio(&buckets, &intervals);
        assert_eq!(r.monthly[0], Some(0.25));
        assert_eq!(r.monthly[1], Some(0.0));
        assert_eq!(r.monthly[2], None);
        assert_eq!(r.mean, Some(0.125));
    }

    #[test]
    fn elite_ratio_all_degenerate_is_missing() {
        let buckets = crate::ingest::window_and_bucket(Vec::new(), &meta());
        assert_eq!(elite_ratio(&buckets, &EliteIntervals::default()).mean, None);
    }
}
