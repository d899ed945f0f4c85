use std::collections::HashSet;

use super::{EventKind, RawEvent, TargetRef};

type DupKey<'a> = (&'a EventKind, &'a str, i64, Option<&'a TargetRef>);

/// Keeps the first event of every duplicate group, preserving order. Two
/// events are duplicates when they share a source id or the
/// `(kind, actor, timestamp, target)` key. Candidates are compared against
/// retained events only, so the operation is idempotent.
pub fn dedup_events(events: Vec<RawEvent>) -> Vec<RawEvent> {
    let mut keep = vec![false; events.len()];
    {
        let mut ids: HashSet<&str> = HashSet::with_capacity(events.len());
        let mut dup_keys: HashSet<DupKey<'_>> = HashSet::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            let key = (&e.kind, e.actor.as_str(), e.timestamp.timestamp(), e.target.as_ref());
            if ids.contains(e.event_id.as_str()) || dup_keys.contains(&key) {
                continue;
            }
            ids.insert(&e.event_id);
            dup_keys.insert(key);
            keep[i] = true;
        }
    }
    events
        .into_iter()
        .zip(keep)
        .filter_map(|(e, k)| k.then_some(e))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ThreadKind;
    use crate::timefmt;
    use chrono::Duration;
    use proptest::prelude::*;

    fn ev(id: &str, actor: &str, secs: i64) -> RawEvent {
        let t0 = timefmt::parse("2020-01-01T00:00:00Z").unwrap();
        RawEvent::new(id, EventKind::CommentCreated, actor, t0 + Duration::seconds(secs))
            .with_target(TargetRef::new(ThreadKind::Issue, "1"))
    }

    #[test]
    fn same_event_from_two_sources_collapses() {
        let archive = ev("884412", "bob", 10);
        let api = ev("comment/55", "bob", 10);
        let out = dedup_events(vec![archive.clone(), api]);
        assert_eq!(out, vec![archive]);
    }

    #[test]
    fn unique_sequence_is_unchanged() {
        let input = vec![ev("1", "a", 0), ev("2", "b", 0), ev("3", "a", 5)];
        assert_eq!(dedup_events(input.clone()), input);
    }

    #[test]
    fn one_second_apart_are_both_kept() {
        let input = vec![ev("1", "a", 0), ev("2", "a", 1)];
        // Oracle: brute-force pairwise comparison of the duplicate key.
        let dup = |x: &RawEvent, y: &RawEvent| {
            x.event_id == y.event_id
                || (x.kind == y.kind && x.actor == y.actor && x.timestamp == y.timestamp && x.target == y.target)
        };
        assert!(!dup(&input[0], &input[1]));
        assert_eq!(dedup_events(input.clone()).len(), 2);
    }

    #[test]
    fn shared_id_collapses() {
        let out = dedup_events(vec![ev("x", "a", 0), ev("x", "b", 9)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].actor, "a");
    }

    proptest! {
        #[test]
        fn dedup_is_idempotent(spec in proptest::collection::vec((0u8..5, 0u8..3, 0i64..4), 0..40)) {
            let events: Vec<RawEvent> = spec
                .iter()
                .map(|(id, actor, t)| ev(&format!("e{id}"), &format!("dev{actor}"), *t))
                .collect();
            let once = dedup_events(events.clone());
            prop_assert!(once.len() <= events.len());
            let twice = dedup_events(once.clone());
            prop_assert_eq!(once, twice);
        }
    }
}
