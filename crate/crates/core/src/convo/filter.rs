use serde::{Deserialize, Serialize};

use super::{ConversationThread, Side};
use crate::status::{Status, StatusLookup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admitted {
    /// Position in `thread.messages`.
    pub index: usize,
    pub side: Side,
}

/// Keeps the cross-status part of a thread.
///
/// Each reply answers the previous message, or, when it @-mentions earlier
/// participants other than its author, the latest message of whichever of them
/// spoke last. A reply whose author shares the status of the message it
/// answers is removed, unless it mentions someone whose status at that moment
/// differs from the author's. The initiator is always kept. Labels use each
/// author's status at their own message time.
///
/// Returns `None` for threads where every message comes from one status.
pub fn filter_cross_status<L: StatusLookup + ?Sized>(thread: &ConversationThread, lookup: &L) -> Option<Vec<Admitted>> {
    let msgs = &thread.messages;
    let status: Vec<Status> = msgs.iter().map(|m| lookup.status(&m.author, m.timestamp)).collect();
    if status.iter().all(|s| *s == status[0]) {
        return None;
    }
    // Latest message index per author; threads have few participants.
    let mut latest: Vec<(&str, usize)> = Vec::new();
    let mut admitted = Vec::new();
    for (i, m) in msgs.iter().enumerate() {
        let keep = if i == 0 {
            true
        } else {
            let parent = m
                .mentions
                .iter()
                .filter(|d| d.as_str() != m.author)
                .filter_map(|d| latest.iter().find(|(a, _)| *a == d.as_str()).map(|(_, j)| *j))
                .max()
                .unwrap_or(i - 1);
            status[parent] != status[i]
                || m.mentions.iter().any(|d| lookup.status(d, m.timestamp) != status[i])
        };
        if keep {
            admitted.push(Admitted {
                index: i,
                side: status[i].into(),
            });
        }
        match latest.iter_mut().find(|(a, _)| *a == m.author.as_str()) {
            Some(slot) => slot.1 = i,
            None => latest.push((m.author.as_str(), i)),
        }
    }
    let has = |s: Side| admitted.iter().any(|a| a.side == s);
    (has(Side::Elite) && has(Side::NonElite)).then_some(admitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convo::Message;
    use crate::ingest::{TargetRef, ThreadKind};
    use chrono::{DateTime, Duration, Utc};
    use std::collections::BTreeSet;

    fn thread(spec: &[(&str, &[&str])]) -> ConversationThread {
        let id = TargetRef::new(ThreadKind::Issue, "1");
        let t0 = DateTime::<Utc>::UNIX_EPOCH;
        ConversationThread {
            id: id.clone(),
            kind: ThreadKind::Issue,
            messages: spec
                .iter()
                .enumerate()
                .map(|(i, (a, ms))| Message {
                    id: format!("m{i}"),
                    author: a.to_string(),
                    timestamp: t0 + Duration::hours(i as i64),
                    body: String::new(),
                    mentions: ms.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
                    unresolved_mentions: BTreeSet::new(),
                    thread: id.clone(),
                    is_initiator: i == 0,
                })
                .collect(),
        }
    }

    fn elites(names: &'static [&'static str]) -> impl Fn(&str, DateTime<Utc>) -> Status {
        move |d: &str, _| if names.contains(&d) { Status::Elite } else { Status::NonElite }
    }

    #[test]
    fn core_rule() {
        let th = thread(&[("nina", &[]), ("eve", &[])]);
        let got = filter_cross_status(&th, &elites(&["eve"])).unwrap();
        assert_eq!(
            got,
            [Admitted { index: 0, side: Side::NonElite }, Admitted { index: 1, side: Side::Elite }]
        );
    }

    #[test]
    fn same_status_reply_removed_unless_mentioning_other_status() {
        let look = elites(&["bob"]);
        let th = thread(&[("nina", &[]), ("nick", &[]), ("bob", &[])]);
        let got = filter_cross_status(&th, &look).unwrap();
        assert_eq!(got.iter().map(|a| a.index).collect::<Vec<_>>(), [0, 2]);
        let th = thread(&[("nina", &[]), ("nick", &["bob"]), ("bob", &[])]);
        let got = filter_cross_status(&th, &look).unwrap();
        assert_eq!(got.iter().map(|a| a.index).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn single_status_is_none() {
        let th = thread(&[("nina", &[]), ("nick", &[])]);
        assert!(filter_cross_status(&th, &elites(&[])).is_none());
    }

    #[test]
    fn mention_reroutes_parent() {
        // eve (elite) replies to nina, then nick (non-elite) mentions nina:
        // his parent is nina's message, so he is removed.
        let th = thread(&[("nina", &[]), ("eve", &[]), ("nick", &["nina"])]);
        let got = filter_cross_status(&th, &elites(&["eve"])).unwrap();
        assert_eq!(got.iter().map(|a| a.index).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn status_change_splits_sides() {
        let t0 = DateTime::<Utc>::UNIX_EPOCH;
        let look = move |d: &str, t: DateTime<Utc>| {
            if d == "ana" && t >= t0 + Duration::hours(2) {
                Status::Elite
            } else {
                Status::NonElite
            }
        };
        let th = thread(&[("ana", &[]), ("ned", &[]), ("ana", &[])]);
        let got = filter_cross_status(&th, &look).unwrap();
        assert_eq!(
            got,
            [Admitted { index: 0, side: Side::NonElite }, Admitted { index: 2, side: Side::Elite }]
        );
    }
}
