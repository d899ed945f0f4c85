use chrono::{DateTime, Months, Utc};

use super::{ProjectMeta, RawEvent};

pub const WINDOW_MONTHS: usize = 36;

/// Events of the first 36 calendar months after project creation, one bucket
/// per month. `boundaries[m]..boundaries[m + 1]` is the half-open span of
/// month `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyBuckets {
    pub created_at: DateTime<Utc>,
    pub boundaries: Vec<DateTime<Utc>>,
    pub months: Vec<Vec<RawEvent>>,
}

fn add_months(t: DateTime<Utc>, m: u32) -> DateTime<Utc> {
    t.checked_add_months(Months::new(m))
        .expect("month arithmetic within the supported date range")
}

impl MonthlyBuckets {
    pub fn empty(created_at: DateTime<Utc>) -> Self {
        MonthlyBuckets {
            created_at,
            boundaries: (0..=WINDOW_MONTHS as u32).map(|m| add_months(created_at, m)).collect(),
            months: vec![Vec::new(); WINDOW_MONTHS],
        }
    }

    pub fn window_end(&self) -> DateTime<Utc> {
        self.boundaries[WINDOW_MONTHS]
    }

    /// Month index of `t`, or `None` outside the window.
    pub fn month_of(&self, t: DateTime<Utc>) -> Option<usize> {
        if t < self.created_at || t >= self.window_end() {
            return None;
        }
        // partition_point gives the first boundary > t.
        Some(self.boundaries.partition_point(|b| *b <= t) - 1)
    }

    pub fn span(&self, month: usize) -> (DateTime<Utc>, DateTime<Utc>) {
        (self.boundaries[month], self.boundaries[month + 1])
    }

    /// All retained events in month order.
    pub fn events(&self) -> impl Iterator<Item = &RawEvent> {
        self.months.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.months.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Keeps events with `created_at <= t < created_at + 36 months` and buckets
/// them by whole calendar months elapsed since creation.
pub fn window_and_bucket(events: impl IntoIterator<Item = RawEvent>, meta: &ProjectMeta) -> MonthlyBuckets {
    let mut buckets = MonthlyBuckets::empty(meta.created_at);
    for e in events {
        if let Some(m) = buckets.month_of(e.timestamp) {
            buckets.months[m].push(e);
        }
    }
    buckets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::EventKind;
    use crate::timefmt;
    use chrono::Duration;

    fn meta(created: &str) -> ProjectMeta {
        ProjectMeta {
            name: "p".into(),
            created_at: timefmt::parse(created).unwrap(),
            sponsorship: Some(false),
            main_language: "Rust".into(),
            domain: "tools".into(),
            validation: None,
        }
    }

    fn at(t: DateTime<Utc>) -> RawEvent {
        RawEvent::new("e", EventKind::Commit, "a", t)
    }

    /// Whole calendar months between two instants, computed with jiff.
    fn jiff_months(from: DateTime<Utc>, to: DateTime<Utc>) -> i64 {
        let zone = jiff::tz::TimeZone::UTC;
        let a = jiff::Timestamp::from_second(from.timestamp()).unwrap().to_zoned(zone.clone());
        let b = jiff::Timestamp::from_second(to.timestamp()).unwrap().to_zoned(zone);
        let mut m = 0;
        while a.checked_add(jiff::Span::new().months(m + 1)).unwrap() <= b {
            m += 1;
        }
        m
    }

    #[test]
    fn creation_instant_is_bucket_zero_and_end_is_excluded() {
        let m = meta("2017-03-15T08:00:00Z");
        let start = m.created_at;
        let end = add_months(start, 36);
        let b = window_and_bucket(vec![at(start), at(end), at(start - Duration::seconds(1))], &m);
        assert_eq!(b.months[0].len(), 1);
        assert_eq!(b.len(), 1);
        assert_eq!(b.months.len(), WINDOW_MONTHS);
    }

    #[test]
    fn day_offsets_map_to_expected_buckets() {
        for created in ["2017-03-15T08:00:00Z", "2018-01-31T00:00:00Z", "2019-12-01T23:59:59Z"] {
            let m = meta(created);
            let offsets = [10, 45, 800];
            let events: Vec<_> = offsets.iter().map(|d| at(m.created_at + Duration::days(*d))).collect();
            let b = window_and_bucket(events.clone(), &m);
            for e in &events {
                let expected = jiff_months(m.created_at, e.timestamp) as usize;
                assert_eq!(b.month_of(e.timestamp), Some(expected), "created {created}");
            }
            assert_eq!(
                offsets.map(|d| b.month_of(m.created_at + Duration::days(d)).unwrap()),
                [0, 1, 26]
            );
        }
    }

    #[test]
    fn every_retained_event_lands_in_exactly_one_bucket() {
        let m = meta("2016-02-29T12:00:00Z");
        let events: Vec<_> = (0..1200).step_by(7).map(|d| at(m.created_at + Duration::days(d))).collect();
        let b = window_and_bucket(events.clone(), &m);
        let retained = events.iter().filter(|e| e.timestamp < b.window_end()).count();
        assert_eq!(b.len(), retained);
        for (i, month) in b.months.iter().enumerate() {
            let (lo, hi) = b.span(i);
            assert!(month.iter().all(|e| lo <= e.timestamp && e.timestamp < hi));
            assert_eq!(jiff_months(m.created_at, lo), i as i64);
        }
    }
}
