use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::ingest::{MonthlyBuckets, ProjectMeta, Roster};
use crate::status::{elite_ratio, EliteIntervals};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    /// Mean monthly ratio of elites to never-elite actives; `None` if no month
    /// had a non-elite active developer.
    pub elite_ratio: Option<f64>,
    /// Mean monthly count of distinct active developers.
    pub project_size: f64,
    pub sponsorship: bool,
    /// Mean account age in days at project creation, over contributors with a
    /// known account date; accounts created later count as 0.
    pub avg_experience: Option<f64>,
    pub main_language: String,
    pub domain: String,
}

pub fn compute_controls(
    buckets: &MonthlyBuckets,
    intervals: &EliteIntervals,
    meta: &ProjectMeta,
    roster: &Roster,
) -> Result<ControlSet, MetricsError> {
    let sponsorship = meta
        .sponsorship
        .ok_or_else(|| MetricsError::MissingSponsorship(meta.name.clone()))?;
    let sizes: Vec<usize> = buckets
        .months
        .iter()
        .map(|m| m.iter().map(|e| e.actor.as_str()).collect::<BTreeSet<_>>().len())
        .collect();
    let project_size = if sizes.is_empty() {
        0.0
    } else {
        sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
    };
    let contributors: BTreeSet<&str> = buckets.events().map(|e| e.actor.as_str()).collect();
    let ages: Vec<f64> = contributors
        .iter()
        .filter_map(|c| roster.developers.get(*c)?.account_created_at)
        .map(|created| ((meta.created_at - created).num_seconds() as f64 / 86_400.0).max(0.0))
        .collect();
    let avg_experience = (!ages.is_empty()).then(|| ages.iter().sum::<f64>() / ages.len() as f64);
    Ok(ControlSet {
        elite_ratio: elite_ratio(buckets, intervals).mean,
        project_size,
        sponsorship,
        avg_experience,
        main_language: meta.main_language.clone(),
        domain: meta.domain.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{window_and_bucket, EventKind, RawEvent};
    use crate::timefmt;
    use chrono::{DateTime, Duration, Utc};
    use std::collections::BTreeMap;

    fn t0() -> DateTime<Utc> {
        timefmt::parse("2018-01-01T00:00:00Z").unwrap()
    }

    fn meta(sponsorship: Option<bool>) -> ProjectMeta {
        ProjectMeta {
            name: "p".into(),
            created_at: t0(),
            sponsorship,
            main_language: "Rust".into(),
            domain: "tools".into(),
            validation: None,
        }
    }

    #[test]
    fn experience_and_size() {
        let b0 = window_and_bucket(Vec::new(), &meta(Some(true)));
        let mut events = Vec::new();
        for m in 0..36 {
            for d in 0..10 {
                events.push(RawEvent::new(format!("{m}-{d}"), EventKind::CommentCreated, format!("d{d}"), b0.span(m).0));
            }
        }
        let buckets = window_and_bucket(events.clone(), &meta(Some(true)));
        let accounts = BTreeMap::from([
            ("d0".to_string(), t0() - Duration::days(100)),
            ("d1".to_string(), t0() - Duration::days(300)),
        ]);
        let roster = Roster::build(&events, None, &accounts);
        let c = compute_controls(&buckets, &EliteIntervals::default(), &meta(Some(true)), &roster).unwrap();
        assert_eq!(c.project_size, 10.0);
        assert_eq!(c.avg_experience, Some(200.0));
        assert_eq!(c.elite_ratio, Some(0.0));
        assert!(c.sponsorship);
    }

    #[test]
    fn sponsorship_required_and_missing_experience() {
        let buckets = window_and_bucket(Vec::new(), &meta(None));
        let err = compute_controls(&buckets, &EliteIntervals::default(), &meta(None), &Roster::default());
        assert!(matches!(err, Err(MetricsError::MissingSponsorship(_))));
        let c = compute_controls(&buckets, &EliteIntervals::default(), &meta(Some(false)), &Roster::default()).unwrap();
        assert_eq!(c.avg_experience, None);
        assert_eq!(c.elite_ratio, None);
    }
}
