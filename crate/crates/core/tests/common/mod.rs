//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use chrono::{DateTime, Duration, Utc};

/// Per-category LSM written straight from the definition.
pub fn lsm_naive(a: f64, b: f64) -> f64 {
    1.0 - (a - b).abs() / (a + b + 0.0001)
}

/// Elite at `t` when some write action happened in the 90 days up to `t`.
pub fn elite_brute(writes: &[DateTime<Utc>], t: DateTime<Utc>) -> bool {
    writes.iter().any(|w| *w <= t && t < *w + Duration::days(90))
}

/// Cross-status filter over bitmask-encoded threads.
///
/// `authors[i]` is a participant index, `mentions[i]` a bitmask of mentioned
/// participants, `elite` a bitmask of elite participants. Returns kept message
/// indexes with their elite flag.
pub fn filter_oracle(authors: &[usize], mentions: &[u8], elite: u8) -> Option<Vec<(usize, bool)>> {
    let mut kept = Vec::new();
    filter_oracle_into(authors, mentions, elite, &mut kept).then_some(kept)
}

/// As [`filter_oracle`], writing into `kept`; returns false for `None`.
pub fn filter_oracle_into(authors: &[usize], mentions: &[u8], elite: u8, kept: &mut Vec<(usize, bool)>) -> bool {
    kept.clear();
    let is_elite = |p: usize| elite & (1 << p) != 0;
    let first = is_elite(authors[0]);
    if authors.iter().all(|&a| is_elite(a) == first) {
        return false;
    }
    for i in 0..authors.len() {
        let me = is_elite(authors[i]);
        if i > 0 {
            let mut parent = i - 1;
            for j in (0..i).rev() {
                let a = authors[j];
                if a != authors[i] && mentions[i] & (1 << a) != 0 {
                    parent = j;
                    break;
                }
            }
            let crosses = is_elite(authors[parent]) != me;
            let mention_other = (0..3).any(|p| mentions[i] & (1 << p) != 0 && is_elite(p) != me);
            if !crosses && !mention_other {
                continue;
            }
        }
        kept.push((i, me));
    }
    let elites = kept.iter().filter(|k| k.1).count();
    elites != 0 && elites != kept.len()
}

/// Least squares through the normal equations, solved by Gaussian
/// elimination with partial pivoting. `cols` is column-major.
pub fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = cols.len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = cols[i].iter().zip(&cols[j]).map(|(u, v)| u * v).sum();
        }
        a[i][p] = cols[i].iter().zip(y).map(|(u, v)| u * v).sum();
    }
    for k in 0..p {
        let piv = (k..p).max_by(|&r, &s| a[r][k].abs().total_cmp(&a[s][k].abs())).unwrap();
        a.swap(k, piv);
        for r in k + 1..p {
            let f = a[r][k] / a[k][k];
            for c in k..=p {
                a[r][c] -= f * a[k][c];
            }
        }
    }
    let mut b = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|c| a[k][c] * b[c]).sum();
        b[k] = (a[k][p] - s) / a[k][k];
    }
    b
}

/// Start of month `m` after `created`, with day-of-month clamping, computed
/// with a separate calendar library.
pub fn month_start(created: DateTime<Utc>, m: i64) -> DateTime<Utc> {
    let ts = jiff::Timestamp::from_second(created.timestamp()).unwrap();
    let z = ts.to_zoned(jiff::tz::TimeZone::UTC);
    let shifted = z.checked_add(jiff::Span::new().months(m)).unwrap();
    DateTime::from_timestamp(shifted.timestamp().as_second(), 0).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveOutcomes {
    pub commits: usize,
    pub new_c: f64,
    pub new_b: f64,
    pub bfr: Option<f64>,
    pub bct: Option<f64>,
    pub bfr_months: usize,
    pub bct_months: usize,
}

/// Month-by-month recount over raw commit times and (opened, closed) bugs.
pub fn recount(created: DateTime<Utc>, commits: &[DateTime<Utc>], bugs: &[(DateTime<Utc>, Option<DateTime<Utc>>)]) -> NaiveOutcomes {
    let mut total_commits = 0;
    let mut opened_total = 0;
    let mut ratios = Vec::new();
    let mut cycles = Vec::new();
    for m in 0..36 {
        let (lo, hi) = (month_start(created, m), month_start(created, m + 1));
        let inside = |t: &DateTime<Utc>| lo <= *t && *t < hi;
        total_commits += commits.iter().filter(|t| inside(t)).count();
        let opened = bugs.iter().filter(|b| inside(&b.0)).count();
        opened_total += opened;
        let closed: Vec<f64> = bugs
            .iter()
            .filter_map(|(o, c)| c.filter(|c| inside(c)).map(|c| (c - *o).num_seconds() as f64 / 86_400.0))
            .collect();
        if opened > 0 {
            ratios.push(closed.len() as f64 / opened as f64);
        }
        if !closed.is_empty() {
            cycles.push(closed.iter().sum::<f64>() / closed.len() as f64);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    NaiveOutcomes {
        commits: total_commits,
        new_c: total_commits as f64 / 36.0,
        new_b: opened_total as f64 / 36.0,
        bfr: mean(&ratios),
        bct: mean(&cycles),
        bfr_months: ratios.len(),
        bct_months: cycles.len(),
    }
}
