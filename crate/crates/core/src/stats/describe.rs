use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::lexicon::{CATEGORIES, SUMMARY_NAMES};
use crate::metrics::{ProjectRecord, LSM_NAMES};

pub const KDE_POINTS: usize = 64;
pub const CORPUS_LABELS: [&str; 3] = ["cross", "within_elite", "within_nonelite"];

/// Type-7 sample quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin edges, one more than the number of bins.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kde {
    Curve { bandwidth: f64, x: Vec<f64>, density: Vec<f64> },
    /// All values equal: the density collapses onto one point.
    PointMass { at: f64 },
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub histogram: Histogram,
    pub kde: Kde,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 || xs.iter().all(|x| *x == xs[0]) {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn histogram(sorted: &[f64]) -> Histogram {
    if sorted.is_empty() {
        return Histogram { edges: vec![], counts: vec![] };
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return Histogram {
            edges: vec![lo, hi],
            counts: vec![sorted.len()],
        };
    }
    // Sturges
    let k = (sorted.len() as f64).log2().ceil() as usize + 1;
    let width = (hi - lo) / k as f64;
    let edges: Vec<f64> = (0..=k).map(|i| if i == k { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0; k];
    for &v in sorted {
        let b = (((v - lo) / width).floor() as usize).min(k - 1);
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

fn kde(sorted: &[f64], sd: f64) -> Kde {
    let n = sorted.len();
    if n == 0 {
        return Kde::Empty;
    }
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bandwidth = 0.9 * spread * (n as f64).powf(-0.2);
    if !(bandwidth > 0.0) {
        return Kde::PointMass { at: sorted[0] };
    }
    let lo = sorted[0] - 3.0 * bandwidth;
    let hi = sorted[n - 1] + 3.0 * bandwidth;
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let norm = 1.0 / (n as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let x: Vec<f64> = (0..KDE_POINTS).map(|i| lo + step * i as f64).collect();
    let density = x
        .iter()
        .map(|&g| norm * sorted.iter().map(|v| (-0.5 * ((g - v) / bandwidth).powi(2)).exp()).sum::<f64>())
        .collect();
    Kde::Curve { bandwidth, x, density }
}

pub fn summarize(name: &str, values: &[f64]) -> VariableSummary {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let (mean, sd) = mean_sd(&sorted);
    VariableSummary {
        name: name.to_string(),
        n: sorted.len(),
        mean,
        sd,
        min: sorted.first().copied().unwrap_or(f64::NAN),
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted.last().copied().unwrap_or(f64::NAN),
        histogram: histogram(&sorted),
        kde: kde(&sorted, sd),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Kruskal-Wallis H with the tie correction. Empty groups are ignored.
pub fn kruskal_wallis(groups: &[&[f64]]) -> KruskalWallis {
    let groups: Vec<&[f64]> = groups.iter().copied().filter(|g| !g.is_empty()).collect();
    let mut all: Vec<(f64, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, xs)| xs.iter().map(move |x| (*x, g)))
        .collect();
    let n = all.len();
    let df = groups.len().saturating_sub(1);
    let degenerate = KruskalWallis { h: 0.0, df, p_value: 1.0 };
    if df == 0 || n < 2 {
        return degenerate;
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sums = vec![0.0; groups.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for item in &all[i..=j] {
            rank_sums[item.1] += avg;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return degenerate;
    }
    let raw: f64 = 12.0 / (nf * (nf + 1.0))
        * rank_sums.iter().zip(&groups).map(|(r, g)| r * r / g.len() as f64).sum::<f64>()
        - 3.0 * (nf + 1.0);
    let h = (raw / correction).max(0.0);
    let p_value = ChiSquared::new(df as f64).map_or(f64::NAN, |d| d.sf(h));
    KruskalWallis { h, df, p_value }
}

/// Raw category values (8 function-word percentages then 4 summary scores)
/// of one project's three corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusProfiles {
    pub project: String,
    pub cross: Option<[f64; 12]>,
    pub within_elite: Option<[f64; 12]>,
    pub within_nonelite: Option<[f64; 12]>,
}

impl CorpusProfiles {
    fn get(&self, g: usize) -> Option<&[f64; 12]> {
        match g {
            0 => self.cross.as_ref(),
            1 => self.within_elite.as_ref(),
            _ => self.within_nonelite.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusComparison {
    pub category: String,
    /// Per corpus, in [`CORPUS_LABELS`] order.
    pub summaries: Vec<VariableSummary>,
    pub test: KruskalWallis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsmDescription {
    pub variables: Vec<VariableSummary>,
    pub corpora: Vec<CorpusComparison>,
}

/// Summaries of the 13 LSM columns over records that have them, and the
/// comparison of raw category values across the three corpora.
pub fn describe_lsm(records: &[ProjectRecord], profiles: &[CorpusProfiles]) -> LsmDescription {
    let variables = LSM_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values: Vec<f64> = records.iter().filter_map(|r| r.lsm.map(|l| l[k])).collect();
            summarize(name, &values)
        })
        .collect();
    let names = CATEGORIES.iter().chain(SUMMARY_NAMES.iter());
    let corpora = names
        .enumerate()
        .map(|(c, name)| {
            let groups: Vec<Vec<f64>> = (0..3)
                .map(|g| profiles.iter().filter_map(|p| p.get(g).map(|v| v[c])).collect())
                .collect();
            let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
            CorpusComparison {
                category: name.to_string(),
                summaries: groups.iter().zip(CORPUS_LABELS).map(|(g, l)| summarize(l, g)).collect(),
                test: kruskal_wallis(&refs),
            }
        })
        .collect();
    LsmDescription { variables, corpora }
}
