use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::linalg::Qr;
use super::StatsError;
use crate::metrics::{ProjectRecord, LSM_NAMES};

pub const INTERCEPT: &str = "intercept";
pub const CONTROL_NAMES: [&str; 4] = ["elite_ratio", "project_size", "sponsorship", "avg_experience"];

/// Regression design: an intercept column followed by the predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub columns: Vec<String>,
    /// Column-major: `data[j][i]` is row `i` of column `j`.
    pub data: Vec<Vec<f64>>,
    /// Project id per row.
    pub rows: Vec<String>,
    /// Number of predictors (columns minus the intercept).
    pub m: usize,
}

impl DesignMatrix {
    pub fn new(columns: Vec<String>, data: Vec<Vec<f64>>, rows: Vec<String>) -> Result<Self, StatsError> {
        if columns.len() != data.len() {
            return Err(StatsError::Shape(format!("{} names for {} columns", columns.len(), data.len())));
        }
        for (name, col) in columns.iter().zip(&data) {
            if col.len() != rows.len() {
                return Err(StatsError::Shape(format!("column `{name}` has {} rows, expected {}", col.len(), rows.len())));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(StatsError::Shape(format!("column `{name}` has missing or non-finite cells")));
            }
        }
        let m = columns.len().saturating_sub(1);
        Ok(DesignMatrix { columns, data, rows, m })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|j| self.data[j].as_slice())
    }

    pub fn with_column(&self, name: &str, values: Vec<f64>) -> Result<Self, StatsError> {
        let mut columns = self.columns.clone();
        let mut data = self.data.clone();
        columns.push(name.to_string());
        data.push(values);
        DesignMatrix::new(columns, data, self.rows.clone())
    }

    pub fn without_column(&self, name: &str) -> Self {
        let keep: Vec<usize> = (0..self.p()).filter(|&j| self.columns[j] != name).collect();
        DesignMatrix {
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            data: keep.iter().map(|&j| self.data[j].clone()).collect(),
            rows: self.rows.clone(),
            m: keep.len().saturating_sub(1),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        DesignMatrix {
            columns: self.columns.clone(),
            data: self.data.iter().map(|c| idx.iter().map(|&i| c[i]).collect()).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            m: self.m,
        }
    }

    /// Earlier columns that column `j` is a combination of.
    pub(crate) fn dependencies_of(&self, j: usize) -> Vec<String> {
        if j == 0 {
            return Vec::new();
        }
        let Ok(qr) = Qr::new(&self.data[..j]) else {
            return Vec::new();
        };
        let target = &self.data[j];
        let coef = qr.solve(target);
        let tnorm = target.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        (0..j)
            .filter(|&k| {
                let cnorm = self.data[k].iter().map(|v| v * v).sum::<f64>().sqrt();
                (coef[k] * cnorm).abs() > 1e-8 * tnorm
            })
            .map(|k| self.columns[k].clone())
            .collect()
    }
}

/// k-1 indicator columns for a k-level categorical variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummyColumns {
    pub variable: String,
    pub reference: Option<String>,
    /// Non-reference levels, one per column, in column order.
    pub levels: Vec<String>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub warning: Option<String>,
}

fn level_order(values: &[String]) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v.as_str()).or_default() += 1;
    }
    let mut levels: Vec<(&str, usize)> = counts.into_iter().collect();
    levels.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    levels.into_iter().map(|(l, _)| l.to_string()).collect()
}

/// Most frequent level is the reference (ties: lexicographically first);
/// remaining levels follow by frequency, then name.
pub fn dummy_encode(values: &[String], variable: &str) -> DummyColumns {
    let order = level_order(values);
    let reference = order.first().cloned();
    encode_with(values, variable, reference, order)
}

/// Same as [`dummy_encode`] with an explicit reference level.
pub fn dummy_encode_with_reference(values: &[String], variable: &str, reference: &str) -> DummyColumns {
    let order = level_order(values);
    encode_with(values, variable, Some(reference.to_string()), order)
}

fn encode_with(values: &[String], variable: &str, reference: Option<String>, order: Vec<String>) -> DummyColumns {
    let levels: Vec<String> = order.into_iter().filter(|l| Some(l) != reference.as_ref()).collect();
    let warning = (levels.is_empty()).then(|| {
        format!("`{variable}` has a single category; no indicator columns")
    });
    let columns = levels
        .iter()
        .map(|l| values.iter().map(|v| if v == l { 1.0 } else { 0.0 }).collect())
        .collect();
    DummyColumns {
        variable: variable.to_string(),
        names: levels.iter().map(|l| format!("{variable}[{l}]")).collect(),
        reference,
        levels,
        columns,
        warning,
    }
}

/// A 0/1 column with `false` as the reference, or nothing if only one value
/// occurs.
pub fn binary_encode(values: &[bool], variable: &str) -> DummyColumns {
    let has_true = values.iter().any(|v| *v);
    let has_false = values.iter().any(|v| !*v);
    if has_true && has_false {
        DummyColumns {
            variable: variable.to_string(),
            reference: Some("false".into()),
            levels: vec!["true".into()],
            names: vec![variable.to_string()],
            columns: vec![values.iter().map(|v| if *v { 1.0 } else { 0.0 }).collect()],
            warning: None,
        }
    } else {
        DummyColumns {
            variable: variable.to_string(),
            reference: values.first().map(|v| v.to_string()),
            levels: Vec::new(),
            names: Vec::new(),
            columns: Vec::new(),
            warning: Some(format!("`{variable}` has a single category; no indicator columns")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignInfo {
    pub encodings: Vec<DummyColumns>,
    pub warnings: Vec<String>,
}

/// Intercept, the chosen LSM columns (by index 0..=12), then the controls.
/// Records must all be usable (no missing cells in the used fields).
pub fn build_design(records: &[&ProjectRecord], lsm_idx: &[usize]) -> Result<(DesignMatrix, DesignInfo), StatsError> {
    let n = records.len();
    let mut names = vec![INTERCEPT.to_string()];
    let mut data = vec![vec![1.0; n]];
    for &k in lsm_idx {
        names.push(LSM_NAMES[k].to_string());
        data.push(
            records
                .iter()
                .map(|r| r.lsm.map_or(f64::NAN, |l| l[k]))
                .collect(),
        );
    }
    let controls: Vec<Option<[f64; 4]>> = records.iter().map(|r| r.numeric_controls()).collect();
    for (c, name) in CONTROL_NAMES.iter().enumerate() {
        if *name == "sponsorship" {
            continue;
        }
        names.push(name.to_string());
        data.push(controls.iter().map(|v| v.map_or(f64::NAN, |a| a[c])).collect());
    }
    let sponsorship = binary_encode(
        &records.iter().map(|r| r.sponsorship.unwrap_or(false)).collect::<Vec<_>>(),
        "sponsorship",
    );
    let language = dummy_encode(
        &records.iter().map(|r| r.main_language.clone()).collect::<Vec<_>>(),
        "main_language",
    );
    let domain = dummy_encode(&records.iter().map(|r| r.domain.clone()).collect::<Vec<_>>(), "domain");
    let mut warnings = Vec::new();
    for enc in [&sponsorship, &language, &domain] {
        names.extend(enc.names.iter().cloned());
        data.extend(enc.columns.iter().cloned());
        if let Some(w) = &enc.warning {
            log::warn!("{w}");
            warnings.push(w.clone());
        }
    }
    let rows = records.iter().map(|r| r.project.clone()).collect();
    let x = DesignMatrix::new(names, data, rows)?;
    Ok((
        x,
        DesignInfo {
            encodings: vec![sponsorship, language, domain],
            warnings,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(spec: &[(&str, usize)]) -> Vec<String> {
        spec.iter().flat_map(|(s, k)| std::iter::repeat_n(s.to_string(), *k)).collect()
    }

    #[test]
    fn frequency_reference() {
        let d = dummy_encode(&strings(&[("Go", 3), ("C", 2), ("Rust", 5)]), "lang");
        assert_eq!(d.reference.as_deref(), Some("Rust"));
        assert_eq!(d.levels, ["Go", "C"]);
        assert_eq!(d.columns.len(), 2);
        assert_eq!(d.columns[0].iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn ties_break_lexicographically() {
        let d = dummy_encode(&strings(&[("b", 2), ("a", 2), ("c", 1)]), "x");
        assert_eq!(d.reference.as_deref(), Some("a"));
        assert_eq!(d.levels, ["b", "c"]);
    }

    #[test]
    fn binary_and_degenerate() {
        let b = binary_encode(&[true, false, false], "sponsorship");
        assert_eq!(b.columns, vec![vec![1.0, 0.0, 0.0]]);
        assert_eq!(b.reference.as_deref(), Some("false"));
        let d = dummy_encode(&strings(&[("web", 4)]), "domain");
        assert!(d.columns.is_empty());
        assert!(d.warning.is_some());
    }
}
