use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ControlSet, LsmUndefined, LsmVector, OutcomeSet, LSM_NAMES};

pub const OUTCOME_NAMES: [&str; 4] = ["new_c", "bct", "new_b", "bfr"];

pub const CSV_HEADER: [&str; 24] = [
    "project", "new_c", "bct", "new_b", "bfr", "lsm0", "lsm1", "lsm2", "lsm3", "lsm4", "lsm5", "lsm6", "lsm7", "lsm8",
    "lsm9", "lsm10", "lsm11", "lsm12", "control1", "control2", "control3", "control4", "control5", "control6",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flag {
    /// A cross corpus fell below the word minimum.
    LsmUndefined,
    BctMissing,
    BfrMissing,
    EliteRatioMissing,
    ExperienceMissing,
    /// Processing failed; the message is kept in the manifest.
    Failed,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::LsmUndefined => "lsm-undefined",
            Flag::BctMissing => "bct-missing",
            Flag::BfrMissing => "bfr-missing",
            Flag::EliteRatioMissing => "elite-ratio-missing",
            Flag::ExperienceMissing => "experience-missing",
            Flag::Failed => "failed",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Flag::LsmUndefined,
            Flag::BctMissing,
            Flag::BfrMissing,
            Flag::EliteRatioMissing,
            Flag::ExperienceMissing,
            Flag::Failed,
        ]
        .into_iter()
        .find(|f| f.as_str() == s)
        .ok_or_else(|| format!("unknown flag `{s}`"))
    }
}

impl Serialize for Flag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Flag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One analysis row: four outcomes, thirteen LSM values, six controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub project: String,
    pub new_c: Option<f64>,
    pub bct: Option<f64>,
    pub new_b: Option<f64>,
    pub bfr: Option<f64>,
    pub lsm: Option<[f64; 13]>,
    pub elite_ratio: Option<f64>,
    pub project_size: Option<f64>,
    pub sponsorship: Option<bool>,
    pub avg_experience: Option<f64>,
    pub main_language: String,
    pub domain: String,
    pub flags: BTreeSet<Flag>,
}

impl ProjectRecord {
    /// A row carrying only the project id and the failure flag.
    pub fn failed(project: &str) -> Self {
        ProjectRecord {
            project: project.to_string(),
            new_c: None,
            bct: None,
            new_b: None,
            bfr: None,
            lsm: None,
            elite_ratio: None,
            project_size: None,
            sponsorship: None,
            avg_experience: None,
            main_language: String::new(),
            domain: String::new(),
            flags: BTreeSet::from([Flag::Failed]),
        }
    }

    pub fn outcome(&self, k: usize) -> Option<f64> {
        [self.new_c, self.bct, self.new_b, self.bfr][k]
    }

    pub fn outcome_by_name(&self, name: &str) -> Option<f64> {
        OUTCOME_NAMES.iter().position(|n| *n == name).and_then(|k| self.outcome(k))
    }

    /// Elite ratio, size, sponsorship (0/1), experience.
    pub fn numeric_controls(&self) -> Option<[f64; 4]> {
        Some([
            self.elite_ratio?,
            self.project_size?,
            if self.sponsorship? { 1.0 } else { 0.0 },
            self.avg_experience?,
        ])
    }

    /// Whether the record has every value a model of outcome `k` needs.
    pub fn usable_for(&self, k: usize) -> bool {
        !self.flags.contains(&Flag::Failed)
            && self.lsm.is_some()
            && self.outcome(k).is_some()
            && self.numeric_controls().is_some()
    }

    pub fn is_complete(&self) -> bool {
        (0..4).all(|k| self.usable_for(k))
    }
}

pub fn assemble_record(
    project: &str,
    outcomes: &OutcomeSet,
    lsm: Result<&LsmVector, &LsmUndefined>,
    controls: &ControlSet,
) -> ProjectRecord {
    let mut flags = BTreeSet::new();
    if lsm.is_err() {
        flags.insert(Flag::LsmUndefined);
    }
    if outcomes.bct.is_none() {
        flags.insert(Flag::BctMissing);
    }
    if outcomes.bfr.is_none() {
        flags.insert(Flag::BfrMissing);
    }
    if controls.elite_ratio.is_none() {
        flags.insert(Flag::EliteRatioMissing);
    }
    if controls.avg_experience.is_none() {
        flags.insert(Flag::ExperienceMissing);
    }
    ProjectRecord {
        project: project.to_string(),
        new_c: Some(outcomes.new_c),
        bct: outcomes.bct,
        new_b: Some(outcomes.new_b),
        bfr: outcomes.bfr,
        lsm: lsm.ok().map(|v| v.lsm),
        elite_ratio: controls.elite_ratio,
        project_size: Some(controls.project_size),
        sponsorship: Some(controls.sponsorship),
        avg_experience: controls.avg_experience,
        main_language: controls.main_language.clone(),
        domain: controls.domain.clone(),
        flags,
    }
}

fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_num(s: &str, row: usize, col: &str) -> Result<Option<f64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| format!("row {row}, column {col}: {e}"))
}

/// Writes `projects.csv`. Missing values are empty cells; the flags column
/// joins flags with `;`.
pub fn write_records<W: std::io::Write>(w: W, records: &[ProjectRecord]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    header.push("flags");
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![r.project.clone(), num(r.new_c), num(r.bct), num(r.new_b), num(r.bfr)];
        for i in 0..13 {
            row.push(num(r.lsm.map(|l| l[i])));
        }
        row.push(num(r.elite_ratio));
        row.push(num(r.project_size));
        row.push(r.sponsorship.map(|s| if s { "1" } else { "0" }.to_string()).unwrap_or_default());
        row.push(num(r.avg_experience));
        row.push(r.main_language.clone());
        row.push(r.domain.clone());
        row.push(r.flags.iter().map(Flag::as_str).collect::<Vec<_>>().join(";"));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(r: R) -> Result<Vec<ProjectRecord>, String> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    let mut expected: Vec<&str> = CSV_HEADER.to_vec();
    expected.push("flags");
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(format!("unexpected header: {}", header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| format!("row {row}: {e}"))?;
        let f = |c: usize| rec.get(c).unwrap_or("");
        let n = |c: usize| parse_num(f(c), row, expected[c]);
        let lsm_cells: Vec<Option<f64>> = (5..18).map(n).collect::<Result<_, _>>()?;
        let lsm = if lsm_cells.iter().all(Option::is_some) {
            let mut a = [0.0; 13];
            for (slot, v) in a.iter_mut().zip(&lsm_cells) {
                *slot = v.unwrap_or_default();
            }
            Some(a)
        } else if lsm_cells.iter().all(Option::is_none) {
            None
        } else {
            return Err(format!("row {row}: partially filled LSM columns ({})", LSM_NAMES.join(",")));
        };
        let sponsorship = match f(20) {
            "" => None,
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            other => return Err(format!("row {row}, column control3: `{other}` is not 0/1")),
        };
        let flags = f(24)
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<Flag>().map_err(|e| format!("row {row}: {e}")))
            .collect::<Result<_, _>>()?;
        out.push(ProjectRecord {
            project: f(0).to_string(),
            new_c: n(1)?,
            bct: n(2)?,
            new_b: n(3)?,
            bfr: n(4)?,
            lsm,
            elite_ratio: n(18)?,
            project_size: n(19)?,
            sponsorship,
            avg_experience: n(21)?,
            main_language: f(22).to_string(),
            domain: f(23).to_string(),
            flags,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MonthsUsed;

    fn inputs() -> (OutcomeSet, LsmVector, ControlSet) {
        (
            OutcomeSet {
                new_c: 12.5,
                bct: Some(3.25),
                new_b: 2.0,
                bfr: Some(0.8),
                months_used: MonthsUsed { new_c: 36, bct: 30, new_b: 36, bfr: 31 },
            },
            LsmVector::from_categories([0.9; 12]),
            ControlSet {
                elite_ratio: Some(0.2),
                project_size: 14.0,
                sponsorship: true,
                avg_experience: Some(812.5),
                main_language: "C++".into(),
                domain: "systems, embedded".into(),
            },
        )
    }

    #[test]
    fn complete_record_roundtrips() {
        let (o, l, c) = inputs();
        let r = assemble_record("acme/widget", &o, Ok(&l), &c);
        assert!(r.flags.is_empty());
        assert!(r.is_complete());
        assert_eq!(assemble_record("acme/widget", &o, Ok(&l), &c), r);
        let mut buf = Vec::new();
        write_records(&mut buf, &[r.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("project,new_c,bct,new_b,bfr,lsm0,"));
        assert!(text.lines().next().unwrap().ends_with("control5,control6,flags"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), vec![r]);
    }

    #[test]
    fn undefined_lsm_leaves_cells_empty() {
        let (o, _, c) = inputs();
        let undef = LsmUndefined { elite_words: 10, nonelite_words: 90, min_words: 50 };
        let r = assemble_record("p", &o, Err(&undef), &c);
        assert!(r.flags.contains(&Flag::LsmUndefined));
        assert!(!r.usable_for(0));
        let mut buf = Vec::new();
        write_records(&mut buf, &[r.clone(), ProjectRecord::failed("q")]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains(",,,,,,,,,,,,,"));
        assert!(text.ends_with(",failed\n"));
        assert_eq!(read_records(buf.as_slice()).unwrap()[0], r);
    }
}
