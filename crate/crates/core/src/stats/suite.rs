use std::fmt;

use serde::{Deserialize, Serialize};

use super::design::{build_design, DesignInfo};
use super::diagnostics::{diagnostics, vif_screen, DiagnosticsReport, VifScreen};
use super::ols::{nested_f_test, ols_fit, FitResult, NestedTest};
use super::{DesignMatrix, StatsError};
use crate::metrics::{ProjectRecord, LSM_NAMES, OUTCOME_NAMES};

/// Model ids use the outcome names without underscores.
pub const OUTCOME_IDS: [&str; 4] = ["newc", "bct", "newb", "bfr"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    /// Controls only.
    Base,
    /// Composite LSM.
    Comp,
    /// Eight function-word LSMs.
    Func,
    /// Four summary-variable LSMs.
    Summ,
    /// All twelve category LSMs.
    All,
}

impl Block {
    pub const ALL: [Block; 5] = [Block::Base, Block::Comp, Block::Func, Block::Summ, Block::All];

    pub fn id(self) -> &'static str {
        match self {
            Block::Base => "base",
            Block::Comp => "comp",
            Block::Func => "func",
            Block::Summ => "summ",
            Block::All => "all",
        }
    }

    pub fn lsm_indices(self) -> Vec<usize> {
        match self {
            Block::Base => vec![],
            Block::Comp => vec![0],
            Block::Func => (1..=8).collect(),
            Block::Summ => (9..=12).collect(),
            Block::All => (1..=12).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    /// Outcome column in `projects.csv`.
    pub outcome: String,
    pub block: Block,
    pub lsm: Vec<String>,
}

/// The 20 models: four outcomes by five variable blocks.
pub fn model_specs() -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for (k, oid) in OUTCOME_IDS.iter().enumerate() {
        for block in Block::ALL {
            out.push(ModelSpec {
                id: format!("{oid}_{}", block.id()),
                outcome: OUTCOME_NAMES[k].to_string(),
                block,
                lsm: block.lsm_indices().iter().map(|&i| LSM_NAMES[i].to_string()).collect(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub spec: ModelSpec,
    pub fit: FitResult,
    pub diagnostics: DiagnosticsReport,
    pub vif_screen: VifScreen,
    /// Refit without the columns dropped by the VIF screen, if any were.
    pub vif_refit: Option<FitResult>,
    /// Comparison with the controls-only model of the same outcome.
    pub vs_baseline: Option<NestedTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSample {
    pub outcome: String,
    pub n: usize,
    /// Projects left out of this outcome's models, with the reason.
    pub excluded: Vec<(String, String)>,
    pub design: DesignInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSuite {
    pub models: Vec<ModelEntry>,
    pub samples: Vec<OutcomeSample>,
}

impl ModelSuite {
    pub fn get(&self, id: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.spec.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteError {
    /// (model id, explanation)
    pub problems: Vec<(String, String)>,
}

impl fmt::Display for SuiteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model suite aborted:")?;
        for (id, why) in &self.problems {
            writeln!(f, "  {id}: {why}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SuiteError {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub vif_threshold: f64,
    /// Compute diagnostics and VIF screening for every model.
    pub diagnostics: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            vif_threshold: super::DEFAULT_VIF_THRESHOLD,
            diagnostics: true,
        }
    }
}

fn exclusion_reason(r: &ProjectRecord, k: usize) -> String {
    if !r.flags.is_empty() {
        r.flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(";")
    } else if r.outcome(k).is_none() {
        format!("{} missing", OUTCOME_NAMES[k])
    } else {
        "incomplete".into()
    }
}

/// Rows usable for outcome `k`, in input order.
pub fn outcome_sample(records: &[ProjectRecord], k: usize) -> (Vec<&ProjectRecord>, Vec<(String, String)>) {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for r in records {
        if r.usable_for(k) {
            used.push(r);
        } else {
            excluded.push((r.project.clone(), exclusion_reason(r, k)));
        }
    }
    (used, excluded)
}

fn outcome_vector(rows: &[&ProjectRecord], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r.outcome(k).unwrap_or(f64::NAN)).collect()
}

fn fit_one(
    spec: &ModelSpec,
    x: &DesignMatrix,
    y: &[f64],
    opts: &SuiteOptions,
) -> Result<(FitResult, DiagnosticsReport, VifScreen, Option<FitResult>), StatsError> {
    let fit = ols_fit(x, y, &spec.id)?;
    let (diag, screen, refit) = if opts.diagnostics {
        let diag = diagnostics(&fit, x)?;
        let (screen, reduced) = vif_screen(x, opts.vif_threshold)?;
        let refit = if screen.dropped.is_empty() {
            None
        } else {
            Some(ols_fit(&reduced, y, &format!("{}_vif", spec.id))?)
        };
        (diag, screen, refit)
    } else {
        (
            empty_diagnostics(),
            VifScreen {
                threshold: opts.vif_threshold,
                entries: vec![],
                flagged: vec![],
                dropped: vec![],
            },
            None,
        )
    };
    Ok((fit, diag, screen, refit))
}

fn empty_diagnostics() -> DiagnosticsReport {
    DiagnosticsReport {
        rows: vec![],
        vif: vec![],
        leverage: vec![],
        leverage_threshold: 0.0,
        high_leverage: vec![],
        studentized_residuals: vec![],
        skewness: 0.0,
        excess_kurtosis: 0.0,
        qq: vec![],
        breusch_pagan: super::diagnostics::BreuschPagan {
            statistic: 0.0,
            df: 0,
            p_value: 1.0,
        },
        residual_vs_fitted: vec![],
    }
}

/// Fits all 20 models. Each outcome uses the records complete for it, and all
/// five of its models share that sample. Any failing model aborts the suite
/// with one explanation per failing model.
pub fn model_suite(records: &[ProjectRecord], opts: &SuiteOptions) -> Result<ModelSuite, SuiteError> {
    let specs = model_specs();
    let mut models = Vec::new();
    let mut samples = Vec::new();
    let mut problems = Vec::new();
    for k in 0..OUTCOME_NAMES.len() {
        let (rows, excluded) = outcome_sample(records, k);
        let y = outcome_vector(&rows, k);
        let mut baseline: Option<FitResult> = None;
        let mut info = None;
        for spec in specs.iter().filter(|s| s.outcome == OUTCOME_NAMES[k]) {
            let built = build_design(&rows, &spec.block.lsm_indices());
            let result = built.and_then(|(x, i)| {
                info.get_or_insert(i);
                fit_one(spec, &x, &y, opts)
            });
            match result {
                Ok((fit, diagnostics, vif_screen, vif_refit)) => {
                    let vs_baseline = match (&baseline, spec.block) {
                        (_, Block::Base) => None,
                        (Some(b), _) => Some(nested_f_test(b, &fit)),
                        (None, _) => None,
                    };
                    if spec.block == Block::Base {
                        baseline = Some(fit.clone());
                    }
                    models.push(ModelEntry {
                        spec: spec.clone(),
                        fit,
                        diagnostics,
                        vif_screen,
                        vif_refit,
                        vs_baseline,
                    });
                }
                Err(e) => problems.push((spec.id.clone(), format!("{e} (usable records: {})", rows.len()))),
            }
        }
        samples.push(OutcomeSample {
            outcome: OUTCOME_NAMES[k].to_string(),
            n: rows.len(),
            excluded,
            design: info.unwrap_or(DesignInfo {
                encodings: vec![],
                warnings: vec![],
            }),
        });
    }
    if problems.is_empty() {
        Ok(ModelSuite { models, samples })
    } else {
        Err(SuiteError { problems })
    }
}

pub const SQUARED_COLUMN: &str = "lsm0_sq_centered";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticResult {
    pub outcome: String,
    pub fit: FitResult,
    /// Mean of lsm0 subtracted before squaring.
    pub center: f64,
    pub squared_coef: f64,
    pub squared_p: f64,
}

/// Composite model plus `(lsm0 - mean)^2`.
pub fn quadratic_model(records: &[ProjectRecord], outcome: usize) -> Result<QuadraticResult, StatsError> {
    let (rows, _) = outcome_sample(records, outcome);
    let (x, _) = build_design(&rows, &[0])?;
    quadratic_fit(&x, &outcome_vector(&rows, outcome), OUTCOME_NAMES[outcome], true)
}

/// Quadratic fit on a design that already contains `lsm0`. With `center`
/// false the raw square is used, which changes coefficients but not fitted
/// values.
pub fn quadratic_fit(x: &DesignMatrix, y: &[f64], outcome: &str, center: bool) -> Result<QuadraticResult, StatsError> {
    let lsm0 = x
        .column("lsm0")
        .ok_or_else(|| StatsError::Shape("design has no lsm0 column".into()))?;
    let c = if center { lsm0.iter().sum::<f64>() / lsm0.len().max(1) as f64 } else { 0.0 };
    let sq: Vec<f64> = lsm0.iter().map(|v| (v - c).powi(2)).collect();
    let xq = x.with_column(SQUARED_COLUMN, sq)?;
    let fit = ols_fit(&xq, y, &format!("{}_quad", outcome.replace('_', "")))?;
    let (squared_coef, squared_p) = fit.coef(SQUARED_COLUMN).unwrap_or((f64::NAN, f64::NAN));
    Ok(QuadraticResult {
        outcome: outcome.to_string(),
        fit,
        center: c,
        squared_coef,
        squared_p,
    })
}
