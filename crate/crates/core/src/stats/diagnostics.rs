use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::ols::{factorize, fit_with};
use super::{DesignMatrix, FitResult, StatsError, INTERCEPT};

pub const DEFAULT_VIF_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub column: String,
    pub vif: f64,
}

/// `1 / (1 - R^2_j)` for every non-intercept column, where `R^2_j` comes from
/// regressing column j on the intercept and all other predictors.
pub fn vif(x: &DesignMatrix) -> Result<Vec<VifEntry>, StatsError> {
    factorize(x)?;
    let mut out = Vec::new();
    for (j, name) in x.columns.iter().enumerate() {
        if name == INTERCEPT {
            continue;
        }
        let others = DesignMatrix {
            columns: x.columns.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, c)| c.clone()).collect(),
            data: x.data.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, c)| c.clone()).collect(),
            rows: x.rows.clone(),
            m: x.m.saturating_sub(1),
        };
        let qr = factorize(&others)?;
        let aux = fit_with(&qr, &others, &x.data[j], "vif");
        let vif = if aux.r_squared >= 1.0 { f64::INFINITY } else { 1.0 / (1.0 - aux.r_squared) };
        out.push(VifEntry { column: name.clone(), vif });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifScreen {
    pub threshold: f64,
    pub entries: Vec<VifEntry>,
    /// Columns above the threshold in the full design.
    pub flagged: Vec<String>,
    /// Columns removed one at a time, highest VIF first, until none exceeds
    /// the threshold.
    pub dropped: Vec<String>,
}

pub fn vif_screen(x: &DesignMatrix, threshold: f64) -> Result<(VifScreen, DesignMatrix), StatsError> {
    let entries = vif(x)?;
    let flagged = entries.iter().filter(|e| e.vif > threshold).map(|e| e.column.clone()).collect();
    let mut reduced = x.clone();
    let mut dropped = Vec::new();
    let mut current = entries.clone();
    while reduced.m > 1 {
        let Some(worst) = current
            .iter()
            .filter(|e| e.vif > threshold)
            .max_by(|a, b| a.vif.total_cmp(&b.vif).then_with(|| b.column.cmp(&a.column)))
        else {
            break;
        };
        dropped.push(worst.column.clone());
        reduced = reduced.without_column(&worst.column);
        current = vif(&reduced)?;
    }
    Ok((
        VifScreen {
            threshold,
            entries,
            flagged,
            dropped,
        },
        reduced,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreuschPagan {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// Project id per row.
    pub rows: Vec<String>,
    pub vif: Vec<VifEntry>,
    pub leverage: Vec<f64>,
    pub leverage_threshold: f64,
    pub high_leverage: Vec<String>,
    pub studentized_residuals: Vec<f64>,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// (theoretical normal quantile, ordered studentized residual)
    pub qq: Vec<(f64, f64)>,
    pub breusch_pagan: BreuschPagan,
    /// (fitted, residual)
    pub residual_vs_fitted: Vec<(f64, f64)>,
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    if m2 == 0.0 {
        return (0.0, 0.0);
    }
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Leverage, internally studentized residuals with their skewness, excess
/// kurtosis and Q-Q pairs, the Breusch-Pagan test (Koenker's n R^2 form) and
/// residual-vs-fitted pairs.
pub fn diagnostics(fit: &FitResult, x: &DesignMatrix) -> Result<DiagnosticsReport, StatsError> {
    let qr = factorize(x)?;
    let (n, p) = (x.n(), x.p());
    let leverage = qr.leverage();
    let leverage_threshold = 2.0 * p as f64 / n as f64;
    let high_leverage = leverage
        .iter()
        .zip(&x.rows)
        .filter(|(h, _)| **h > leverage_threshold)
        .map(|(_, r)| r.clone())
        .collect();
    let sigma = fit.sigma2.sqrt();
    let studentized: Vec<f64> = fit
        .residuals
        .iter()
        .zip(&leverage)
        .map(|(e, h)| {
            let d = sigma * (1.0 - h).max(0.0).sqrt();
            if d > 0.0 { e / d } else { 0.0 }
        })
        .collect();
    let (skewness, excess_kurtosis) = moments(&studentized);
    let mut ordered = studentized.clone();
    ordered.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let qq = ordered
        .iter()
        .enumerate()
        .map(|(i, r)| (normal.inverse_cdf((i as f64 + 0.5) / n as f64), *r))
        .collect();

    let e2: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
    let aux = fit_with(&qr, x, &e2, "bp");
    let df = x.m;
    let statistic = n as f64 * aux.r_squared;
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64).map_or(f64::NAN, |d| d.sf(statistic))
    };

    Ok(DiagnosticsReport {
        rows: x.rows.clone(),
        vif: vif(x)?,
        leverage,
        leverage_threshold,
        high_leverage,
        studentized_residuals: studentized,
        skewness,
        excess_kurtosis,
        qq,
        breusch_pagan: BreuschPagan { statistic, df, p_value },
        residual_vs_fitted: fit.fitted.iter().copied().zip(fit.residuals.iter().copied()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ols_fit;

    fn design(cols: Vec<Vec<f64>>) -> DesignMatrix {
        let n = cols[0].len();
        let mut names = vec![INTERCEPT.to_string()];
        let mut data = vec![vec![1.0; n]];
        for (j, c) in cols.into_iter().enumerate() {
            names.push(format!("x{}", j + 1));
            data.push(c);
        }
        DesignMatrix::new(names, data, (0..n).map(|i| format!("r{i}")).collect()).unwrap()
    }

    #[test]
    fn orthogonal_vif_is_one() {
        let x = design(vec![
            vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
            vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0],
            vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0],
        ]);
        for e in vif(&x).unwrap() {
            assert!((e.vif - 1.0).abs() < 1e-9, "{e:?}");
        }
        let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let f = ols_fit(&x, &y, "t").unwrap();
        let d = diagnostics(&f, &x).unwrap();
        for h in &d.leverage {
            assert!((h - 0.5).abs() < 1e-12);
        }
        assert!(d.high_leverage.is_empty());
    }

    #[test]
    fn single_predictor_vif_one() {
        let x = design(vec![vec![1.0, 4.0, 2.0, 8.0]]);
        assert!((vif(&x).unwrap()[0].vif - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_pair_flagged_and_screened() {
        let x1: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let x2: Vec<f64> = x1.iter().enumerate().map(|(i, v)| v + 1e-3 * ((i * 7 % 5) as f64 - 2.0)).collect();
        let x3: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).cos()).collect();
        let x = design(vec![x1, x2, x3]);
        let (screen, reduced) = vif_screen(&x, DEFAULT_VIF_THRESHOLD).unwrap();
        assert_eq!(screen.flagged, ["x1", "x2"]);
        assert_eq!(screen.dropped.len(), 1);
        assert_eq!(reduced.m, 2);
    }

    #[test]
    fn extreme_row_flagged() {
        let mut xs: Vec<f64> = (0..20).map(|i| (i % 5) as f64).collect();
        xs[7] = 100.0;
        let x = design(vec![xs.clone()]);
        let y: Vec<f64> = xs.iter().enumerate().map(|(i, v)| v + (i % 3) as f64).collect();
        let f = ols_fit(&x, &y, "t").unwrap();
        let d = diagnostics(&f, &x).unwrap();
        assert_eq!(d.high_leverage, ["r7"]);
        assert!((d.leverage.iter().sum::<f64>() - 2.0).abs() < 1e-9);
    }
}
