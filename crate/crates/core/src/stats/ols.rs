use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::linalg::Qr;
use super::{DesignMatrix, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model_id: String,
    pub columns: Vec<String>,
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n: usize,
    pub df_resid: usize,
    pub rss: f64,
    pub sigma2: f64,
}

impl FitResult {
    pub fn coef(&self, column: &str) -> Option<(f64, f64)> {
        let i = self.columns.iter().position(|c| c == column)?;
        Some((self.beta[i], self.p_values[i]))
    }
}

pub(crate) fn two_sided_p(t: f64, df: usize) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    match StudentsT::new(0.0, 1.0, df as f64) {
        Ok(dist) => (2.0 * dist.sf(t.abs())).min(1.0),
        Err(_) => f64::NAN,
    }
}

pub(crate) fn f_sf(f: f64, df1: usize, df2: usize) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    match FisherSnedecor::new(df1 as f64, df2 as f64) {
        Ok(dist) => dist.sf(f),
        Err(_) => f64::NAN,
    }
}

pub(crate) fn factorize(x: &DesignMatrix) -> Result<Qr, StatsError> {
    let (n, p) = (x.n(), x.p());
    if n <= p {
        return Err(StatsError::TooFewRows { n, p });
    }
    Qr::new(&x.data).map_err(|d| StatsError::RankDeficient {
        column: x.columns[d.column].clone(),
        depends_on: x.dependencies_of(d.column),
    })
}

fn centered_ss(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

/// Ordinary least squares via Householder QR. The design is expected to carry
/// an intercept column; r-squared is computed about the mean of `y`.
pub fn ols_fit(x: &DesignMatrix, y: &[f64], model_id: &str) -> Result<FitResult, StatsError> {
    if y.len() != x.n() {
        return Err(StatsError::Shape(format!("design has {} rows, outcome has {}", x.n(), y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::Shape("outcome contains non-finite values".into()));
    }
    let qr = factorize(x)?;
    Ok(fit_with(&qr, x, y, model_id))
}

pub(crate) fn fit_with(qr: &Qr, x: &DesignMatrix, y: &[f64], model_id: &str) -> FitResult {
    let (n, p) = (x.n(), x.p());
    let beta = qr.solve(y);
    let fitted: Vec<f64> = (0..n)
        .map(|i| x.data.iter().zip(&beta).map(|(col, b)| col[i] * b).sum())
        .collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let df_resid = n - p;
    let sigma2 = rss / df_resid as f64;
    let tss = centered_ss(y);
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df_resid as f64;
    let std_errors: Vec<f64> = qr.xtx_inv_diag().iter().map(|d| (sigma2 * d).sqrt()).collect();
    let t_stats: Vec<f64> = beta
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| match (*se == 0.0, *b == 0.0) {
            (false, _) => b / se,
            (true, true) => 0.0,
            (true, false) => b.signum() * f64::INFINITY,
        })
        .collect();
    let p_values = t_stats.iter().map(|t| two_sided_p(*t, df_resid)).collect();
    FitResult {
        model_id: model_id.to_string(),
        columns: x.columns.clone(),
        beta,
        std_errors,
        t_stats,
        p_values,
        residuals,
        fitted,
        r_squared,
        adj_r_squared,
        n,
        df_resid,
        rss,
        sigma2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedTest {
    pub added: Vec<String>,
    pub f_stat: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
    pub delta_r_squared: f64,
    pub delta_adj_r_squared: f64,
}

/// F-test of the columns in `full` that are absent from `reduced`, both fitted
/// on the same rows.
pub fn nested_f_test(reduced: &FitResult, full: &FitResult) -> NestedTest {
    let added: Vec<String> = full
        .columns
        .iter()
        .filter(|c| !reduced.columns.contains(c))
        .cloned()
        .collect();
    let df1 = full.columns.len().saturating_sub(reduced.columns.len());
    let df2 = full.df_resid;
    let f_stat = if df1 == 0 || full.rss == 0.0 {
        if reduced.rss > full.rss { f64::INFINITY } else { 0.0 }
    } else {
        ((reduced.rss - full.rss).max(0.0) / df1 as f64) / (full.rss / df2 as f64)
    };
    let p_value = if f_stat.is_infinite() { 0.0 } else if df1 == 0 { 1.0 } else { f_sf(f_stat, df1, df2) };
    NestedTest {
        added,
        f_stat,
        df1,
        df2,
        p_value,
        delta_r_squared: full.r_squared - reduced.r_squared,
        delta_adj_r_squared: full.adj_r_squared - reduced.adj_r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: Vec<(&str, Vec<f64>)>) -> DesignMatrix {
        let n = cols[0].1.len();
        let mut names = vec!["intercept".to_string()];
        let mut data = vec![vec![1.0; n]];
        for (name, c) in cols {
            names.push(name.to_string());
            data.push(c);
        }
        DesignMatrix::new(names, data, (0..n).map(|i| format!("r{i}")).collect()).unwrap()
    }

    #[test]
    fn exact_line() {
        let x = design(vec![("x", vec![0.0, 1.0, 2.0, 3.0, 4.0])]);
        let y: Vec<f64> = (0..5).map(|i| 1.0 + 2.0 * i as f64).collect();
        let f = ols_fit(&x, &y, "t").unwrap();
        assert!((f.beta[0] - 1.0).abs() < 1e-12 && (f.beta[1] - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_outcome() {
        let x = design(vec![("x", vec![0.0, 1.0, 5.0, 3.0, 4.0])]);
        let f = ols_fit(&x, &[7.0; 5], "t").unwrap();
        assert!((f.beta[0] - 7.0).abs() < 1e-12 && f.beta[1].abs() < 1e-12);
        assert_eq!(f.r_squared, 0.0);
    }

    #[test]
    fn errors() {
        let x = design(vec![("a", vec![1.0, 2.0, 3.0]), ("b", vec![2.0, 4.0, 6.0])]);
        assert!(matches!(ols_fit(&x, &[1.0, 2.0, 3.0], "t"), Err(StatsError::TooFewRows { .. })));
        let x = design(vec![("a", vec![1.0, 2.0, 3.0, 4.0, 5.0]), ("b", vec![2.0, 4.0, 6.0, 8.0, 10.0])]);
        match ols_fit(&x, &[1.0, 2.0, 3.0, 5.0, 4.0], "t") {
            Err(StatsError::RankDeficient { column, depends_on }) => {
                assert_eq!(column, "b");
                assert_eq!(depends_on, ["a"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textbook_p_value() {
        // n = 10, y = x + noise pattern; slope t-statistic checked against the
        // closed-form simple regression formulas.
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let noise = [0.3, -0.2, 0.5, -0.4, 0.1, 0.0, -0.3, 0.2, 0.4, -0.6];
        let ys: Vec<f64> = xs.iter().zip(noise).map(|(x, e)| 2.0 + 0.5 * x + e).collect();
        let f = ols_fit(&design(vec![("x", xs.clone())]), &ys, "t").unwrap();
        let xm = xs.iter().sum::<f64>() / 10.0;
        let ym = ys.iter().sum::<f64>() / 10.0;
        let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let slope = sxy / sxx;
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - ym - slope * (x - xm)).powi(2)).sum();
        let se = (rss / 8.0 / sxx).sqrt();
        assert!((f.beta[1] - slope).abs() < 1e-12);
        assert!((f.std_errors[1] - se).abs() < 1e-12);
        assert!(f.p_values[1] < 1e-4);
    }
}
