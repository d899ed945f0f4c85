use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::describe::{Kde, LsmDescription};
use super::ols::FitResult;
use super::suite::{ModelSuite, QuadraticResult, SuiteError};

/// Everything written to `models.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsDocument {
    pub suite: Option<ModelSuite>,
    pub error: Option<SuiteError>,
    pub quadratic: Vec<QuadraticResult>,
    pub description: Option<LsmDescription>,
}

pub fn models_json(doc: &ModelsDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("models serialize");
    s.push('\n');
    s
}

fn fmt_p(p: f64) -> String {
    if p.is_nan() {
        "NA".into()
    } else if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() { format!("{v:.4}") } else { "NA".into() }
}

fn coef_table(out: &mut String, fit: &FitResult) {
    out.push_str("| term | estimate | std. error | t | p |\n|---|---:|---:|---:|---:|\n");
    for i in 0..fit.columns.len() {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            fit.columns[i],
            fmt_f(fit.beta[i]),
            fmt_f(fit.std_errors[i]),
            fmt_f(fit.t_stats[i]),
            fmt_p(fit.p_values[i])
        );
    }
}

pub fn suite_failure_markdown(err: &SuiteError) -> String {
    let mut out = String::from("# Models\n\nThe model suite could not be fitted.\n\n| model | reason |\n|---|---|\n");
    for (id, why) in &err.problems {
        let _ = writeln!(out, "| {id} | {why} |");
    }
    out
}

pub fn models_markdown(doc: &ModelsDocument) -> String {
    let mut out = match (&doc.suite, &doc.error) {
        (_, Some(err)) => suite_failure_markdown(err),
        (Some(suite), None) => suite_markdown(suite),
        (None, None) => "# Models\n\nNo models were fitted.\n".into(),
    };
    if !doc.quadratic.is_empty() {
        out.push_str("\n## Quadratic term\n\n| outcome | n | lsm0 centre | squared coef | p |\n|---|---:|---:|---:|---:|\n");
        for q in &doc.quadratic {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                q.outcome,
                q.fit.n,
                fmt_f(q.center),
                fmt_f(q.squared_coef),
                fmt_p(q.squared_p)
            );
        }
    }
    if let Some(d) = &doc.description {
        out.push_str("\n## LSM distributions\n\n| variable | n | mean | sd | min | q1 | median | q3 | max |\n|---|---:|---:|---:|---:|---:|---:|---:|---:|\n");
        for v in &d.variables {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                v.name,
                v.n,
                fmt_f(v.mean),
                fmt_f(v.sd),
                fmt_f(v.min),
                fmt_f(v.q1),
                fmt_f(v.median),
                fmt_f(v.q3),
                fmt_f(v.max)
            );
        }
        out.push_str("\n## Raw category values by corpus\n\n| category | cross median | within-elite median | within-non-elite median | H | p |\n|---|---:|---:|---:|---:|---:|\n");
        for c in &d.corpora {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                c.category,
                fmt_f(c.summaries[0].median),
                fmt_f(c.summaries[1].median),
                fmt_f(c.summaries[2].median),
                fmt_f(c.test.h),
                fmt_p(c.test.p_value)
            );
        }
    }
    out
}

fn suite_markdown(suite: &ModelSuite) -> String {
    let mut out = String::from("# Models\n\nRaw two-sided p-values; no multiple-comparison correction.\n\n");
    out.push_str("## Samples\n\n| outcome | n | excluded |\n|---|---:|---:|\n");
    for s in &suite.samples {
        let _ = writeln!(out, "| {} | {} | {} |", s.outcome, s.n, s.excluded.len());
    }
    for s in &suite.samples {
        for w in &s.design.warnings {
            let _ = writeln!(out, "\nWarning ({}): {w}", s.outcome);
        }
    }
    out.push_str("\n## Overview\n\n| model | n | r2 | adj. r2 | delta r2 | delta adj. r2 | F | p(F) |\n|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for m in &suite.models {
        let (dr, dadj, f, p) = m.vs_baseline.as_ref().map_or(
            ("".into(), "".into(), "".into(), "".into()),
            |t| (fmt_f(t.delta_r_squared), fmt_f(t.delta_adj_r_squared), fmt_f(t.f_stat), fmt_p(t.p_value)),
        );
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {dr} | {dadj} | {f} | {p} |",
            m.spec.id,
            m.fit.n,
            fmt_f(m.fit.r_squared),
            fmt_f(m.fit.adj_r_squared)
        );
    }
    for m in &suite.models {
        let _ = writeln!(out, "\n## {}\n", m.spec.id);
        coef_table(&mut out, &m.fit);
        let d = &m.diagnostics;
        let _ = writeln!(
            out,
            "\nBreusch-Pagan {} (df {}, p {}); studentized residual skewness {}, excess kurtosis {}.",
            fmt_f(d.breusch_pagan.statistic),
            d.breusch_pagan.df,
            fmt_p(d.breusch_pagan.p_value),
            fmt_f(d.skewness),
            fmt_f(d.excess_kurtosis)
        );
        if !d.high_leverage.is_empty() {
            let _ = writeln!(
                out,
                "High leverage (> {}): {}.",
                fmt_f(d.leverage_threshold),
                d.high_leverage.join(", ")
            );
        }
        if !m.vif_screen.flagged.is_empty() {
            let _ = writeln!(
                out,
                "VIF above {}: {}. Dropped in refit: {}.",
                m.vif_screen.threshold,
                m.vif_screen.flagged.join(", "),
                m.vif_screen.dropped.join(", ")
            );
        }
        if let Some(refit) = &m.vif_refit {
            let _ = writeln!(out, "\nRefit without high-VIF columns (r2 {}):\n", fmt_f(refit.r_squared));
            coef_table(&mut out, refit);
        }
    }
    out
}

fn pairs_csv(header: &str, pts: &[(f64, f64)]) -> String {
    let mut s = format!("{header}\n");
    for (a, b) in pts {
        let _ = writeln!(s, "{a},{b}");
    }
    s
}

/// Plot-ready series as (file name, csv text), sorted by name.
pub fn plot_files(doc: &ModelsDocument) -> Vec<(String, String)> {
    let mut files = Vec::new();
    if let Some(suite) = &doc.suite {
        for m in &suite.models {
            files.push((
                format!("{}_resid_fitted.csv", m.spec.id),
                pairs_csv("fitted,residual", &m.diagnostics.residual_vs_fitted),
            ));
            files.push((format!("{}_qq.csv", m.spec.id), pairs_csv("theoretical,studentized", &m.diagnostics.qq)));
            let mut lev = String::from("project,leverage,flagged\n");
            for (row, h) in m.diagnostics.rows.iter().zip(&m.diagnostics.leverage) {
                let flagged = u8::from(*h > m.diagnostics.leverage_threshold);
                let _ = writeln!(lev, "{row},{h},{flagged}");
            }
            files.push((format!("{}_leverage.csv", m.spec.id), lev));
        }
    }
    if let Some(d) = &doc.description {
        let mut boxes = String::from("variable,n,mean,sd,min,q1,median,q3,max\n");
        for v in &d.variables {
            let _ = writeln!(
                boxes,
                "{},{},{},{},{},{},{},{},{}",
                v.name, v.n, v.mean, v.sd, v.min, v.q1, v.median, v.q3, v.max
            );
            let mut hist = String::from("lower,upper,count\n");
            for (i, c) in v.histogram.counts.iter().enumerate() {
                let _ = writeln!(hist, "{},{},{c}", v.histogram.edges[i], v.histogram.edges[i + 1]);
            }
            files.push((format!("{}_hist.csv", v.name), hist));
            let kde = match &v.kde {
                Kde::Curve { x, density, .. } => {
                    pairs_csv("x,density", &x.iter().copied().zip(density.iter().copied()).collect::<Vec<_>>())
                }
                Kde::PointMass { at } => format!("x,density\n{at},inf\n"),
                Kde::Empty => "x,density\n".into(),
            };
            files.push((format!("{}_kde.csv", v.name), kde));
        }
        files.push(("lsm_box.csv".into(), boxes));
        let mut corp = String::from("category,corpus,n,median,q1,q3,h,p\n");
        for c in &d.corpora {
            for s in &c.summaries {
                let _ = writeln!(
                    corp,
                    "{},{},{},{},{},{},{},{}",
                    c.category, s.name, s.n, s.median, s.q1, s.q3, c.test.h, c.test.p_value
                );
            }
        }
        files.push(("corpora_box.csv".into(), corp));
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    files
}

/// Minimal static scatter chart.
pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, pts: &[(f64, f64)]) -> String {
    let (w, h, pad) = (480.0, 360.0, 48.0);
    let finite: Vec<(f64, f64)> = pts.iter().copied().filter(|(a, b)| a.is_finite() && b.is_finite()).collect();
    let range = |f: fn(&(f64, f64)) -> f64| {
        let lo = finite.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = finite.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if lo == hi {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(|p| p.0);
    let (y0, y1) = range(|p| p.1);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for (a, b) in &finite {
        let cx = pad + (a - x0) / (x1 - x0) * (w - 2.0 * pad);
        let cy = h - pad - (b - y0) / (y1 - y0) * (h - 2.0 * pad);
        let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2" fill="steelblue"/>"#);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
