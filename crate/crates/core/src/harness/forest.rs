//! Forest-plot data (CSV) and small-multiple SVG figures.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::Variant;
use super::run::{Dataset, ExperimentReport};
use crate::corpus::SdohVariable;
use crate::stats::Method;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestRow {
    pub sdoh: SdohVariable,
    pub dataset: Dataset,
    pub mode: Method,
    /// `"reference"` for the gold-label line.
    pub variant: String,
    pub size: Option<usize>,
    pub or: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub const FOREST_CSV_HEADER: &[&str] = &["sdoh", "dataset", "mode", "variant", "size", "or", "ci_low", "ci_high"];

/// Converged association rows plus the reference rows; non-converged rows
/// are left out so every emitted row satisfies ci_low <= or <= ci_high.
pub fn forest_rows(report: &ExperimentReport) -> Vec<ForestRow> {
    let mut out = Vec::new();
    for a in &report.associations {
        let r = &a.result;
        if !r.converged {
            log::warn!("{} {} {} {}: not converged, left out of the forest plot", r.sdoh, a.dataset.as_str(), r.method.as_str(), a.cell.label());
            continue;
        }
        out.push(ForestRow {
            sdoh: r.sdoh,
            dataset: a.dataset,
            mode: r.method,
            variant: a.cell.variant.as_str().to_string(),
            size: a.cell.size,
            or: r.or,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
        });
    }
    for r in report.reference.iter().filter(|r| r.converged) {
        out.push(ForestRow {
            sdoh: r.sdoh,
            dataset: Dataset::LabeledSubset,
            mode: r.method,
            variant: "reference".into(),
            size: None,
            or: r.or,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
        });
    }
    out
}

pub fn write_forest_csv<W: std::io::Write>(rows: &[ForestRow], out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FOREST_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.sdoh.as_str().to_string(),
            r.dataset.as_str().to_string(),
            r.mode.as_str().to_string(),
            r.variant.clone(),
            r.size.map(|s| s.to_string()).unwrap_or_default(),
            r.or.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const PANEL_W: f64 = 230.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 48.0;
const MARGIN_R: f64 = 12.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 36.0;
const HEADER_H: f64 = 40.0;

fn colour(v: Variant) -> &'static str {
    match v {
        Variant::External => "#555555",
        Variant::Finetuned => "#1f5fbf",
        Variant::Scratch => "#c8342b",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One SVG for a (dataset, mode) pair: a panel per SDoH with training size
/// on x, odds ratio on a log y axis, one series per model variant and a
/// dashed gold-reference line.
pub fn forest_svg(rows: &[ForestRow], dataset: Dataset, mode: Method, sizes: &[usize]) -> String {
    let n_panels = SdohVariable::ALL.len() as f64;
    let width = n_panels * PANEL_W;
    let height = PANEL_H + HEADER_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="8" y="16" font-size="12">{} / {}</text>"#,
        escape(dataset.as_str()),
        escape(mode.as_str())
    );
    for (i, v) in [Variant::External, Variant::Finetuned, Variant::Scratch].iter().enumerate() {
        let x = 160.0 + i as f64 * 90.0;
        let _ = writeln!(
            s,
            r#"<circle cx="{x}" cy="12" r="3" fill="{}"/><text x="{}" y="16">{}</text>"#,
            colour(*v),
            x + 6.0,
            v.as_str()
        );
    }
    let xs: Vec<String> = std::iter::once("ext".to_string()).chain(sizes.iter().map(|s| s.to_string())).collect();
    for (p, sdoh) in SdohVariable::ALL.iter().enumerate() {
        let ox = p as f64 * PANEL_W;
        let oy = HEADER_H;
        let panel: Vec<&ForestRow> = rows
            .iter()
            .filter(|r| r.sdoh == *sdoh && ((r.dataset == dataset && r.mode == mode) || r.variant == "reference"))
            .collect();
        let bounds = panel
            .iter()
            .flat_map(|r| [r.ci_low, r.ci_high, r.or])
            .filter(|v| v.is_finite() && *v > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.ln()), hi.max(v.ln())));
        let (lo, hi) = if bounds.0.is_finite() {
            let pad = ((bounds.1 - bounds.0) * 0.05).max(0.05);
            (bounds.0 - pad, bounds.1 + pad)
        } else {
            (-1.0, 1.0)
        };
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
        let y = |or: f64| oy + MARGIN_T + plot_h * (1.0 - (or.ln() - lo) / (hi - lo));
        let x = |k: usize| ox + MARGIN_L + plot_w * (k as f64 + 0.5) / xs.len() as f64;
        let _ = writeln!(s, r#"<g class="panel" data-sdoh="{}">"#, sdoh.as_str());
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, ox + MARGIN_L, oy + 16.0, sdoh.as_str());
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##,
            ox + MARGIN_L,
            oy + MARGIN_T
        );
        // log-axis ticks at OR = 1 and the panel limits
        for t in [lo.exp(), 1.0, hi.exp()] {
            if t.ln() < lo - 1e-12 || t.ln() > hi + 1e-12 {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#,
                ox + MARGIN_L - 4.0,
                y(t) + 3.0,
                t
            );
        }
        if lo < 0.0 && hi > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{}" x2="{}" y1="{y1}" y2="{y1}" stroke="#ccc"/>"##,
                ox + MARGIN_L,
                ox + MARGIN_L + plot_w,
                y1 = y(1.0)
            );
        }
        for (k, label) in xs.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                x(k),
                oy + PANEL_H - MARGIN_B + 14.0,
                label
            );
        }
        if let Some(r) = panel.iter().find(|r| r.variant == "reference") {
            let _ = writeln!(
                s,
                r##"<line class="reference" x1="{}" x2="{}" y1="{y1}" y2="{y1}" stroke="#000" stroke-dasharray="4 3"/>"##,
                ox + MARGIN_L,
                ox + MARGIN_L + plot_w,
                y1 = y(r.or)
            );
        }
        for (offset, v) in [(0.0, Variant::External), (-5.0, Variant::Finetuned), (5.0, Variant::Scratch)] {
            let _ = writeln!(s, r#"<g class="series" data-variant="{}">"#, v.as_str());
            for r in panel.iter().filter(|r| r.variant == v.as_str()) {
                let k = match r.size {
                    None => 0,
                    Some(sz) => match sizes.iter().position(|s| *s == sz) {
                        Some(i) => i + 1,
                        None => continue,
                    },
                };
                let cx = x(k) + offset;
                let c = colour(v);
                let _ = writeln!(
                    s,
                    r#"<line x1="{cx}" x2="{cx}" y1="{}" y2="{}" stroke="{c}"/><circle cx="{cx}" cy="{}" r="3" fill="{c}"/>"#,
                    y(r.ci_low),
                    y(r.ci_high),
                    y(r.or)
                );
            }
            s.push_str("</g>\n");
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}
