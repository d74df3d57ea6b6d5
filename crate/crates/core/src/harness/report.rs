//! Markdown tables and SVG line charts from result rows.

use std::fmt::Write as _;

use super::eval::{summarize, SummaryRow};
use crate::metrics::ResultRow;

const WIDTH: f64 = 560.0;
const HEIGHT: f64 = 360.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 130.0, 30.0, 50.0); // left, right, top, bottom
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn unique<T: PartialEq + Clone>(it: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in it {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// One table per (pattern, metric): scenarios down, rates across, `mean ± std` cells.
pub fn markdown_tables(rows: &[ResultRow]) -> String {
    let summary = summarize(rows);
    let mut out = String::new();
    let patterns = unique(summary.iter().map(|s| s.pattern.clone()));
    let metrics = unique(summary.iter().map(|s| s.metric.clone()));
    for p in &patterns {
        for m in &metrics {
            let cells: Vec<&SummaryRow> = summary.iter().filter(|s| &s.pattern == p && &s.metric == m).collect();
            if cells.is_empty() {
                continue;
            }
            let mut rates = unique(cells.iter().map(|s| s.rate));
            rates.sort_by(f64::total_cmp);
            let scenarios = unique(cells.iter().map(|s| s.scenario.clone()));
            let _ = writeln!(out, "### {} missing, {}\n", p, m.to_uppercase());
            let _ = write!(out, "| scenario |");
            for r in &rates {
                let _ = write!(out, " {}% |", r * 100.0);
            }
            let _ = write!(out, "\n|---|");
            out.push_str(&"---|".repeat(rates.len()));
            out.push('\n');
            for sc in &scenarios {
                let _ = write!(out, "| {} |", sc);
                for r in &rates {
                    match cells.iter().find(|s| &s.scenario == sc && s.rate == *r) {
                        Some(s) if s.n > 1 => {
                            let _ = write!(out, " {:.4} ± {:.4} |", s.mean, s.std);
                        }
                        Some(s) => {
                            let _ = write!(out, " {:.4} |", s.mean);
                        }
                        None => out.push_str(" - |"),
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}

/// Mean metric against missing rate, one line per scenario. Error bars span ± one std.
pub fn line_chart(rows: &[ResultRow], pattern: &str, metric: &str) -> Option<String> {
    let summary: Vec<SummaryRow> =
        summarize(rows).into_iter().filter(|s| s.pattern == pattern && s.metric == metric).collect();
    if summary.is_empty() {
        return None;
    }
    let (ml, mr, mt, mb) = MARGIN;
    let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
    let rates: Vec<f64> = summary.iter().map(|s| s.rate).collect();
    let (mut x0, mut x1) = (rates.iter().copied().fold(f64::INFINITY, f64::min), rates.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    if x1 - x0 < 1e-12 {
        x0 -= 0.05;
        x1 += 0.05;
    }
    let mut y0 = summary.iter().map(|s| s.mean - s.std).fold(f64::INFINITY, f64::min).min(0.0);
    let mut y1 = summary.iter().map(|s| s.mean + s.std).fold(f64::NEG_INFINITY, f64::max);
    if y1 - y0 < 1e-12 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    y1 += 0.05 * (y1 - y0);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#,
        W = WIDTH,
        H = HEIGHT
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{} vs missing rate ({} missing)</text>"#,
        ml + pw / 2.0,
        metric.to_uppercase(),
        pattern
    );
    let _ = writeln!(s, r#"<line x1="{ml}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#, ml = ml, b = mt + ph, r = ml + pw);
    let _ = writeln!(s, r#"<line x1="{ml}" y1="{t}" x2="{ml}" y2="{b}" stroke="black"/>"#, ml = ml, t = mt, b = mt + ph);
    let mut ticks = unique(rates.iter().copied());
    ticks.sort_by(f64::total_cmp);
    for r in &ticks {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}%</text>"#,
            sx(*r),
            mt + ph + 16.0,
            r * 100.0
        );
    }
    for i in 0..=4 {
        let v = y0 + (y1 - y0) * i as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(s, r##"<line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##, ml, ml + pw, y = y);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, ml - 6.0, y + 4.0, v);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">missing rate</text>"#, ml + pw / 2.0, HEIGHT - 12.0);
    for (i, sc) in unique(summary.iter().map(|s| s.scenario.clone())).iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<&SummaryRow> = summary.iter().filter(|s| &s.scenario == sc).collect();
        pts.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        let path: Vec<String> = pts.iter().map(|p| format!("{:.1},{:.1}", sx(p.rate), sy(p.mean))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#, color, path.join(" "));
        for p in &pts {
            let (x, y) = (sx(p.rate), sy(p.mean));
            if p.std > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{}"/>"#,
                    sy(p.mean - p.std),
                    sy(p.mean + p.std),
                    color,
                    x = x
                );
            }
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{}"/>"#, x, y, color);
        }
        let ly = mt + 10.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly:.1}" x2="{}" y2="{ly:.1}" stroke="{}" stroke-width="2"/>"#, ml + pw + 12.0, ml + pw + 32.0, color, ly = ly);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}">{}</text>"#, ml + pw + 38.0, ly + 4.0, xml_escape(sc));
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Markdown plus one chart per (pattern, metric), keyed by file stem.
pub fn render(rows: &[ResultRow]) -> (String, Vec<(String, String)>) {
    let mut charts = Vec::new();
    let patterns = unique(rows.iter().map(|r| r.pattern.clone()));
    let metrics = unique(rows.iter().map(|r| r.metric.clone()));
    for p in &patterns {
        for m in &metrics {
            if let Some(svg) = line_chart(rows, p, m) {
                charts.push((format!("{}_{}", m, p), svg));
            }
        }
    }
    (markdown_tables(rows), charts)
}
