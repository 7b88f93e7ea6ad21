use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::stats::{summarize_curves, CurveSummary, Interval};

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    pub grammar: String,
    pub method: String,
    pub initialiser: String,
    pub seed: u64,
    pub generation: usize,
    pub statistic: String,
    pub value: f64,
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .map(|r| r.map_err(|e| HarnessError::user(format!("malformed results CSV: {e}"))))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub label: String,
    pub curve: Vec<CurveSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub title: String,
    pub lines: Vec<Line>,
}

/// Groups `statistic` rows into one panel per grammar and one line per
/// (method, initialiser), keyed by problem.
pub fn panels(rows: &[ResultRow], statistic: &str) -> BTreeMap<String, Vec<Panel>> {
    // problem -> grammar -> line label -> seed -> generation -> value
    type Runs = BTreeMap<u64, BTreeMap<usize, f64>>;
    let mut tree: BTreeMap<&str, BTreeMap<&str, BTreeMap<String, Runs>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.statistic == statistic) {
        tree.entry(&r.problem)
            .or_default()
            .entry(&r.grammar)
            .or_default()
            .entry(format!("{} / {}", r.method, r.initialiser))
            .or_default()
            .entry(r.seed)
            .or_default()
            .insert(r.generation, r.value);
    }
    tree.into_iter()
        .map(|(problem, grammars)| {
            let ps = grammars
                .into_iter()
                .map(|(grammar, lines)| Panel {
                    title: grammar.to_string(),
                    lines: lines
                        .into_iter()
                        .map(|(label, runs)| {
                            let runs: Vec<Vec<f64>> = runs
                                .into_values()
                                .map(|gens| gens.into_values().collect())
                                .collect();
                            Line {
                                label,
                                curve: summarize_curves(&runs, Interval::Normal),
                            }
                        })
                        .collect(),
                })
                .collect();
            (problem.to_string(), ps)
        })
        .collect()
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 40.0;
const LEGEND_ROW: f64 = 18.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Renders panels side by side with a shared legend underneath.
pub fn render_svg(title: &str, panels: &[Panel], statistic: &str) -> String {
    let labels: Vec<&str> = {
        let mut l: Vec<&str> = panels
            .iter()
            .flat_map(|p| p.lines.iter().map(|l| l.label.as_str()))
            .collect();
        l.sort();
        l.dedup();
        l
    };
    let color = |label: &str| {
        let i = labels.iter().position(|l| *l == label).unwrap_or(0);
        PALETTE[i % PALETTE.len()]
    };
    let width = PANEL_W * panels.len().max(1) as f64;
    let height = PANEL_H + 12.0 + LEGEND_ROW * labels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="16" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (pi, p) in panels.iter().enumerate() {
        let x0 = pi as f64 * PANEL_W + MARGIN_L;
        let x1 = (pi + 1) as f64 * PANEL_W - MARGIN_R;
        let (y0, y1) = (PANEL_H - MARGIN_B, MARGIN_T);
        let gmax = p
            .lines
            .iter()
            .flat_map(|l| l.curve.iter().map(|c| c.generation))
            .max()
            .unwrap_or(0)
            .max(1) as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in p.lines.iter().flat_map(|l| &l.curve) {
            lo = lo.min(c.ci_low);
            hi = hi.max(c.ci_high);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
            (lo, hi) = (lo - pad, hi + pad);
        }
        let sx = |g: f64| x0 + (x1 - x0) * g / gmax;
        let sy = |v: f64| y0 - (y0 - y1) * (v - lo) / (hi - lo);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="36" text-anchor="middle" font-size="12">{}</text>"#,
            (x0 + x1) / 2.0,
            escape(&p.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            x1 - x0,
            y0 - y1
        );
        for k in 0..=4 {
            let v = lo + (hi - lo) * k as f64 / 4.0;
            let y = sy(v);
            let _ = writeln!(
                s,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y + 4.0,
                tick(v)
            );
        }
        let mut xticks: Vec<usize> = (0..=4)
            .map(|k| (gmax * k as f64 / 4.0).round() as usize)
            .collect();
        xticks.dedup();
        for g in xticks {
            let x = sx(g as f64);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{g}</text>"##,
                y0 + 4.0,
                y0 + 16.0,
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">generation</text>"#,
            (x0 + x1) / 2.0,
            y0 + 32.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            x0 - 44.0,
            (y0 + y1) / 2.0,
            x0 - 44.0,
            (y0 + y1) / 2.0,
            escape(statistic)
        );
        for l in &p.lines {
            let c = color(&l.label);
            let mut ribbon: Vec<String> = l
                .curve
                .iter()
                .map(|q| format!("{:.2},{:.2}", sx(q.generation as f64), sy(q.ci_high)))
                .collect();
            ribbon.extend(
                l.curve
                    .iter()
                    .rev()
                    .map(|q| format!("{:.2},{:.2}", sx(q.generation as f64), sy(q.ci_low))),
            );
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#,
                ribbon.join(" ")
            );
            let pts: Vec<String> = l
                .curve
                .iter()
                .map(|q| format!("{:.2},{:.2}", sx(q.generation as f64), sy(q.mean)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
    }
    for (i, label) in labels.iter().enumerate() {
        let y = PANEL_H + 12.0 + LEGEND_ROW * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            MARGIN_L,
            y - 4.0,
            MARGIN_L + 24.0,
            y - 4.0,
            color(label),
            MARGIN_L + 30.0,
            y,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Reads a results CSV and writes `<problem>-<statistic>.svg` files into
/// `out_dir`.
pub fn plot_csv(
    csv_path: &Path,
    out_dir: &Path,
    statistic: &str,
) -> Result<Vec<PathBuf>, HarnessError> {
    let f = std::fs::File::open(csv_path)
        .map_err(|e| HarnessError::user(format!("{}: {e}", csv_path.display())))?;
    let rows = read_results(f)?;
    let grouped = panels(&rows, statistic);
    if grouped.is_empty() {
        return Err(HarnessError::user(format!(
            "{}: no '{statistic}' rows to plot",
            csv_path.display()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (problem, ps) in grouped {
        let path = out_dir.join(format!("{problem}-{statistic}.svg"));
        let svg = render_svg(&format!("{problem}: {statistic}"), &ps, statistic);
        std::fs::write(&path, svg).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
