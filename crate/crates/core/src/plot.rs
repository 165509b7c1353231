//! Deterministic SVG charts for result tables.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn header(s: &mut String, xlabel: &str, ylabel: &str, ylo: f64, yhi: f64) {
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0}" height="{H:.0}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - PAD, W - PAD, H - PAD).unwrap();
    writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel)).unwrap();
    writeln!(s, r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#, H / 2.0, H / 2.0, escape(ylabel)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, H - PAD, fmt_tick(ylo)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, PAD + 4.0, fmt_tick(yhi)).unwrap();
}

fn fmt_tick(v: f64) -> String {
    format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Single-series line chart.
pub fn line_svg(points: &[(f64, f64)], xlabel: &str, ylabel: &str) -> String {
    multi_line_svg(&[("", points.to_vec())], xlabel, ylabel)
}

/// Several named series sharing axes.
pub fn multi_line_svg(series: &[(&str, Vec<(f64, f64)>)], xlabel: &str, ylabel: &str) -> String {
    let (xlo, xhi) = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let (ylo, yhi) = bounds(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut s = String::new();
    header(&mut s, xlabel, ylabel, ylo, yhi);
    let px = |x: f64| PAD + (x - xlo) / (xhi - xlo) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - ylo) / (yhi - ylo) * (H - 2.0 * PAD);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
        if !name.is_empty() {
            let y = PAD + 14.0 * i as f64;
            writeln!(s, r#"<text x="{}" y="{y:.1}" fill="{color}">{}</text>"#, W - PAD - 100.0, escape(name)).unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Bar chart with optional `(low, high)` error bars.
pub fn bar_svg(bars: &[(String, f64, Option<(f64, f64)>)], ylabel: &str) -> String {
    let (_, yhi) = bounds(bars.iter().map(|b| b.2.map_or(b.1, |ci| ci.1.max(b.1))).chain([0.0]));
    let ylo = 0.0f64.min(bars.iter().map(|b| b.1).fold(0.0, f64::min));
    let mut s = String::new();
    header(&mut s, "", ylabel, ylo, yhi);
    let n = bars.len().max(1) as f64;
    let slot = (W - 2.0 * PAD) / n;
    let py = |y: f64| H - PAD - (y - ylo) / (yhi - ylo) * (H - 2.0 * PAD);
    for (i, (label, v, ci)) in bars.iter().enumerate() {
        let x = PAD + slot * i as f64 + slot * 0.15;
        let w = slot * 0.7;
        let (top, bottom) = (py(v.max(0.0)), py(v.min(0.0)));
        writeln!(s, r#"<rect x="{x:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}" fill="{}"/>"#, bottom - top, COLORS[0]).unwrap();
        if let Some((lo, hi)) = ci {
            let cx = x + w / 2.0;
            writeln!(s, r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#, py(*lo), py(*hi)).unwrap();
        }
        let cx = x + w / 2.0;
        let ty = H - PAD + 12.0;
        writeln!(s, r#"<text x="{cx:.2}" y="{ty:.1}" text-anchor="end" transform="rotate(-30 {cx:.2} {ty:.1})">{}</text>"#, escape(label)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Renders any CSV table. With a numeric first column every other numeric
/// column becomes a line against it; otherwise the first numeric column is
/// drawn as bars labelled by the first column.
pub fn plot_csv(text: &str) -> Result<String> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let rows: Vec<Vec<String>> =
        rdr.records().map(|r| r.map(|r| r.iter().map(String::from).collect())).collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() || headers.is_empty() {
        return Err(Error::InvalidInput("nothing to plot: table has no rows".into()));
    }
    let numeric: Vec<bool> =
        (0..headers.len()).map(|c| rows.iter().all(|r| r.get(c).is_some_and(|v| v.parse::<f64>().is_ok()))).collect();
    let val = |r: &Vec<String>, c: usize| r[c].parse::<f64>().unwrap();
    if numeric[0] {
        let series: Vec<(&str, Vec<(f64, f64)>)> = (1..headers.len())
            .filter(|&c| numeric[c])
            .map(|c| (headers[c].as_str(), rows.iter().map(|r| (val(r, 0), val(r, c))).collect()))
            .collect();
        if series.is_empty() {
            return Err(Error::InvalidInput("no numeric columns to plot".into()));
        }
        Ok(multi_line_svg(&series, &headers[0], ""))
    } else {
        let c = (1..headers.len())
            .find(|&c| numeric[c])
            .ok_or_else(|| Error::InvalidInput("no numeric columns to plot".into()))?;
        let bars = rows.iter().map(|r| (r[0].clone(), val(r, c), None)).collect::<Vec<_>>();
        Ok(bar_svg(&bars, &headers[c]))
    }
}
