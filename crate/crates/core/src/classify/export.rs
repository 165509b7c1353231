use std::fmt::Write as _;
use std::path::Path;

use super::confusion::ConfusionMatrix;
use super::mds::MdsEmbedding;
use crate::error::Result;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Header row `true\pred,<classes>`, then one row per true class.
pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    let mut s = String::from("true\\pred");
    for c in &m.classes {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (c, row) in m.classes.iter().zip(&m.counts) {
        s.push_str(c);
        for v in row {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Row-normalised heatmap with raw counts printed in each cell.
pub fn confusion_svg(m: &ConfusionMatrix) -> String {
    let k = m.len();
    let cell = 48.0;
    let margin = 110.0;
    let size = margin + cell * k as f64 + 20.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let sums = m.row_sums();
    for (i, row) in m.counts.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let frac = if sums[i] > 0 { v as f64 / sums[i] as f64 } else { 0.0 };
            let shade = (255.0 * (1.0 - frac)).round() as u8;
            let (x, y) = (margin + cell * j as f64, margin + cell * i as f64);
            writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="rgb({shade},{shade},255)" stroke="gray"/>"#
            )
            .unwrap();
            let fill = if frac > 0.5 { "white" } else { "black" };
            writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="{fill}">{v}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            )
            .unwrap();
        }
    }
    for (i, c) in m.classes.iter().enumerate() {
        let c = escape(c);
        let mid = margin + cell * i as f64 + cell / 2.0;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{c}</text>"#, margin - 6.0, mid + 4.0).unwrap();
        writeln!(
            s,
            r#"<text x="{mid:.1}" y="{:.1}" text-anchor="start" transform="rotate(-45 {mid:.1} {:.1})">{c}</text>"#,
            margin - 8.0,
            margin - 8.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Columns `x,y,true_label,predicted_label`, one row per point.
pub fn embedding_csv(e: &MdsEmbedding) -> String {
    let mut s = String::from("x,y,true_label,predicted_label\n");
    for (i, c) in e.coords.iter().enumerate() {
        let t = e.true_labels.get(i).map(String::as_str).unwrap_or("");
        let p = e.predicted_labels.get(i).map(String::as_str).unwrap_or("");
        writeln!(s, "{},{},{t},{p}", c[0], c[1]).unwrap();
    }
    s
}

/// Scatter coloured by true label; misclassified points get a black ring.
pub fn embedding_svg(e: &MdsEmbedding) -> String {
    let (w, h, pad) = (640.0, 480.0, 40.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in &e.coords {
        x0 = x0.min(c[0]);
        x1 = x1.max(c[0]);
        y0 = y0.min(c[1]);
        y1 = y1.max(c[1]);
    }
    let sx = if x1 > x0 { (w - 2.0 * pad - 120.0) / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { (h - 2.0 * pad) / (y1 - y0) } else { 1.0 };
    let mut labels: Vec<&str> = Vec::new();
    for l in &e.true_labels {
        if !labels.contains(&l.as_str()) {
            labels.push(l);
        }
    }
    let color = |l: &str| PALETTE[labels.iter().position(|x| *x == l).unwrap_or(0) % PALETTE.len()];
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" font-family="sans-serif" font-size="11">"#)
        .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (i, c) in e.coords.iter().enumerate() {
        let px = pad + (c[0] - x0) * sx;
        let py = h - pad - (c[1] - y0) * sy;
        let t = e.true_labels.get(i).map(String::as_str).unwrap_or("");
        let wrong = e.predicted_labels.get(i).is_some_and(|p| p != t);
        let stroke = if wrong { r#" stroke="black" stroke-width="1""# } else { "" };
        writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{}"{stroke}/>"#, color(t)).unwrap();
    }
    for (i, l) in labels.iter().enumerate() {
        let y = pad + 16.0 * i as f64;
        writeln!(s, r#"<circle cx="{:.1}" cy="{y:.1}" r="4" fill="{}"/>"#, w - 110.0, color(l)).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, w - 100.0, y + 4.0, escape(l)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<stem>.csv` and `<stem>.svg` for a confusion matrix.
pub fn export_confusion(m: &ConfusionMatrix, dir: &Path, stem: &str) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}.csv")), confusion_csv(m))?;
    std::fs::write(dir.join(format!("{stem}.svg")), confusion_svg(m))?;
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.svg` for an embedding.
pub fn export_embedding(e: &MdsEmbedding, dir: &Path, stem: &str) -> Result<()> {
    std::fs::write(dir.join(format!("{stem}.csv")), embedding_csv(e))?;
    std::fs::write(dir.join(format!("{stem}.svg")), embedding_svg(e))?;
    Ok(())
}
