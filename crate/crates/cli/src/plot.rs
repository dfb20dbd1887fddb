//! Minimal static SVG rendering of already-computed series.

use std::fmt::Write as _;

use qipf::analysis::Heatmap;

const W: f64 = 720.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Line chart of several series sharing one x axis.
pub fn line_chart(title: &str, x: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (x0, x1) = bounds(x.iter());
    let (y0, y1) = bounds(series.iter().flat_map(|(_, v)| v.iter()));
    let sx = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = write!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for (label, v, anchor) in [(x0, PAD, "start"), (x1, W - PAD, "end")] {
        let _ = write!(
            out,
            r#"<text x="{v}" y="{}" font-family="sans-serif" font-size="10" text-anchor="{anchor}">{label:.3}</text>"#,
            H - PAD + 14.0
        );
    }
    for (label, v) in [(y0, H - PAD), (y1, PAD)] {
        let _ = write!(
            out,
            r#"<text x="{}" y="{v}" font-family="sans-serif" font-size="10" text-anchor="end">{label:.3}</text>"#,
            PAD - 4.0
        );
    }
    for (j, (name, v)) in series.iter().enumerate() {
        let color = COLORS[j % COLORS.len()];
        let mut path = String::new();
        for (xi, yi) in x.iter().zip(v) {
            if !yi.is_finite() {
                continue;
            }
            let cmd = if path.is_empty() { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2},{:.2} ", sx(*xi), sy(*yi));
        }
        let _ = write!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            path.trim_end()
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" fill="{color}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 12.0 * j as f64 + 8.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart with one bar per category.
pub fn bar_chart(title: &str, values: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (_, hi) = bounds(values.iter());
    let hi = hi.max(f64::MIN_POSITIVE);
    let n = values.len().max(1) as f64;
    let bw = (W - 2.0 * PAD) / n;
    for (j, v) in values.iter().enumerate() {
        let h = (v.max(0.0) / hi) * (H - 2.0 * PAD);
        let _ = write!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4"/>"##,
            PAD + j as f64 * bw + 1.0,
            H - PAD - h,
            (bw - 2.0).max(1.0),
            h
        );
        let _ = write!(
            out,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="9" text-anchor="middle">{}</text>"#,
            PAD + (j as f64 + 0.5) * bw,
            H - PAD + 12.0,
            j + 1
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grayscale heat-map, columns averaged down to at most 360 cells.
pub fn heatmap_svg(title: &str, h: &Heatmap) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let cols = h.samples.min(360);
    let cw = (W - 2.0 * PAD) / cols as f64;
    let ch = (H - 2.0 * PAD) / h.modes as f64;
    for k in 1..=h.modes {
        let row = h.row(k);
        for c in 0..cols {
            let a = c * h.samples / cols;
            let b = ((c + 1) * h.samples / cols).max(a + 1);
            let v = row[a..b].iter().sum::<f64>() / (b - a) as f64;
            let level = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            let _ = write!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({level},{level},{level})"/>"#,
                PAD + c as f64 * cw,
                PAD + (k - 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
