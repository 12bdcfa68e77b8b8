//! Plain-text SVG scatter plots.

use std::fmt::Write as _;

use oae_core::Tensor;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const SIZE: f64 = 480.0;
const PAD: f64 = 24.0;

fn span(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || hi - lo <= 0.0 {
        (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0)
    } else {
        (lo, hi)
    }
}

/// Columns 0 and 1 of `coords`; a single column is plotted against the
/// point index. Points are colored by label when given.
pub fn scatter(coords: &Tensor, labels: Option<&[usize]>, title: &str) -> String {
    let n = coords.rows();
    let xy: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let r = coords.row(i);
            if r.len() >= 2 { (r[0], r[1]) } else { (i as f64, r[0]) }
        })
        .collect();
    let (x0, x1) = span(xy.iter().map(|p| p.0));
    let (y0, y1) = span(xy.iter().map(|p| p.1));
    let inner = SIZE - 2.0 * PAD;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r##"<path d="M{PAD} {PAD} V{b} H{b}" fill="none" stroke="#444" stroke-width="1"/>"##,
        b = SIZE - PAD
    );
    let title = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let _ = writeln!(out, r#"<text x="{PAD}" y="16" font-family="sans-serif" font-size="12">{title}</text>"#);
    for (i, (x, y)) in xy.iter().enumerate() {
        let cx = PAD + (x - x0) / (x1 - x0) * inner;
        let cy = SIZE - PAD - (y - y0) / (y1 - y0) * inner;
        let color = labels.map_or(PALETTE[0], |l| PALETTE[l[i] % PALETTE.len()]);
        let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{color}"/>"#);
    }
    out.push_str("</svg>\n");
    out
}
