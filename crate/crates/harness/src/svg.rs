//! Minimal self-contained SVG charts: line panels and a scatter panel.

use std::fmt::Write;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub enum PanelKind {
    Lines,
    Scatter,
}

#[derive(Clone, Debug)]
pub struct Panel {
    pub title: String,
    pub kind: PanelKind,
    pub series: Vec<Series>,
    /// Dashed horizontal reference line.
    pub reference: Option<f64>,
    /// Draw the diagonal `y = x`.
    pub diagonal: bool,
}

fn bounds(panel: &Panel) -> (f64, f64, f64, f64) {
    let pts = panel.series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if let Some(r) = panel.reference {
        y0 = y0.min(r);
        y1 = y1.max(r);
    }
    if panel.diagonal {
        let (lo, hi) = (x0.min(y0), x1.max(y1));
        (x0, x1, y0, y1) = (lo, hi, lo, hi);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    (x0, x1, y0, y1)
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn draw_panel(out: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let (x0, x1, y0, y1) = bounds(panel);
    let (w, h) = (PANEL_W - 1.5 * MARGIN, PANEL_H - 1.5 * MARGIN);
    let (left, top) = (ox + MARGIN, oy + MARGIN * 0.75);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * w;
    let sy = |y: f64| top + h - (y - y0) / (y1 - y0) * h;

    let _ = writeln!(out, r##"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"##, left + w / 2.0, oy + 16.0, escape(&panel.title));
    let _ = writeln!(out, r##"<rect x="{left:.1}" y="{top:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##);
    for (v, anchor_x, anchor_y) in [(y0, left - 4.0, top + h), (y1, left - 4.0, top + 8.0)] {
        let _ = writeln!(out, r##"<text x="{anchor_x:.1}" y="{anchor_y:.1}" font-size="9" text-anchor="end">{}</text>"##, fmt_tick(v));
    }
    for (v, ax, anchor) in [(x0, left, "start"), (x1, left + w, "end")] {
        let _ = writeln!(out, r##"<text x="{ax:.1}" y="{:.1}" font-size="9" text-anchor="{anchor}">{}</text>"##, top + h + 12.0, fmt_tick(v));
    }
    if let Some(r) = panel.reference {
        let _ = writeln!(out, r##"<line x1="{left:.1}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#000" stroke-dasharray="4 3"/>"##, sy(r), left + w);
    }
    if panel.diagonal {
        let _ = writeln!(out, r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#888" stroke-dasharray="4 3"/>"##, sx(x0), sy(x0), sx(x1), sy(x1));
    }
    for (i, s) in panel.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts = s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite());
        match panel.kind {
            PanelKind::Lines => {
                let path: Vec<String> = pts.map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
                let _ = writeln!(out, r##"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"##, path.join(" "));
            }
            PanelKind::Scatter => {
                for &(x, y) in pts {
                    let _ = writeln!(out, r##"<circle cx="{:.1}" cy="{:.1}" r="2" fill="{color}" fill-opacity="0.7"/>"##, sx(x), sy(y));
                }
            }
        }
        let ly = top + 10.0 + 11.0 * i as f64;
        let _ = writeln!(out, r##"<text x="{:.1}" y="{ly:.1}" font-size="9" fill="{color}" text-anchor="end">{}</text>"##, left + w - 4.0, escape(&s.label));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Lays the panels out in a row.
pub fn render(title: &str, panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let height = PANEL_H + 24.0;
    let mut out = String::new();
    let _ = writeln!(out, r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"##);
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    let _ = writeln!(out, r##"<text x="8" y="14" font-size="12" font-weight="bold">{}</text>"##, escape(title));
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, PANEL_W * i as f64, 24.0);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_document() {
        let p = Panel {
            title: "b<1>".into(),
            kind: PanelKind::Lines,
            series: vec![Series { label: "a".into(), points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)] }],
            reference: Some(2.0),
            diagonal: false,
        };
        let svg = render("t", &[p.clone(), Panel { kind: PanelKind::Scatter, diagonal: true, ..p }]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("b&lt;1&gt;"));
        assert!(!svg.contains("NaN"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
