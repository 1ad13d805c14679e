//! Minimal static SVG charts.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn px(x: f64) -> f64 {
    LEFT + x * (W - LEFT - RIGHT)
}

fn py(y: f64) -> f64 {
    H - BOTTOM - y * (H - TOP - BOTTOM)
}

fn unit_axes(s: &mut String, x_label: &str, y_label: &str, x_ticks: bool) {
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            px(0.0),
            py(v),
            px(1.0),
            py(v)
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, px(0.0) - 6.0, py(v) + 4.0);
        if x_ticks {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"#, px(v), py(0.0) + 18.0);
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        px(0.0),
        py(1.0),
        px(1.0) - px(0.0),
        py(0.0) - py(1.0)
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (px(0.0) + px(1.0)) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (py(0.0) + py(1.0)) / 2.0,
        (py(0.0) + py(1.0)) / 2.0,
        escape(y_label)
    );
}

/// ROC curves on the unit square with a chance diagonal.
pub fn roc_plot(title: &str, curves: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut s = header(title);
    unit_axes(&mut s, "false positive rate", "true positive rate", true);
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for (i, (label, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        let ly = py(0.0) - 14.0 - 16.0 * (curves.len() - 1 - i) as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            px(0.55),
            px(0.62)
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, px(0.64), ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

/// Bars of `mean` with `± std` whiskers, on a [0, 1] axis.
pub fn accuracy_bars(title: &str, bars: &[(String, f64, f64)]) -> String {
    let mut s = header(title);
    unit_axes(&mut s, "architecture", "accuracy", false);
    let n = bars.len().max(1) as f64;
    let slot = 1.0 / n;
    for (i, (label, mean, std)) in bars.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let x0 = (i as f64 + 0.2) * slot;
        let x1 = (i as f64 + 0.8) * slot;
        let xm = (i as f64 + 0.5) * slot;
        let m = mean.clamp(0.0, 1.0);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.7"/>"#,
            px(x0),
            py(m),
            px(x1) - px(x0),
            py(0.0) - py(m)
        );
        let (lo, hi) = ((mean - std).clamp(0.0, 1.0), (mean + std).clamp(0.0, 1.0));
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
            px(xm),
            py(lo),
            px(xm),
            py(hi)
        );
        for y in [lo, hi] {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
                px(xm) - 6.0,
                py(y),
                px(xm) + 6.0,
                py(y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{} {:.2}%</text>"#,
            px(xm),
            py(hi) - 6.0,
            escape(label),
            mean * 100.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_are_closed_and_escaped() {
        let roc = roc_plot("a<b", &[("x&y".into(), vec![(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)])]);
        assert!(roc.starts_with("<svg") && roc.ends_with("</svg>\n"));
        assert!(roc.contains("a&lt;b") && roc.contains("x&amp;y"));
        assert_eq!(roc.matches("<polyline").count(), 1);
        let bars = accuracy_bars("acc", &[("CFAN".into(), 0.95, 0.01), ("CNN1D".into(), 0.9, 0.2)]);
        assert_eq!(bars.matches("fill-opacity").count(), 2);
        assert!(bars.contains("CFAN 95.00%"));
    }
}
