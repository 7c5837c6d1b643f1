//! Minimal bar chart writer for the normalised-fitness report.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
/// Values below this are drawn at the floor of a log axis.
const LOG_FLOOR: f64 = 0.01;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `(label, value)` bars. A log10 axis is used once the largest
/// value exceeds 50, since optimistic formulas are orders of magnitude worse
/// than the rest.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let max = bars.iter().map(|b| b.1).fold(1.0, f64::max);
    let log = max > 50.0;
    let (lo, hi) = if log {
        (LOG_FLOOR.log10(), max.log10().ceil())
    } else {
        (0.0, max * 1.1)
    };
    let plot_h = HEIGHT - TOP - BOTTOM;
    let plot_w = WIDTH - LEFT - RIGHT;
    let y = |v: f64| {
        let t = if log { v.max(LOG_FLOOR).log10() } else { v };
        TOP + plot_h * (1.0 - (t - lo) / (hi - lo))
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let axis = if log { "normalised fitness (log scale)" } else { "normalised fitness" };
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{axis}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let ticks: Vec<f64> = if log {
        (lo as i32..=hi as i32).map(|e| 10f64.powi(e)).collect()
    } else {
        (0..=5).map(|i| hi * i as f64 / 5.0).collect()
    };
    for t in ticks {
        let ty = y(t);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{ty:.1}" x2="{}" y2="{ty:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            ty + 4.0,
            fmt_value(t)
        );
    }
    let slot = plot_w / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = LEFT + slot * i as f64 + slot * 0.15;
        let w = slot * 0.7;
        let top = y(*v);
        let _ = writeln!(
            out,
            r##"<rect x="{x:.1}" y="{top:.1}" width="{w:.1}" height="{:.1}" fill="#4a78b0"/>"##,
            (HEIGHT - BOTTOM - top).max(0.0)
        );
        let cx = x + w / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            top - 4.0,
            fmt_value(*v)
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 18.0,
            escape(label)
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        HEIGHT - BOTTOM,
        WIDTH - RIGHT,
        HEIGHT - BOTTOM
    );
    out.push_str("</svg>\n");
    out
}

fn fmt_value(v: f64) -> String {
    if v >= 1000.0 {
        format!("{v:.3e}")
    } else if v >= 10.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_rect_per_bar() {
        let bars = vec![("eq1".to_string(), 1.0), ("a<b".to_string(), 3.5)];
        let svg = bar_chart("t", &bars);
        assert_eq!(svg.matches("<rect x=").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("log scale"));
        let big = bar_chart("t", &[("x".into(), 1.0), ("y".into(), 1e6)]);
        assert!(big.contains("log scale"));
    }
}
