// SPDX-License-Identifier: Apache-2.0

//! Minimal deterministic SVG line plots of intensity series.

use std::fmt::Write;

use crate::io::fmt_float;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YScale {
    #[default]
    Linear,
    Log,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Renders `intensity(t)` of every labelled series. Identical input gives identical bytes.
pub fn intensity_svg(series: &[(String, TimeSeries)], scale: YScale) -> String {
    let map_y = |v: f64| match scale {
        YScale::Linear => Some(v),
        YScale::Log => (v > 0.0).then(|| v.log10()),
    };
    let mut t_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for (_, ts) in series {
        for i in 0..ts.len() {
            let r = ts.row(i);
            t_hi = t_hi.max(r[0]);
            if let Some(y) = map_y(r[1]) {
                y_lo = y_lo.min(y);
                y_hi = y_hi.max(y);
            }
        }
    }
    if !t_hi.is_finite() || t_hi <= 0.0 {
        t_hi = 1.0;
    }
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if scale == YScale::Linear {
        y_lo = y_lo.min(0.0);
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let px = |t: f64| MARGIN + (W - 2.0 * MARGIN) * t / t_hi;
    let py = |y: f64| H - MARGIN - (H - 2.0 * MARGIN) * (y - y_lo) / (y_hi - y_lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let ylabel = match scale {
        YScale::Linear => "intensity",
        YScale::Log => "log10 intensity",
    };
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">t</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(s, r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">{ylabel}</text>"#, H / 2.0, H / 2.0);
    for (v, y) in [(y_lo, H - MARGIN), (y_hi, MARGIN)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" font-size="10" text-anchor="end">{}</text>"#, MARGIN - 4.0, fmt_tick(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#, W - MARGIN, H - MARGIN + 14.0, fmt_tick(t_hi));

    for (k, (label, ts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = Vec::new();
        for i in 0..ts.len() {
            let r = ts.row(i);
            if let Some(y) = map_y(r[1]) {
                pts.push(format!("{:.2},{:.2}", px(r[0]), py(y)));
            }
        }
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, W - MARGIN - 120.0, W - MARGIN - 100.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, W - MARGIN - 95.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e4).round() / 1e4;
    fmt_float(if r == 0.0 { 0.0 } else { r })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burst() -> TimeSeries {
        let mut ts = TimeSeries::with_capacity(50);
        for i in 0..50 {
            let t = i as f64 * 0.2;
            ts.push([t, (-(t - 4.0) * (t - 4.0)).exp(), 0.0, 0.0, 0.0, 0.0]);
        }
        ts
    }

    #[test]
    fn deterministic_with_legend() {
        let input = vec![("exact".to_string(), burst()), ("a<b".to_string(), burst())];
        let a = intensity_svg(&input, YScale::Linear);
        assert_eq!(a, intensity_svg(&input, YScale::Linear));
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.contains(">exact<") && a.contains("a&lt;b"));
        assert_ne!(a, intensity_svg(&input, YScale::Log));
    }

    #[test]
    fn empty_series_gives_axes() {
        let svg = intensity_svg(&[("empty".into(), TimeSeries::with_capacity(0))], YScale::Log);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("<polyline"));
        assert!(svg.contains("<path"));
    }
}
