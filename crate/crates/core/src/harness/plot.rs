//! Minimal SVG line charts.

use std::fmt::Write;

use super::run::{RunReport, TrainedAgent};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    (x0, x1, y0, y1)
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1, y0, y1) = bounds(series);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" stroke="black" fill="none"/>"#
    );
    if y0 < 0.0 && y1 > 0.0 {
        let z = sy(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{z:.2}" x2="{right}" y2="{z:.2}" stroke="#999" stroke-dasharray="4 3"/>"##
        );
    }
    for (v, y) in [(y0, bottom), (y1, top)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 4.0,
            y + 4.0,
            tick(v)
        );
    }
    for (v, x) in [(x0, left), (x1, right)] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            bottom + 14.0,
            tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !ser.points.is_empty() {
            let d: Vec<String> = ser
                .points
                .iter()
                .enumerate()
                .map(|(k, &(x, y))| format!("{}{:.2},{:.2}", if k == 0 { 'M' } else { 'L' }, sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
                d.join(" ")
            );
        }
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly:.2}" fill="{color}">{}</text>"#,
            right - 120.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Per-step reward and its 10-step moving average.
pub fn reward_curve(agent: &TrainedAgent) -> String {
    let r = agent.rewards();
    let raw: Vec<(f64, f64)> = r.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect();
    let ma: Vec<(f64, f64)> = (10..=r.len())
        .map(|i| (i as f64, r[i - 10..i].iter().sum::<f64>() / 10.0))
        .collect();
    line_chart(
        &format!("{} training reward ({})", agent.kind.label(), agent.scenario),
        "step",
        "reward",
        &[
            Series {
                label: "reward".into(),
                points: raw,
            },
            Series {
                label: "10-step mean".into(),
                points: ma,
            },
        ],
    )
}

/// Running reliability `1 - outages so far / frames so far` per slice.
pub fn reliability_curve(report: &RunReport) -> String {
    let series: Vec<Series> = report
        .slices
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut k = 0usize;
            let points = report
                .trace
                .iter()
                .enumerate()
                .map(|(n, r)| {
                    k += usize::from(r.outcome.phi[j]);
                    ((n + 1) as f64, 1.0 - k as f64 / (n + 1) as f64)
                })
                .collect();
            Series {
                label: s.name.clone(),
                points,
            }
        })
        .collect();
    line_chart(
        &format!("{} reliability ({})", report.controller.label(), report.scenario),
        "frame",
        "reliability",
        &series,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_wellformed() {
        let svg = line_chart(
            "t <1>",
            "x",
            "y",
            &[Series {
                label: "a".into(),
                points: vec![(0.0, -1.0), (1.0, 2.0)],
            }],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("t &lt;1&gt;"));
        assert!(svg.contains("stroke-dasharray"));
        let empty = line_chart("e", "x", "y", &[]);
        assert!(empty.contains("</svg>"));
    }
}
