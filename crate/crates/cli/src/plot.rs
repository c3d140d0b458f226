//! Minimal SVG line charts. A failed plot is logged and otherwise ignored.

use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, Default)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Render to `path`, logging instead of returning on failure.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    axes: Axes,
    series: &[Series],
) {
    match render(title, x_label, y_label, axes, series) {
        Some(svg) => {
            if let Err(e) = std::fs::write(path, svg) {
                log::warn!("could not write plot {}: {e}", path.display());
            }
        }
        None => log::warn!("nothing plottable for {}", path.display()),
    }
}

fn render(
    title: &str,
    x_label: &str,
    y_label: &str,
    axes: Axes,
    series: &[Series],
) -> Option<String> {
    let tx = |v: f64| if axes.log_x { v.log10() } else { v };
    let ty = |v: f64| if axes.log_y { v.log10() } else { v };
    let mapped: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .map(|&(x, y)| (tx(x), ty(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let all = mapped.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        return None;
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (v, anchor, x, y) in [
        (x0, "start", px(x0), HEIGHT - MARGIN + 15.0),
        (x1, "end", px(x1), HEIGHT - MARGIN + 15.0),
    ] {
        let label = tick(v, axes.log_x);
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{label}</text>"#
        );
    }
    for (v, y) in [(y0, py(y0)), (y1, py(y1) + 10.0)] {
        let label = tick(v, axes.log_y);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" text-anchor="end">{label}</text>"#,
            MARGIN - 4.0
        );
    }
    for (i, (s, pts)) in series.iter().zip(&mapped).enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (k, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if k == 0 { "M" } else { "L" },
                px(x),
                py(y)
            );
        }
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            d.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 6.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
            escape(s.label)
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn tick(v: f64, log: bool) -> String {
    let v = if log { 10f64.powf(v) } else { v };
    format!("{v:.3e}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series() {
        let s = Series {
            label: "a<b",
            points: vec![(1.0, 2.0), (10.0, 20.0), (100.0, 0.0)],
        };
        let svg = render(
            "t",
            "x",
            "y",
            Axes {
                log_x: true,
                log_y: true,
            },
            &[s],
        )
        .unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("a&lt;b"));
        // the zero drops out on a log axis, two points remain
        assert_eq!(svg.matches('L').count(), 1);
    }

    #[test]
    fn empty_is_none() {
        let s = Series {
            label: "e",
            points: vec![],
        };
        assert!(render("t", "x", "y", Axes::default(), &[s]).is_none());
    }

    #[test]
    fn unwritable_path_does_not_panic() {
        let s = Series {
            label: "a",
            points: vec![(0.0, 1.0), (1.0, 2.0)],
        };
        line_chart(
            Path::new("/nonexistent/dir/p.svg"),
            "t",
            "x",
            "y",
            Axes::default(),
            &[s],
        );
    }
}
