//! Static SVG line chart of test accuracy against log10 λ.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::results::{write_text, AggregateRow};

const WIDTH: f64 = 680.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(λ, mean test accuracy)`, sorted by λ.
    pub points: Vec<(f64, f64)>,
}

/// One series per prior variant (and any other axis that varies), over the
/// λ values present in `cells`. Cells without a prior or with λ ≤ 0 are
/// skipped.
pub fn sweep_series(cells: &[AggregateRow]) -> Vec<Series> {
    let mut keys: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for c in cells {
        let k = &c.key;
        let Some(test) = &c.test else { continue };
        if k.prior == "none" || k.lambda <= 0.0 {
            continue;
        }
        let label = format!(
            "{} n={} depth={} {} ep={}",
            k.variant, k.n_half, k.depth, k.optimizer, k.epochs
        );
        match keys.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push((k.lambda, test.mean)),
            None => keys.push((label, vec![(k.lambda, test.mean)])),
        }
    }
    keys.into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect()
}

fn fmt_lambda(l: f64) -> String {
    format!("{l}")
}

pub fn render_svg(series: &[Series], title: &str) -> String {
    let lambdas: Vec<f64> = {
        let mut v: Vec<f64> = series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (lo, hi) = match (lambdas.first(), lambdas.last()) {
        (Some(a), Some(b)) if a < b => (a.log10(), b.log10()),
        (Some(a), _) => (a.log10() - 1.0, a.log10() + 1.0),
        _ => (-2.0, 2.0),
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |l: f64| LEFT + (l.log10() - lo) / (hi - lo) * plot_w;
    let y = |acc: f64| TOP + (100.0 - acc) / 100.0 * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    for acc in (0..=100).step_by(10) {
        let yy = y(acc as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#e0e0e0"/><text x="{:.1}" y="{:.1}" text-anchor="end">{acc}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    for &l in &lambdas {
        let xx = x(l);
        let _ = writeln!(
            s,
            r##"<line x1="{xx:.1}" y1="{:.1}" x2="{xx:.1}" y2="{:.1}" stroke="#888"/><text x="{xx:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            fmt_lambda(l)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">λ (log scale)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">test accuracy (%)</text>"#,
        TOP + plot_h / 2.0
    );
    for (i, series) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .map(|&(l, a)| format!("{:.1},{:.1}", x(l), y(a)))
            .collect();
        let _ = writeln!(
            s,
            r#"<g class="series" data-label="{}"><polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(&series.label),
            pts.join(" ")
        );
        for &(l, a) in &series.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"><title>λ={} acc={a:.2}</title></circle>"#,
                x(l),
                y(a),
                fmt_lambda(l)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Writes the sweep chart for the prior cells of `cells`.
pub fn emit_sweep_plot(cells: &[AggregateRow], path: &Path) -> Result<()> {
    let series = sweep_series(cells);
    if series.is_empty() {
        return Err(HarnessError::config("no prior cells with λ > 0 to plot"));
    }
    write_text(path, &render_svg(&series, "Test accuracy vs λ"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_group_and_marker_per_series_point() {
        let series = vec![
            Series {
                label: "erbp_l1".into(),
                points: vec![(0.01, 60.0), (1.0, 90.0), (30.0, 100.0)],
            },
            Series {
                label: "erbp_l2".into(),
                points: vec![(0.01, 55.0), (30.0, 100.0)],
            },
        ];
        let svg = render_svg(&series, "t");
        assert_eq!(svg.matches(r#"<g class="series""#).count(), 2);
        assert_eq!(svg.matches("<circle").count(), 5);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn x_axis_is_logarithmic() {
        let series = vec![Series {
            label: "a".into(),
            points: vec![(0.01, 0.0), (1.0, 50.0), (100.0, 100.0)],
        }];
        let svg = render_svg(&series, "t");
        let mid = LEFT + (WIDTH - LEFT - RIGHT) / 2.0;
        assert!(svg.contains(&format!(r#"cx="{mid:.1}""#)));
    }
}
