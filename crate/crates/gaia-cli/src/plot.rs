//! Minimal SVG emission: latency line series plus five-number box summaries.
//! Plots are a convenience view over the CSVs; nothing depends on them.

use std::fmt::Write as _;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 3] = ["#e08214", "#1a9850", "#2166ac"];

fn poly_points(values: &[f64], x0: f64, x1: f64, y_of: impl Fn(f64) -> f64) -> String {
    let n = values.len().max(2) as f64;
    let mut points = String::new();
    for (i, v) in values.iter().enumerate() {
        let x = x0 + (x1 - x0) * i as f64 / (n - 1.0);
        let _ = write!(points, "{:.1},{:.1} ", x, y_of(*v));
    }
    points
}

fn five_numbers(values: &[f64]) -> [f64; 5] {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let rank = |q: f64| {
        let r = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        sorted[r - 1]
    };
    [
        sorted[0],
        rank(0.25),
        rank(0.50),
        rank(0.75),
        sorted[sorted.len() - 1],
    ]
}

/// Line chart of each mode's latency series plus a box summary per mode.
pub fn latency_svg(series: &[(&str, &[f64])]) -> String {
    let max_latency = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .cloned()
        .fold(1.0f64, f64::max);
    let line_x1 = WIDTH * 0.62;
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v / max_latency);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\"><rect width=\"100%\" height=\"100%\" fill=\"white\"/>"
    );
    let _ = write!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{0}\" x2=\"{line_x1}\" y2=\"{0}\" stroke=\"black\"/>\
         <line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{0}\" stroke=\"black\"/>",
        HEIGHT - MARGIN
    );
    let _ = write!(
        svg,
        "<text x=\"{MARGIN}\" y=\"{:.1}\" font-size=\"11\">{:.0} ms</text>",
        MARGIN - 8.0,
        max_latency
    );

    for (i, (label, values)) in series.iter().enumerate() {
        if values.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>",
            poly_points(values, MARGIN, line_x1, y_of)
        );
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{label}</text>",
            MARGIN + 4.0,
            MARGIN + 16.0 + 16.0 * i as f64
        );

        // box summary on the right panel
        let [lo, q1, q2, q3, hi] = five_numbers(values);
        let cx = line_x1 + 60.0 + 90.0 * i as f64;
        let half = 18.0;
        let _ = write!(
            svg,
            "<line x1=\"{cx}\" y1=\"{:.1}\" x2=\"{cx}\" y2=\"{:.1}\" stroke=\"{color}\"/>\
             <rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{color}\" fill-opacity=\"0.35\" stroke=\"{color}\"/>\
             <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{label}</text>",
            y_of(lo),
            y_of(hi),
            cx - half,
            y_of(q3),
            2.0 * half,
            (y_of(q1) - y_of(q3)).max(1.0),
            cx - half,
            y_of(q2),
            cx + half,
            y_of(q2),
            cx,
            HEIGHT - MARGIN + 16.0
        );
    }
    svg.push_str("</svg>");
    svg
}
