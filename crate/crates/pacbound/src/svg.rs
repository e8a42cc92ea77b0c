//! Self-contained SVG charts with a fixed style.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let _ = write!(
        out,
        "<path d=\"M{x0} {y1} L{x0} {y0} L{x1} {y0}\" fill=\"none\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 20.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

/// Evenly spaced `[lo, hi]` with a little headroom; degenerate ranges widen.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.08 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn y_ticks(out: &mut String, lo: f64, hi: f64, label: impl Fn(f64) -> String) {
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = HEIGHT - BOTTOM - (HEIGHT - BOTTOM - TOP) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{LEFT}\" y2=\"{y:.1}\" stroke=\"black\"/>\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            escape(&label(v))
        );
    }
}

/// Median `tau` against `delta` on a logarithmic `delta` axis, one marker
/// per point. Points need positive `delta`.
pub fn tau_vs_delta(title: &str, points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "delta (log scale)", "median tau");
    let xs: Vec<f64> = points.iter().map(|(d, _)| -d.log10()).collect();
    let (x_lo, x_hi) =
        padded(xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (y_lo, y_hi) = padded(
        points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let px = |x: f64| LEFT + (WIDTH - LEFT - RIGHT) * (x - x_lo) / (x_hi - x_lo);
    let py = |y: f64| HEIGHT - BOTTOM - (HEIGHT - BOTTOM - TOP) * (y - y_lo) / (y_hi - y_lo);
    y_ticks(&mut out, y_lo, y_hi, |v| format!("{v:.4e}"));
    for (&x, &(d, _)) in xs.iter().zip(points) {
        let _ = writeln!(
            out,
            "<line x1=\"{0:.1}\" y1=\"{1}\" x2=\"{0:.1}\" y2=\"{2}\" stroke=\"black\"/>\
             <text x=\"{0:.1}\" y=\"{3}\" text-anchor=\"middle\">{4:e}</text>",
            px(x),
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 5.0,
            HEIGHT - BOTTOM + 20.0,
            d
        );
    }
    if !points.is_empty() {
        let path: Vec<String> = xs.iter().zip(points).map(|(&x, p)| format!("{:.1} {:.1}", px(x), py(p.1))).collect();
        let _ = writeln!(out, "<path d=\"M{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>", path.join(" L"));
    }
    for (&x, p) in xs.iter().zip(points) {
        let _ = writeln!(
            out,
            "<circle class=\"marker\" cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"#1f77b4\"/>",
            px(x),
            py(p.1)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One bar per finite positive value on a log10 axis.
pub fn quantity_bars(title: &str, bars: &[(String, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "quantity", "value (log10)");
    let shown: Vec<&(String, f64)> = bars.iter().filter(|(_, v)| v.is_finite() && *v > 0.0).collect();
    let logs: Vec<f64> = shown.iter().map(|(_, v)| v.log10()).collect();
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil().max(1.0);
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min).floor().min(hi - 1.0).min(0.0);
    y_ticks(&mut out, lo, hi, |v| format!("1e{v:.1}"));
    let slot = (WIDTH - LEFT - RIGHT) / shown.len().max(1) as f64;
    for (i, ((name, _), &l)) in shown.iter().zip(&logs).enumerate() {
        let x = LEFT + slot * (i as f64 + 0.15);
        let top = HEIGHT - BOTTOM - (HEIGHT - BOTTOM - TOP) * (l - lo) / (hi - lo);
        let _ = writeln!(
            out,
            "<rect class=\"bar\" x=\"{x:.1}\" y=\"{top:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#ff7f0e\"/>\
             <text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>",
            slot * 0.7,
            HEIGHT - BOTTOM - top,
            x + slot * 0.35,
            HEIGHT - BOTTOM + 15.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_sweep_has_four_markers() {
        let svg = tau_vs_delta("tau", &[(1e-1, 10.0), (1e-2, 14.0), (1e-3, 19.0), (1e-4, 23.0)]);
        assert_eq!(svg.matches("class=\"marker\"").count(), 4);
        assert!(svg.contains("log scale") && svg.contains("1e-4"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg, tau_vs_delta("tau", &[(1e-1, 10.0), (1e-2, 14.0), (1e-3, 19.0), (1e-4, 23.0)]));
    }

    #[test]
    fn bars_skip_infinite_values() {
        let bars = vec![("c_lb".to_string(), 8.0), ("exact".to_string(), f64::INFINITY), ("pedel".into(), 1e4)];
        let svg = quantity_bars("x", &bars);
        assert_eq!(svg.matches("class=\"bar\"").count(), 2);
        assert!(quantity_bars("empty", &[]).ends_with("</svg>\n"));
    }
}
