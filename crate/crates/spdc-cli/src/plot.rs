//! Static SVG rendering of convergence traces: log10 of the duality gap
//! against passes, one polyline per trace. No external renderer; the file
//! is written directly.

use spdc::trace::ConvergenceTrace;

use crate::error::CliError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;
/// Gaps at or below zero are clamped here before taking the log.
const GAP_FLOOR: f64 = 1e-16;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Renders named traces into an SVG string; legend entries keep input order.
pub fn render_svg(traces: &[(String, ConvergenceTrace)]) -> Result<String, CliError> {
    if traces.is_empty() {
        return Err(CliError::usage("plot needs at least one trace"));
    }
    if traces.iter().any(|(_, t)| t.is_empty()) {
        return Err(CliError::Data("cannot plot an empty trace".into()));
    }

    let mut x_max = f64::MIN;
    let (mut y_min, mut y_max) = (f64::MAX, f64::MIN);
    for (_, trace) in traces {
        for r in trace.records() {
            let g = r.gap.max(GAP_FLOOR).log10();
            x_max = x_max.max(r.pass);
            y_min = y_min.min(g);
            y_max = y_max.max(g);
        }
    }
    if x_max <= 0.0 {
        x_max = 1.0;
    }
    let y_lo = (y_min - 0.5).floor();
    let y_hi = (y_max + 0.5).ceil();
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |pass: f64| MARGIN_L + pass / x_max * plot_w;
    let sy = |logg: f64| MARGIN_T + (y_hi - logg) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B
    ));

    // Ticks and labels.
    let x_ticks = 5usize;
    for k in 0..=x_ticks {
        let pass = x_max * k as f64 / x_ticks as f64;
        let x = sx(pass);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{pass:.0}</text>\n",
            HEIGHT - MARGIN_B + 18.0
        ));
    }
    let y_span = (y_hi - y_lo).max(1.0) as i64;
    let y_step = ((y_span + 5) / 6).max(1) as f64;
    let mut tick = y_lo;
    while tick <= y_hi + 1e-9 {
        let y = sy(tick);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{MARGIN_L}\" y2=\"{y:.1}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"12\">{tick:.0}</text>\n",
            MARGIN_L - 8.0,
            y + 4.0
        ));
        tick += y_step;
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">passes</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 16 {})\">log10 duality gap</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));

    // One polyline per trace.
    for (idx, (_, trace)) in traces.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let points: Vec<String> = trace
            .records()
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.pass), sy(r.gap.max(GAP_FLOOR).log10())))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
    }

    // Legend, input order.
    for (idx, (name, _)) in traces.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let y = MARGIN_T + 10.0 + idx as f64 * 18.0;
        let x = WIDTH - MARGIN_R - 170.0;
        svg.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            y - 10.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"12\">{}</text>\n",
            x + 18.0,
            xml_escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use spdc::trace::TraceRecord;

    fn trace(points: &[(f64, f64)]) -> ConvergenceTrace {
        let mut t = ConvergenceTrace::default();
        for &(pass, gap) in points {
            t.push(TraceRecord {
                pass,
                primal: gap,
                dual: 0.0,
                gap,
                dist_x: None,
                dist_y: None,
                wall_ms: None,
            });
        }
        t
    }

    #[test]
    fn polyline_has_one_vertex_per_record() {
        let t = trace(&[(0.0, 1.0), (1.0, 0.1), (2.0, 0.01), (3.0, 1e-3)]);
        let svg = render_svg(&[("solver".into(), t)]).unwrap();
        let points_attr = svg
            .lines()
            .find(|l| l.starts_with("<polyline"))
            .and_then(|l| l.split("points=\"").nth(1))
            .unwrap();
        let n_points = points_attr.split('"').next().unwrap().split(' ').count();
        assert_eq!(n_points, 4);
    }

    #[test]
    fn zero_gap_is_clamped_before_the_log() {
        let t = trace(&[(0.0, 1.0), (1.0, 0.0)]);
        let svg = render_svg(&[("s".into(), t)]).unwrap();
        assert!(svg.contains("<polyline"));
        // No NaN/inf coordinates leak into the path.
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn legend_keeps_input_order() {
        let svg = render_svg(&[
            ("alpha".into(), trace(&[(0.0, 1.0), (1.0, 0.5)])),
            ("beta".into(), trace(&[(0.0, 1.0), (1.0, 0.2)])),
        ])
        .unwrap();
        let a = svg.find(">alpha<").unwrap();
        let b = svg.find(">beta<").unwrap();
        assert!(a < b);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(render_svg(&[]).is_err());
        assert!(render_svg(&[("x".into(), ConvergenceTrace::default())]).is_err());
    }
}
