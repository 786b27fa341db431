//! Minimal SVG 1.1 plots: event-probability curves and forest plots.

use std::fmt::Write;

use twinmeta::events::ProbabilityTable;
use twinmeta::model::{PooledEffect, StudyPair};
use twinmeta::statfn::normal_quantile;

const WIDTH: f64 = 640.0;
const COLORS: [&str; 4] = ["#1b6ca8", "#d1495b", "#2e933c", "#7a4fa3"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, height: f64) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Probability curves over τ/σ, one polyline per event.
pub fn curves_svg(table: &ProbabilityTable) -> String {
    let height = 420.0;
    let (left, right, top, bottom) = (60.0, WIDTH - 160.0, 40.0, height - 50.0);
    let xmin = table.ratios.first().copied().unwrap_or(0.0);
    let xmax = table.ratios.last().copied().unwrap_or(1.0).max(xmin + 1e-9);
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * (right - left);
    let sy = |y: f64| bottom - y * (bottom - top);
    let mut out = String::new();
    header(&mut out, height);
    let _ = writeln!(
        out,
        r#"<text x="{left}" y="24" font-size="14">Event probabilities, variance convention {}</text>"#,
        table.convention.tag()
    );
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for t in ticks(xmin, xmax) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 18.0,
            fmt_tick(t)
        );
    }
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = sy(v);
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 6.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">tau / sigma</text>"#,
        0.5 * (left + right),
        height - 12.0
    );
    for (j, event) in table.events.iter().enumerate() {
        let color = COLORS[j % COLORS.len()];
        let points: Vec<String> = table
            .ratios
            .iter()
            .zip(&table.rows)
            .map(|(&x, row)| format!("{:.2},{:.2}", sx(x), sy(row[j])))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 16.0 + 18.0 * j as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            right + 10.0,
            right + 30.0,
            right + 36.0,
            ly + 4.0,
            event.kind.tag()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Forest plot: one square and whisker per study, one diamond per pooled
/// effect. Log-scale pairs are drawn on the log scale with ratio labels.
pub fn forest_svg(pair: &StudyPair, pooled: &[(String, PooledEffect)], level: f64) -> String {
    let z = normal_quantile(0.5 + 0.5 * level).unwrap_or(1.959_963_984_540_054);
    let log = pair.is_log_scale();
    let rows = pair.k() + pooled.len();
    let row_h = 26.0;
    let (top, left, right) = (50.0, 170.0, WIDTH - 150.0);
    let height = top + row_h * (rows as f64 + 1.0) + 40.0;
    let bottom = top + row_h * rows as f64 + 10.0;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &pair.studies {
        lo = lo.min(s.estimate - z * s.std_err);
        hi = hi.max(s.estimate + z * s.std_err);
    }
    for (_, p) in pooled {
        lo = lo.min(p.interval.lo);
        hi = hi.max(p.interval.hi);
    }
    let null = 0.0;
    lo = lo.min(null);
    hi = hi.max(null);
    let pad = 0.05 * (hi - lo).max(1e-12);
    lo -= pad;
    hi += pad;
    let sx = |x: f64| left + (x - lo) / (hi - lo) * (right - left);
    let show = |v: f64| if log { v.exp() } else { v };

    let mut out = String::new();
    header(&mut out, height);
    let _ = writeln!(
        out,
        r#"<text x="10" y="24" font-size="14">{} ({})</text>"#,
        escape(&pair.pair_id),
        pair.measure.tag()
    );
    let _ = writeln!(
        out,
        r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{bottom:.2}" stroke="#888888" stroke-dasharray="4,3"/>"##,
        x = sx(null)
    );
    let mut y = top + row_h * 0.5;
    for s in &pair.studies {
        let (a, b, m) = (s.estimate - z * s.std_err, s.estimate + z * s.std_err, s.estimate);
        let _ = writeln!(
            out,
            r#"<text x="10" y="{:.2}">{}</text><line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/><rect x="{:.2}" y="{:.2}" width="8" height="8" fill="black"/><text x="{:.2}" y="{:.2}">{:.3} [{:.3}, {:.3}]</text>"#,
            y + 4.0,
            escape(&s.label),
            sx(a),
            sx(b),
            sx(m) - 4.0,
            y - 4.0,
            right + 8.0,
            y + 4.0,
            show(m),
            show(a),
            show(b)
        );
        y += row_h;
    }
    for (label, p) in pooled {
        let (a, b, m) = (p.interval.lo, p.interval.hi, p.estimate);
        let _ = writeln!(
            out,
            r##"<text x="10" y="{:.2}">{}</text><polygon points="{:.2},{y:.2} {:.2},{:.2} {:.2},{y:.2} {:.2},{:.2}" fill="#1b6ca8"/><text x="{:.2}" y="{:.2}">{:.3} [{:.3}, {:.3}]</text>"##,
            y + 4.0,
            escape(label),
            sx(a),
            sx(m),
            y - 7.0,
            sx(b),
            sx(m),
            y + 7.0,
            right + 8.0,
            y + 4.0,
            show(m),
            show(a),
            show(b)
        );
        y += row_h;
    }
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{bottom:.2}" x2="{right}" y2="{bottom:.2}" stroke="black"/>"#
    );
    for t in ticks(lo, hi) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 18.0,
            if log { format!("{:.3}", t.exp()) } else { fmt_tick(t) }
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use twinmeta::events::{probability_curves, EventKind, EventSpec, VarianceConvention};
    use twinmeta::freq::pooled_effect;
    use twinmeta::model::{EffectMeasure, EffectMethod};

    #[test]
    fn tick_values_are_round() {
        assert_eq!(ticks(0.0, 2.0), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(fmt_tick(0.30000000000000004), "0.3");
    }

    #[test]
    fn curves_label_convention() {
        let events: Vec<EventSpec> = EventKind::ALL.iter().map(|&k| EventSpec::new(k)).collect();
        let t = probability_curves(&events, &[0.0, 1.0, 2.0], VarianceConvention::Table1Tau2).unwrap();
        let svg = curves_svg(&t);
        assert!(svg.contains("paper-table1-tau2"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn forest_has_rows() {
        let p = StudyPair::from_estimates("P&Q", EffectMeasure::LogRateRatio, &[(-0.5, 0.18), (-0.2, 0.17)]).unwrap();
        let fe = pooled_effect(&p, EffectMethod::FE, 0.95).unwrap();
        let svg = forest_svg(&p, &[("FE".into(), fe)], 0.95);
        assert!(svg.contains("P&amp;Q"));
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert_eq!(svg.matches("<rect").count(), 2);
    }
}
