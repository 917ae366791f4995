//! Self-contained SVG plots: log-log rate plots and time series.

use crate::diagnostics::RateReport;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlotError {
    #[error("nothing to plot")]
    Empty,
    #[error("series `{0}` needs at least two points")]
    TooFewPoints(String),
    #[error("series `{label}` has a non-plottable value ({value})")]
    BadValue { label: String, value: f64 },
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, xticks: &[(f64, String)], yticks: &[(f64, String)], xlabel: &str, ylabel: &str) {
    let (x0, x1) = (f.px(f.x.0), f.px(f.x.1));
    let (y0, y1) = (f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(out, r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for (v, label) in xticks {
        let x = f.px(*v);
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 16.0, escape(label));
    }
    for (v, label) in yticks {
        let y = f.py(*v);
        let _ = writeln!(out, r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, escape(label));
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 16.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn decade_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    (lo.ceil() as i32..=hi.floor() as i32).map(|k| (k as f64, format!("1e{k}"))).collect()
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut ticks = Vec::new();
    let mut k = (lo / step).ceil();
    while k * step <= hi + 1e-9 * span {
        let v = k * step;
        ticks.push((v, format!("{}", (v / step).round() * step).trim_end_matches(".0").to_string()));
        k += 1.0;
    }
    ticks
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, dash: Option<&str>) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y))).collect();
    let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
    let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, coords.join(" "));
}

fn legend(out: &mut String, entries: &[(String, &str, Option<&str>)]) {
    for (i, (label, color, dash)) in entries.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = WIDTH - RIGHT - 170.0;
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#, x + 24.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 30.0, y + 4.0, escape(label));
    }
}

/// Log-log plot of a rate report: samples (hollow when excluded from the fit),
/// the fitted line and guide lines of slope 1/2 and 1/6 through the first sample.
pub fn rate_plot(report: &RateReport, title: &str) -> Result<String, PlotError> {
    if report.samples.is_empty() {
        return Err(PlotError::Empty);
    }
    if report.samples.len() < 2 {
        return Err(PlotError::TooFewPoints("residual".into()));
    }
    for &(e, r) in &report.samples {
        for v in [e, r] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlotError::BadValue { label: "residual".into(), value: v });
            }
        }
    }
    let logs: Vec<(f64, f64)> = report.samples.iter().map(|(e, r)| (e.log10(), r.log10())).collect();
    let (xmin, xmax) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (ymin, ymax) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let f = Frame { x: ((xmin - 0.25).floor(), (xmax + 0.25).ceil()), y: ((ymin - 0.25).floor(), (ymax + 0.25).ceil()) };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, &decade_ticks(f.x.0, f.x.1), &decade_ticks(f.y.0, f.y.1), "eps", "residual norm");
    let clip = |pts: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        // Keep guide lines inside the frame by clipping in x where they leave it in y.
        let (a, b) = (pts[0], pts[1]);
        let s = (b.1 - a.1) / (b.0 - a.0);
        let y_at = |x: f64| a.1 + s * (x - a.0);
        let x_at = |y: f64| a.0 + (y - a.1) / s;
        let mut lo = f.x.0;
        let mut hi = f.x.1;
        for bound in [f.y.0, f.y.1] {
            let x = x_at(bound);
            if x > lo && x < hi {
                if y_at(lo) < f.y.0 || y_at(lo) > f.y.1 {
                    lo = x;
                } else {
                    hi = x;
                }
            }
        }
        vec![(lo, y_at(lo)), (hi, y_at(hi))]
    };
    let (gx, gy) = logs[0];
    let guides = [(0.5, "slope 1/2", "#7f7f7f", "6 4"), (1.0 / 6.0, "slope 1/6", "#bcbd22", "2 3")];
    let mut entries = Vec::new();
    for (s, label, color, dash) in guides {
        polyline(&mut out, &f, &clip(vec![(gx, gy), (gx + 1.0, gy + s)]), color, Some(dash));
        entries.push((label.to_string(), color, Some(dash)));
    }
    let (e_hi, e_lo) = report.fit_range();
    let fit = |x: f64| report.slope * x + report.intercept / std::f64::consts::LN_10;
    polyline(&mut out, &f, &[(e_lo.log10(), fit(e_lo.log10())), (e_hi.log10(), fit(e_hi.log10()))], COLORS[1], None);
    entries.insert(0, (format!("fit, slope {:.3}", report.slope), COLORS[1], None));
    for (i, (x, y)) in logs.iter().enumerate() {
        let fill = if report.used.contains(&i) { COLORS[0] } else { "white" };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{fill}" stroke="{}"/>"#,
            f.px(*x),
            f.py(*y),
            COLORS[0]
        );
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

/// One named curve of a time-series plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Line plot of one or more series on linear axes (`log_y` plots `log10 y`).
pub fn series_plot(series: &[Series], title: &str, xlabel: &str, ylabel: &str, log_y: bool) -> Result<String, PlotError> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty);
    }
    let mut mapped = Vec::new();
    for s in series {
        if s.points.len() < 2 {
            return Err(PlotError::TooFewPoints(s.label.clone()));
        }
        let mut pts = Vec::with_capacity(s.points.len());
        for &(x, y) in &s.points {
            let y = if log_y { y.log10() } else { y };
            if !x.is_finite() || !y.is_finite() {
                return Err(PlotError::BadValue { label: s.label.clone(), value: if x.is_finite() { y } else { x } });
            }
            pts.push((x, y));
        }
        mapped.push(pts);
    }
    let all = mapped.iter().flatten();
    let (xmin, xmax, ymin, ymax) = all.fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p.0), a.1.max(p.0), a.2.min(p.1), a.3.max(p.1))
    });
    let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5 * lo.abs().max(1.0), hi + 0.5 * hi.abs().max(1.0)) };
    let (xmin, xmax) = pad(xmin, xmax);
    let (ymin, ymax) = pad(ymin, ymax);
    let ypad = 0.05 * (ymax - ymin);
    let f = Frame { x: (xmin, xmax), y: (ymin - ypad, ymax + ypad) };
    let yticks = if log_y { decade_ticks(f.y.0, f.y.1) } else { nice_ticks(f.y.0, f.y.1) };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, &nice_ticks(f.x.0, f.x.1), &yticks, xlabel, ylabel);
    let mut entries = Vec::new();
    for (i, (s, pts)) in series.iter().zip(&mapped).enumerate() {
        let color = COLORS[i % COLORS.len()];
        polyline(&mut out, &f, pts, color, None);
        entries.push((s.label.clone(), color, None));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::fit_rate;

    #[test]
    fn rate_plot_is_standalone() {
        let r = fit_rate(&[(1e-2, 1e-1), (1e-3, 3e-2), (1e-4, 1e-2)], true).unwrap();
        let svg = rate_plot(&r, "rates").unwrap();
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("href"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("slope 1/2") && svg.contains("slope 1/6"));
    }

    #[test]
    fn single_point_series_rejected() {
        let s = Series { label: "a".into(), points: vec![(0.0, 1.0)] };
        assert_eq!(series_plot(&[s], "t", "x", "y", false), Err(PlotError::TooFewPoints("a".into())));
        assert_eq!(series_plot(&[], "t", "x", "y", false), Err(PlotError::Empty));
    }

    #[test]
    fn escapes_text() {
        let s = Series { label: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] };
        let svg = series_plot(&[s], "x & y", "t", "v", false).unwrap();
        assert!(svg.contains("a&lt;b") && svg.contains("x &amp; y"));
    }
}
