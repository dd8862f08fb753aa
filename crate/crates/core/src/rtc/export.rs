use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ConnectionAnalysis, MetricSeries, RtcError};
use crate::sanitize_file_name;

fn io(path: &Path, e: std::io::Error) -> RtcError {
    RtcError::Io(format!("{}: {e}", path.display()))
}

fn target(out_dir: &Path, analysis: &ConnectionAnalysis, series: &MetricSeries, ext: &str) -> PathBuf {
    out_dir.join(format!("{}-{}.{ext}", sanitize_file_name(&analysis.connection_id), series.metric.name()))
}

/// One `<connection>-<metric>.csv` per series, columns `t,metric,value`.
pub fn write_csv(out_dir: &Path, analysis: &ConnectionAnalysis) -> Result<Vec<PathBuf>, RtcError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let mut written = Vec::new();
    for series in analysis.all_series() {
        let path = target(out_dir, analysis, series, "csv");
        let mut text = String::from("t,metric,value\n");
        for (t, v) in &series.points {
            let _ = writeln!(text, "{t},{},{v}", series.metric.name());
        }
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

fn render_svg(title: &str, series: &MetricSeries) -> String {
    let (mut t0, mut t1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(t, v) in &series.points {
        t0 = t0.min(t);
        t1 = t1.max(t);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    if !t0.is_finite() {
        (t0, t1, v1) = (0.0, 1.0, 1.0);
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    if v1 <= v0 {
        v1 = v0 + 1.0;
    }
    let x = |t: f64| MARGIN + (t - t0) / (t1 - t0) * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - v0) / (v1 - v0) * (HEIGHT - 2.0 * MARGIN);
    let points: Vec<String> = series.points.iter().map(|&(t, v)| format!("{:.2},{:.2}", x(t), y(v))).collect();
    let escaped = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{escaped}</text>"#, WIDTH / 2.0);
    let (left, bottom, right, top) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" stroke="black" fill="none"/>"#);
    let _ = writeln!(svg, r#"<text x="{left}" y="{}" font-family="sans-serif" font-size="10">{t0:.1}</text>"#, bottom + 14.0);
    let _ = writeln!(svg, r#"<text x="{right}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10">{t1:.1} s</text>"#, bottom + 14.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{bottom}" text-anchor="end" font-family="sans-serif" font-size="10">{v0:.1}</text>"#, left - 4.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10">{v1:.1} {}</text>"#, left - 4.0, top + 4.0, series.metric.unit());
    let _ = writeln!(svg, r##"<polyline points="{}" stroke="#1f77b4" stroke-width="1.5" fill="none"/>"##, points.join(" "));
    svg.push_str("</svg>\n");
    svg
}

/// One `<connection>-<metric>.svg` line chart per series.
pub fn write_svg(out_dir: &Path, analysis: &ConnectionAnalysis) -> Result<Vec<PathBuf>, RtcError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let mut written = Vec::new();
    for series in analysis.all_series() {
        let path = target(out_dir, analysis, series, "svg");
        let title = format!("{} {}", analysis.connection_id, series.metric.name());
        std::fs::write(&path, render_svg(&title, series)).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
