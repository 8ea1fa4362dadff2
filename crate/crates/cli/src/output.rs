//! File writers: metric and iteration CSVs, JSON documents, SVG scatter plots.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use softqd::squad::IterationRecord;

use crate::error::{CliError, CliResult};

pub const METRICS_HEADER: &str = "epoch,qd_score,coverage,vendi,qvs,mean_obj,max_obj,s_tilde";

/// One row of `metrics_<seed>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub qd_score: f64,
    /// Percent of metric cells occupied.
    pub coverage: f64,
    pub vendi: f64,
    pub qvs: f64,
    pub mean_obj: f64,
    pub max_obj: f64,
    pub s_tilde: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Runtime(format!("writing {}: {e}", path.display()))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path.display().to_string(), e))
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> CliResult<()> {
    if rows.is_empty() {
        return write_text(path, &format!("{METRICS_HEADER}\n"));
    }
    write_csv(path, rows)
}

pub fn write_iterations_csv(path: &Path, rows: &[IterationRecord]) -> CliResult<()> {
    if rows.is_empty() {
        return write_text(path, "epoch,objective_tilde,mean_quality,max_quality,wall_time_s\n");
    }
    write_csv(path, rows)
}

pub fn read_metrics_csv(path: &Path) -> CliResult<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| csv_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let ctx = path.display().to_string();
    let mut f = fs::File::create(path).map_err(|e| CliError::io(&ctx, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(&ctx, e))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(&format!("creating {}", path.display()), e))
}

const SVG_SIZE: f64 = 480.0;
const SVG_MARGIN: f64 = 40.0;

// Piecewise-linear approximation of the viridis colormap.
const RAMP: [(f64, [u8; 3]); 5] = [
    (0.0, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let k = RAMP.windows(2).position(|w| t <= w[1].0).unwrap_or(RAMP.len() - 2);
    let ((t0, c0), (t1, c1)) = (RAMP[k], RAMP[k + 1]);
    let s = (t - t0) / (t1 - t0);
    let ch = |i: usize| (c0[i] as f64 + s * (c1[i] as f64 - c0[i] as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

/// Scatter of the first two descriptor coordinates over `[0, 1]^2`, colored by quality.
pub fn scatter_svg(points: &[(f64, f64, f64)], title: &str) -> String {
    let (qmin, qmax) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.2), hi.max(p.2))
    });
    let span = if qmax > qmin { qmax - qmin } else { 1.0 };
    let inner = SVG_SIZE - 2.0 * SVG_MARGIN;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
        SVG_SIZE
    ));
    s.push_str(&format!(
        "<rect width=\"{SVG_SIZE}\" height=\"{SVG_SIZE}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<rect x=\"{SVG_MARGIN}\" y=\"{SVG_MARGIN}\" width=\"{inner}\" height=\"{inner}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        SVG_SIZE / 2.0,
        SVG_MARGIN / 2.0 + 5.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">b1</text>\n",
        SVG_SIZE / 2.0,
        SVG_SIZE - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">b2</text>\n",
        SVG_SIZE / 2.0
    ));
    for &(x, y, q) in points {
        let cx = SVG_MARGIN + x.clamp(0.0, 1.0) * inner;
        let cy = SVG_MARGIN + (1.0 - y.clamp(0.0, 1.0)) * inner;
        s.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
            ramp((q - qmin) / span)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">quality {:.3} to {:.3}</text>\n",
        SVG_SIZE - SVG_MARGIN,
        SVG_SIZE - 12.0,
        if points.is_empty() { 0.0 } else { qmin },
        if points.is_empty() { 0.0 } else { qmax }
    ));
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
