//! Machine-readable outputs: variance-series CSV/JSON, fit reports, run
//! manifests, and an optional SVG plot.
//!
//! All writers are byte-deterministic: fixed column order, shortest
//! round-trip float formatting, no timestamps.

use crate::analysis::PowerLawFit;
use crate::config::RunConfig;
use crate::engine::VarianceSeries;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// CSV schema: `t,variance,stderr,n_trajectories`, one row per sample time.
pub fn series_to_csv(series: &VarianceSeries) -> String {
    let mut out = String::from("t,variance,stderr,n_trajectories\n");
    for i in 0..series.times.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            series.times[i], series.variance[i], series.stderr[i], series.n_effective
        );
    }
    out
}

pub fn write_series_csv(path: &Path, series: &VarianceSeries) -> Result<()> {
    std::fs::write(path, series_to_csv(series))?;
    Ok(())
}

pub fn write_series_json(path: &Path, series: &VarianceSeries) -> Result<()> {
    let mut text = serde_json::to_string_pretty(series)
        .map_err(|e| Error::numerical(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses the 4-column series CSV written by [`write_series_csv`].
pub fn read_series_csv(path: &Path) -> Result<VarianceSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "t,variance,stderr,n_trajectories" => {}
        other => {
            return Err(Error::config(format!(
                "unexpected series CSV header: {other:?}"
            )))
        }
    }
    let mut series = VarianceSeries {
        times: Vec::new(),
        variance: Vec::new(),
        stderr: Vec::new(),
        n_effective: 0,
    };
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::config(format!(
                "series CSV line {}: expected 4 columns, found {}",
                lineno + 2,
                cols.len()
            )));
        }
        let parse_err = |what: &str| Error::config(format!("series CSV line {}: bad {what}", lineno + 2));
        series
            .times
            .push(cols[0].trim().parse().map_err(|_| parse_err("t"))?);
        series
            .variance
            .push(cols[1].trim().parse().map_err(|_| parse_err("variance"))?);
        series
            .stderr
            .push(cols[2].trim().parse().map_err(|_| parse_err("stderr"))?);
        series.n_effective = cols[3].trim().parse().map_err(|_| parse_err("n"))?;
    }
    if series.times.is_empty() {
        return Err(Error::config("series CSV contains no rows"));
    }
    Ok(series)
}

/// Fit summary written next to a simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Fitted exponent estimate (2c).
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_max: f64,
    pub slope_stderr: f64,
    pub fit_window: [u64; 2],
    /// Percentile bootstrap band over trajectory resamples.
    pub bootstrap_band: [f64; 2],
    pub theoretical_2c: f64,
    pub tolerance: f64,
    /// |slope - theoretical_2c| <= tolerance.
    pub pass: bool,
}

impl FitReport {
    pub fn new(
        fit: &PowerLawFit,
        bootstrap_band: (f64, f64),
        theoretical_2c: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            residual_max: fit.residual_max,
            slope_stderr: fit.slope_stderr,
            fit_window: [fit.fit_window.0, fit.fit_window.1],
            bootstrap_band: [bootstrap_band.0, bootstrap_band.1],
            theoretical_2c,
            tolerance,
            pass: (fit.slope - theoretical_2c).abs() <= tolerance,
        }
    }
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::numerical(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes the resolved config as the reproducibility manifest.
pub fn write_manifest(path: &Path, config: &RunConfig) -> Result<()> {
    write_json_pretty(path, config)
}

/// Standalone log-log SVG of the variance series with the fitted line.
pub fn write_svg(path: &Path, series: &VarianceSeries, fit: Option<&PowerLawFit>) -> Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 56.0;

    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.variance)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&t, &v)| ((t as f64).log10(), v.log10()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::numerical("not enough positive points to plot"));
    }
    let (x0, x1) = pts
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = pts
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0).max(1e-12) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        PAD,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        PAD,
        PAD,
        PAD,
        H - PAD
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">log10 t</text>",
        W / 2.0 - 24.0,
        H - 16.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\">log10 variance</text>",
        H / 2.0,
        H / 2.0
    );
    for p in &pts {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"steelblue\"/>",
            sx(p.0),
            sy(p.1)
        );
    }
    if let Some(fit) = fit {
        // ln v = intercept + slope ln t, re-expressed in log10.
        let line = |x: f64| (fit.intercept + fit.slope * (x * std::f64::consts::LN_10)) / std::f64::consts::LN_10;
        let xa = (fit.fit_window.0 as f64).log10();
        let xb = (fit.fit_window.1 as f64).log10();
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"crimson\" stroke-width=\"1.5\"/>",
            sx(xa),
            sy(line(xa)),
            sx(xb),
            sy(line(xb))
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"crimson\">slope {:.4}</text>",
            PAD + 8.0,
            PAD + 14.0,
            fit.slope
        );
    }
    let _ = writeln!(svg, "</svg>");
    std::fs::write(path, svg)?;
    Ok(())
}
