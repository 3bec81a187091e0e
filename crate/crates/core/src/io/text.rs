//! CSV and key-value text formats. Parsers accept an optional header line,
//! skip blank and `#` comment lines, and report the line number of
//! anything malformed. Writers print floats through [`fmt_sig`] and end
//! every line with `\n`, so identical values always produce identical
//! bytes.

use super::fmt_sig;
use crate::error::{Error, Result};
use crate::geometry::{OdometrySample, Se3Transform};
use crate::loss::{LossBreakdown, LossWeights};
use crate::metrics::DepthMetrics;
use crate::optim::LossTrace;
use crate::scene::RectificationReport;
use nalgebra::Vector3;
use std::fmt::Write as _;

/// Splits CSV text into rows of `n` floats. A first line that does not
/// parse as numbers is treated as a header.
fn numeric_rows(text: &str, n: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut first_data_line = true;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if values.len() != n {
                    return Err(Error::parse(format!(
                        "{what} line {}: {} fields, expected {n}",
                        lineno + 1,
                        values.len()
                    )));
                }
                rows.push(values);
                first_data_line = false;
            }
            Err(_) if first_data_line => {
                // Header line; only allowed once, before any data.
                first_data_line = false;
            }
            Err(_) => {
                return Err(Error::parse(format!(
                    "{what} line {}: non-numeric field",
                    lineno + 1
                )));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput {
            what: what.to_string(),
        });
    }
    Ok(rows)
}

/// Parses `x,y,z` rows of camera-frame points in meters.
pub fn parse_points_csv(text: &str) -> Result<Vec<Vector3<f64>>> {
    Ok(numeric_rows(text, 3, "points csv")?
        .into_iter()
        .map(|r| Vector3::new(r[0], r[1], r[2]))
        .collect())
}

/// Parses `i,j` rows of pixel coordinates.
pub fn parse_pixels_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    Ok(numeric_rows(text, 2, "pixels csv")?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect())
}

/// Parses a six-value pose `w1,w2,w3,t1,t2,t3`: axis-angle rotation in
/// radians, then translation in meters.
pub fn parse_pose6(text: &str) -> Result<Se3Transform> {
    let rows = numeric_rows(text, 6, "pose")?;
    if rows.len() != 1 {
        return Err(Error::parse(format!("pose: {} rows, expected 1", rows.len())));
    }
    let p: [f64; 6] = rows[0].as_slice().try_into().expect("six values");
    Ok(Se3Transform::from_params(&p))
}

pub fn pose6_csv(pose: &Se3Transform) -> String {
    pose.params().map(fmt_sig).join(",")
}

/// Parses odometry rows `timestamp_s,speed_mps` and enforces strictly
/// increasing timestamps.
pub fn parse_odometry_csv(text: &str) -> Result<Vec<OdometrySample>> {
    let samples: Vec<OdometrySample> = numeric_rows(text, 2, "odometry csv")?
        .into_iter()
        .map(|r| OdometrySample {
            timestamp_s: r[0],
            speed_mps: r[1],
        })
        .collect();
    for (k, pair) in samples.windows(2).enumerate() {
        if pair[1].timestamp_s <= pair[0].timestamp_s {
            return Err(Error::NonMonotonicTime { index: k + 1 });
        }
    }
    Ok(samples)
}

/// Parses loss weights given as five values
/// `ssim,smoothness,consistency,clip_percentile,num_scales`.
pub fn parse_weights_csv(text: &str) -> Result<LossWeights> {
    let rows = numeric_rows(text, 5, "weights")?;
    if rows.len() != 1 {
        return Err(Error::parse(format!(
            "weights: {} rows, expected 1",
            rows.len()
        )));
    }
    let r = &rows[0];
    if r[4] < 1.0 || r[4].fract() != 0.0 {
        return Err(Error::parse(format!("num_scales {} must be a positive integer", r[4])));
    }
    Ok(LossWeights {
        ssim_weight: r[0],
        smoothness_weight: r[1],
        consistency_weight: r[2],
        clip_percentile: r[3],
        num_scales: r[4] as usize,
    })
}

/// Renders an optimization trace as CSV with one row per accepted iterate.
pub fn trace_csv(trace: &LossTrace) -> String {
    let mut out = String::from("iter,reconstruction,smoothness,consistency,total\n");
    for row in &trace.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.iter,
            fmt_sig(row.reconstruction),
            fmt_sig(row.smoothness),
            fmt_sig(row.consistency),
            fmt_sig(row.total)
        );
    }
    out
}

/// Renders metrics as a header plus a single CSV row in table column
/// order: abs_rel, sq_rel, rmse, rmse_log, delta1, delta2, delta3.
pub fn metrics_csv(m: &DepthMetrics) -> String {
    let row = m.as_row().map(fmt_sig).join(",");
    format!("abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3\n{row}\n")
}

/// Renders a loss breakdown as `key = value` lines: the aggregate terms
/// first, then the per-scale components.
pub fn breakdown_report(b: &LossBreakdown) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "reconstruction_forward = {}", fmt_sig(b.reconstruction_forward));
    let _ = writeln!(out, "reconstruction_backward = {}", fmt_sig(b.reconstruction_backward));
    let _ = writeln!(out, "depth_consistency = {}", fmt_sig(b.depth_consistency));
    let _ = writeln!(out, "smoothness = {}", fmt_sig(b.smoothness));
    let _ = writeln!(out, "total = {}", fmt_sig(b.total));
    for (s, scale) in b.per_scale.iter().enumerate() {
        let _ = writeln!(
            out,
            "scale{s}.reconstruction_forward = {}",
            fmt_sig(scale.reconstruction_forward)
        );
        let _ = writeln!(
            out,
            "scale{s}.reconstruction_backward = {}",
            fmt_sig(scale.reconstruction_backward)
        );
        let _ = writeln!(out, "scale{s}.depth_consistency = {}", fmt_sig(scale.depth_consistency));
        let _ = writeln!(out, "scale{s}.smoothness = {}", fmt_sig(scale.smoothness));
    }
    out
}

/// Renders a rectification report as `key = value` lines.
pub fn rectification_report_text(r: &RectificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "raw_width = {}", r.raw_size.0);
    let _ = writeln!(out, "raw_height = {}", r.raw_size.1);
    let _ = writeln!(out, "rect_width = {}", r.rect_size.0);
    let _ = writeln!(out, "rect_height = {}", r.rect_size.1);
    let _ = writeln!(out, "info_loss_fraction = {}", fmt_sig(r.info_loss_fraction));
    let _ = writeln!(out, "resampling_psnr = {}", fmt_sig(r.resampling_psnr));
    let _ = writeln!(out, "resampling_ssim = {}", fmt_sig(r.resampling_ssim));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::TraceRow;
    use approx::assert_relative_eq;

    #[test]
    fn points_csv_accepts_header_comments_and_blanks() {
        let text = "x,y,z\n# comment\n\n1.0,2.0,3.0\n-0.5, 0.25 ,9\n";
        let pts = parse_points_csv(text).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1], Vector3::new(-0.5, 0.25, 9.0));
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let err = parse_points_csv("1,2,3\n4,five,6\n").unwrap_err();
        match err {
            Error::Parse { what } => assert!(what.contains("line 2"), "{what}"),
            other => panic!("expected Parse, got {other}"),
        }
        let err = parse_pixels_csv("1,2,3\n").unwrap_err();
        match err {
            Error::Parse { what } => assert!(what.contains("expected 2"), "{what}"),
            other => panic!("expected Parse, got {other}"),
        }
    }

    #[test]
    fn pose_roundtrips_through_csv() {
        let pose = Se3Transform::new(
            Vector3::new(0.01, -0.02, 0.03),
            Vector3::new(1.5, -0.25, 0.75),
        );
        let back = parse_pose6(&pose6_csv(&pose)).unwrap();
        for (a, b) in back.params().iter().zip(pose.params()) {
            assert_relative_eq!(a, &b, epsilon = 1e-8);
        }
    }

    #[test]
    fn odometry_requires_increasing_time() {
        let ok = parse_odometry_csv("timestamp_s,speed_mps\n0.0,10.0\n0.1,12.0\n").unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok[1].speed_mps, 12.0);
        let err = parse_odometry_csv("0.0,10.0\n0.0,12.0\n").unwrap_err();
        assert!(matches!(err, Error::NonMonotonicTime { index: 1 }));
    }

    #[test]
    fn weights_parse_and_reject_fractional_scales() {
        let w = parse_weights_csv("0.85,0.001,0.05,0.95,2\n").unwrap();
        assert_eq!(w.num_scales, 2);
        assert_eq!(w.clip_percentile, 0.95);
        assert!(parse_weights_csv("0.85,0.001,0.05,0.95,1.5\n").is_err());
    }

    #[test]
    fn trace_csv_is_stable() {
        let trace = LossTrace {
            rows: vec![
                TraceRow {
                    iter: 0,
                    reconstruction: 0.125,
                    smoothness: 0.5,
                    consistency: 0.0,
                    total: 0.130,
                },
                TraceRow {
                    iter: 1,
                    reconstruction: 0.06125,
                    smoothness: 0.25,
                    consistency: 0.0,
                    total: 0.06375,
                },
            ],
            low_texture: false,
        };
        let text = trace_csv(&trace);
        assert_eq!(
            text,
            "iter,reconstruction,smoothness,consistency,total\n\
             0,1.25000000e-1,5.00000000e-1,0.00000000e0,1.30000000e-1\n\
             1,6.12500000e-2,2.50000000e-1,0.00000000e0,6.37500000e-2\n"
        );
    }

    #[test]
    fn metrics_csv_matches_column_order() {
        let m = DepthMetrics {
            abs_rel: 0.1,
            sq_rel: 0.02,
            rmse: 1.5,
            rmse_log: 0.09,
            delta1: 0.9,
            delta2: 0.97,
            delta3: 0.99,
        };
        let text = metrics_csv(&m);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3"
        );
        assert!(lines.next().unwrap().starts_with("1.00000000e-1,2.00000000e-2,1.50000000e0"));
    }
}
