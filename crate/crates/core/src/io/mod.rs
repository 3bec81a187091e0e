//! File formats: calibration and scene description documents (JSON),
//! depth and remap grids (PFM, with 16-bit PNG as an alternate), images
//! (8/16-bit PNG normalized to [0, 1]), and the small CSV and key-value
//! report formats the command-line tools speak.
//!
//! Writers are deterministic: a given value always serializes to the same
//! bytes. Text formats print floats through [`fmt_sig`] (9 significant
//! digits) where a human reads them, and through Rust's shortest
//! round-trip `Display` where a parser does, so parse -> serialize ->
//! parse is the identity on every format that is both read and written.

mod calibration;
mod pfm;
mod png;
mod scene_file;
mod text;

pub use calibration::{parse_calibration, serialize_calibration};
pub use pfm::{
    read_depth_pfm, read_pfm, read_remap_pfm, write_depth_pfm, write_pfm, write_remap_pfm,
    PfmData,
};
pub use png::{read_depth_png16, read_image_png, write_depth_png16, write_image_png};
pub use scene_file::{parse_scene, serialize_scene, SceneDescription};
pub use text::{
    breakdown_report, metrics_csv, parse_odometry_csv, parse_pixels_csv, parse_points_csv,
    parse_pose6, parse_weights_csv, pose6_csv, rectification_report_text, trace_csv,
};

/// Fixed 9-significant-digit float formatting for CLI-facing text output.
/// Scientific notation keeps the format independent of magnitude; the
/// non-finite spellings match what [`str::parse::<f64>`] accepts.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.8e}")
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn fmt_sig_is_nine_digits_and_parseable() {
        assert_eq!(fmt_sig(0.1), "1.00000000e-1");
        assert_eq!(fmt_sig(-1234.56789), "-1.23456789e3");
        assert_eq!(fmt_sig(0.0), "0.00000000e0");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
        for v in [0.1, -1234.56789, 3.0e-12, 7.25e9] {
            let back: f64 = fmt_sig(v).parse().unwrap();
            assert!((back - v).abs() <= 1e-8 * v.abs());
        }
    }
}
