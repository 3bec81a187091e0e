//! PNG image and depth files. Images travel as 8- or 16-bit grayscale or
//! RGB and are normalized to [0, 1] in memory; alpha channels are dropped
//! on read. Depth maps have a 16-bit grayscale alternate to PFM: values
//! are stored as round(d / scale * 65535) for a caller-visible scale
//! factor, so the format costs one part in 2^16 of the declared range.

use crate::camera::DistanceKind;
use crate::error::{Error, Result};
use crate::grid::{DepthMap, ImageBuffer};
use image::{DynamicImage, ImageFormat, ImageReader};
use std::path::Path;

/// Writes an image as PNG at the requested bit depth (8 or 16). One
/// channel becomes grayscale, three become RGB.
pub fn write_image_png(path: impl AsRef<Path>, img: &ImageBuffer, bit_depth: u8) -> Result<()> {
    let (w, h) = (img.width as u32, img.height as u32);
    let dynimg = match (img.channels, bit_depth) {
        (1, 8) => DynamicImage::ImageLuma8(
            image::GrayImage::from_vec(w, h, quantize_u8(&img.data)).expect("sized buffer"),
        ),
        (3, 8) => DynamicImage::ImageRgb8(
            image::RgbImage::from_vec(w, h, quantize_u8(&img.data)).expect("sized buffer"),
        ),
        (1, 16) => DynamicImage::ImageLuma16(
            image::ImageBuffer::from_vec(w, h, quantize_u16(&img.data)).expect("sized buffer"),
        ),
        (3, 16) => DynamicImage::ImageRgb16(
            image::ImageBuffer::from_vec(w, h, quantize_u16(&img.data)).expect("sized buffer"),
        ),
        (c, b) => {
            return Err(Error::invalid(format!(
                "png write supports 1 or 3 channels at 8 or 16 bits, got {c} at {b}"
            )))
        }
    };
    dynimg
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::parse(format!("png write: {e}")))
}

fn quantize_u8(data: &[f64]) -> Vec<u8> {
    data.iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

fn quantize_u16(data: &[f64]) -> Vec<u16> {
    data.iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect()
}

/// Reads a PNG into a [0, 1] float buffer. Grayscale stays one channel,
/// color becomes three; an alpha channel, if present, is discarded.
pub fn read_image_png(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let img = ImageReader::open(path)?
        .decode()
        .map_err(|e| Error::parse(format!("png read: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => {
            (1, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb16(b) => {
            (3, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageLumaA8(b) => (
            1,
            b.into_raw().chunks(2).map(|px| px[0] as f64 / 255.0).collect(),
        ),
        DynamicImage::ImageRgba8(b) => (
            3,
            b.into_raw()
                .chunks(4)
                .flat_map(|px| px[..3].iter().map(|&v| v as f64 / 255.0).collect::<Vec<_>>())
                .collect(),
        ),
        DynamicImage::ImageLumaA16(b) => (
            1,
            b.into_raw().chunks(2).map(|px| px[0] as f64 / 65535.0).collect(),
        ),
        DynamicImage::ImageRgba16(b) => (
            3,
            b.into_raw()
                .chunks(4)
                .flat_map(|px| px[..3].iter().map(|&v| v as f64 / 65535.0).collect::<Vec<_>>())
                .collect(),
        ),
        other => {
            return Err(Error::parse(format!(
                "unsupported png pixel layout {other:?}"
            )))
        }
    };
    ImageBuffer::from_data(w, h, channels, data)
}

/// Writes a depth map as 16-bit grayscale PNG scaled by the map's maximum,
/// returning that scale. Fails if any value would quantize to zero, since
/// zero cannot encode a positive depth.
pub fn write_depth_png16(path: impl AsRef<Path>, depth: &DepthMap) -> Result<f64> {
    let scale = depth.data.iter().cloned().fold(0.0f64, f64::max);
    let raw: Vec<u16> = depth
        .data
        .iter()
        .map(|&v| (v / scale * 65535.0).round() as u16)
        .collect();
    if let Some(k) = raw.iter().position(|&v| v == 0) {
        return Err(Error::invalid(format!(
            "depth {} at pixel {k} is below the 16-bit dynamic range of scale {scale}",
            depth.data[k]
        )));
    }
    let img = image::ImageBuffer::<image::Luma<u16>, _>::from_vec(
        depth.width as u32,
        depth.height as u32,
        raw,
    )
    .expect("sized buffer");
    DynamicImage::ImageLuma16(img)
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::parse(format!("png write: {e}")))?;
    Ok(scale)
}

/// Reads a 16-bit grayscale depth PNG written with the given scale.
pub fn read_depth_png16(
    path: impl AsRef<Path>,
    scale: f64,
    kind: DistanceKind,
) -> Result<DepthMap> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("depth png scale {scale}")));
    }
    let img = ImageReader::open(path)?
        .decode()
        .map_err(|e| Error::parse(format!("png read: {e}")))?;
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::parse("depth png must be 16-bit grayscale".to_string()));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let data: Vec<f64> = buf
        .into_raw()
        .iter()
        .map(|&v| v as f64 / 65535.0 * scale)
        .collect();
    DepthMap::from_data(w, h, kind, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_image(channels: usize) -> ImageBuffer {
        let (w, h) = (9, 7);
        let data = (0..w * h * channels)
            .map(|k| (k % 64) as f64 / 63.0)
            .collect();
        ImageBuffer::from_data(w, h, channels, data).unwrap()
    }

    #[test]
    fn eight_bit_roundtrip_is_exact_on_the_quantized_lattice() {
        let dir = tempfile::tempdir().unwrap();
        for channels in [1, 3] {
            let path = dir.path().join(format!("c{channels}.png"));
            // Snap to the u8 lattice first so the trip is exact.
            let mut img = ramp_image(channels);
            for v in &mut img.data {
                *v = (*v * 255.0).round() / 255.0;
            }
            write_image_png(&path, &img, 8).unwrap();
            let back = read_image_png(&path).unwrap();
            assert_eq!(back.channels, channels);
            for (a, b) in back.data.iter().zip(&img.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sixteen_bit_quantization_error_is_bounded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img16.png");
        let img = ramp_image(3);
        write_image_png(&path, &img, 16).unwrap();
        let back = read_image_png(&path).unwrap();
        for (a, b) in back.data.iter().zip(&img.data) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn depth_png16_roundtrips_within_half_a_step() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depth.png");
        let data: Vec<f64> = (0..6 * 4).map(|k| 2.0 + 0.37 * k as f64).collect();
        let depth = DepthMap::from_data(6, 4, DistanceKind::PlanarDepth, data).unwrap();
        let scale = write_depth_png16(&path, &depth).unwrap();
        assert_eq!(scale, 2.0 + 0.37 * 23.0);
        let back = read_depth_png16(&path, scale, DistanceKind::PlanarDepth).unwrap();
        for (a, b) in back.data.iter().zip(&depth.data) {
            assert!((a - b).abs() <= 0.5 * scale / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn depth_png16_rejects_values_outside_dynamic_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        let depth = DepthMap::from_data(
            2,
            1,
            DistanceKind::PlanarDepth,
            vec![1.0e-7, 80.0],
        )
        .unwrap();
        assert!(matches!(
            write_depth_png16(&path, &depth),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
