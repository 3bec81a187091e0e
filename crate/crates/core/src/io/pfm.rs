//! PFM (portable float map) grids. `Pf` holds one channel, `PF` three;
//! rows are stored bottom-up per the format's convention and flipped to
//! this crate's top-down order at the file boundary. The writer always
//! emits little-endian (negative scale); the reader accepts either byte
//! order. Values cross the boundary at the format's native f32 width, so
//! a write -> read round trip is exact once values are single precision.
//!
//! Depth maps are `Pf`. Remap grids are `PF` with channels (x, y,
//! validity): PFM has no two-channel variant, so the mask rides along as
//! a third channel with 1.0 for valid and 0.0 for invalid pixels.

use crate::camera::DistanceKind;
use crate::error::{Error, Result};
use crate::grid::{CoordinateMap, DepthMap, EgoMask};
use std::fs;
use std::path::Path;

/// A decoded PFM file, rows already flipped to top-down order.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmData {
    pub width: usize,
    pub height: usize,
    /// 1 for `Pf`, 3 for `PF`.
    pub channels: usize,
    pub data: Vec<f32>,
}

/// Writes a grid of `channels` x `width` x `height` f32 samples, given in
/// top-down row order.
pub fn write_pfm(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    channels: usize,
    data: &[f32],
) -> Result<()> {
    if channels != 1 && channels != 3 {
        return Err(Error::invalid(format!("pfm channels {channels}, must be 1 or 3")));
    }
    if width == 0 || height == 0 || data.len() != width * height * channels {
        return Err(Error::mismatch(format!(
            "pfm payload {} values for {width}x{height}x{channels}",
            data.len()
        )));
    }
    let magic = if channels == 1 { "Pf" } else { "PF" };
    let mut bytes = Vec::with_capacity(32 + data.len() * 4);
    bytes.extend_from_slice(format!("{magic}\n{width} {height}\n-1.0\n").as_bytes());
    for j in (0..height).rev() {
        let row = &data[j * width * channels..(j + 1) * width * channels];
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads one whitespace-delimited header token starting at `pos`.
fn token(bytes: &[u8], pos: &mut usize, what: &str) -> Result<String> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse(format!("pfm header ended before {what}")));
    }
    String::from_utf8(bytes[start..*pos].to_vec())
        .map_err(|_| Error::parse(format!("pfm {what} is not ASCII")))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<PfmData> {
    let bytes = fs::read(path)?;
    let mut pos = 0;
    let magic = token(&bytes, &mut pos, "magic")?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::parse(format!("pfm magic {other:?}"))),
    };
    let width: usize = token(&bytes, &mut pos, "width")?
        .parse()
        .map_err(|_| Error::parse("pfm width".to_string()))?;
    let height: usize = token(&bytes, &mut pos, "height")?
        .parse()
        .map_err(|_| Error::parse("pfm height".to_string()))?;
    let scale: f64 = token(&bytes, &mut pos, "scale")?
        .parse()
        .map_err(|_| Error::parse("pfm scale".to_string()))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::parse(format!("pfm scale {scale}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels * 4))
        .ok_or_else(|| Error::parse("pfm size overflows".to_string()))?;
    if bytes.len().saturating_sub(pos) != expected {
        return Err(Error::parse(format!(
            "pfm raster holds {} bytes, expected {expected}",
            bytes.len().saturating_sub(pos)
        )));
    }
    let little_endian = scale < 0.0;
    let mut data = vec![0.0f32; width * height * channels];
    for j in 0..height {
        let src = pos + (height - 1 - j) * width * channels * 4;
        for k in 0..width * channels {
            let b: [u8; 4] = bytes[src + k * 4..src + k * 4 + 4].try_into().expect("4 bytes");
            data[j * width * channels + k] =
                if little_endian { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        }
    }
    Ok(PfmData {
        width,
        height,
        channels,
        data,
    })
}

pub fn write_depth_pfm(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let data: Vec<f32> = depth.data.iter().map(|&v| v as f32).collect();
    write_pfm(path, depth.width, depth.height, 1, &data)
}

/// Reads a one-channel PFM as a depth map with the given range semantics.
/// The depth invariants (finite, positive) are re-validated on load.
pub fn read_depth_pfm(path: impl AsRef<Path>, kind: DistanceKind) -> Result<DepthMap> {
    let pfm = read_pfm(path)?;
    if pfm.channels != 1 {
        return Err(Error::parse("depth pfm must be one-channel (Pf)".to_string()));
    }
    let data: Vec<f64> = pfm.data.iter().map(|&v| v as f64).collect();
    DepthMap::from_data(pfm.width, pfm.height, kind, data)
}

/// Writes a remap grid as three-channel PFM with channels (x, y, validity).
pub fn write_remap_pfm(
    path: impl AsRef<Path>,
    map: &CoordinateMap,
    mask: &EgoMask,
) -> Result<()> {
    if map.width != mask.width || map.height != mask.height {
        return Err(Error::mismatch(format!(
            "remap {}x{} vs mask {}x{}",
            map.width, map.height, mask.width, mask.height
        )));
    }
    let mut data = vec![0.0f32; map.width * map.height * 3];
    for k in 0..map.width * map.height {
        data[k * 3] = map.x[k] as f32;
        data[k * 3 + 1] = map.y[k] as f32;
        data[k * 3 + 2] = if mask.data[k] { 1.0 } else { 0.0 };
    }
    write_pfm(path, map.width, map.height, 3, &data)
}

pub fn read_remap_pfm(path: impl AsRef<Path>) -> Result<(CoordinateMap, EgoMask)> {
    let pfm = read_pfm(path)?;
    if pfm.channels != 3 {
        return Err(Error::parse("remap pfm must be three-channel (PF)".to_string()));
    }
    let mut map = CoordinateMap::new(pfm.width, pfm.height);
    let mut mask = EgoMask::zeros(pfm.width, pfm.height);
    for k in 0..pfm.width * pfm.height {
        map.x[k] = pfm.data[k * 3] as f64;
        map.y[k] = pfm.data[k * 3 + 1] as f64;
        mask.data[k] = pfm.data[k * 3 + 2] > 0.5;
    }
    Ok((map, mask))
}
