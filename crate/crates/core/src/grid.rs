//! Row-major raster containers shared by the warping, loss and I/O layers.
//!
//! Grids are indexed by (row j, column i). Pixel coordinates used by the
//! camera models are (i, j) = (column, row). Channel data is interleaved.

use crate::camera::DistanceKind;
use crate::error::{Error, Result};
use nalgebra::Vector3;

/// H x W x C raster of finite f64 samples, C in {1, 3}. Intensities are
/// conventionally in [0, 1] but the container does not clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyInput {
                what: format!("image {width}x{height}"),
            });
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("channel count {channels}, want 1 or 3")));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        })
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        let mut img = Self::new(width, height, channels)?;
        if data.len() != img.data.len() {
            return Err(Error::mismatch(format!(
                "image data length {} for {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite image sample"));
        }
        img.data = data;
        Ok(img)
    }

    #[inline]
    pub fn idx(&self, j: usize, i: usize, c: usize) -> usize {
        (j * self.width + i) * self.channels + c
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize, c: usize) -> f64 {
        self.data[self.idx(j, i, c)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, i: usize, c: usize, v: f64) {
        let k = self.idx(j, i, c);
        self.data[k] = v;
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Per-pixel channel mean, as a single-channel image.
    pub fn channel_mean(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let mut out = ImageBuffer::new(self.width, self.height, 1).expect("nonempty");
        for j in 0..self.height {
            for i in 0..self.width {
                let mut s = 0.0;
                for c in 0..self.channels {
                    s += self.get(j, i, c);
                }
                out.set(j, i, 0, s / self.channels as f64);
            }
        }
        out
    }
}

/// H x W map of strictly positive finite ranges. `kind` records whether a
/// value is a planar depth (z) or a Euclidean distance to the optical center.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub kind: DistanceKind,
    pub data: Vec<f64>,
}

impl DepthMap {
    pub fn constant(width: usize, height: usize, kind: DistanceKind, value: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyInput {
                what: format!("depth map {width}x{height}"),
            });
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::DegenerateDepth {
                what: format!("constant {value}"),
            });
        }
        Ok(DepthMap {
            width,
            height,
            kind,
            data: vec![value; width * height],
        })
    }

    pub fn from_data(width: usize, height: usize, kind: DistanceKind, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.is_empty() {
            return Err(Error::EmptyInput {
                what: format!("depth map {width}x{height}"),
            });
        }
        if data.len() != width * height {
            return Err(Error::mismatch(format!(
                "depth data length {} for {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::DegenerateDepth {
                what: format!("value {bad}"),
            });
        }
        Ok(DepthMap {
            width,
            height,
            kind,
            data,
        })
    }

    #[inline]
    pub fn idx(&self, j: usize, i: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[self.idx(j, i)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, i: usize, v: f64) {
        let k = self.idx(j, i);
        self.data[k] = v;
    }

    /// Bilinear resize to (width, height). Corners map to corners, so the
    /// operation is exact for any size when the map is constant and is the
    /// inverse-free convention used when low-resolution predictions are
    /// brought to full resolution before loss evaluation.
    pub fn upsample_bilinear(&self, width: usize, height: usize) -> Result<DepthMap> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyInput {
                what: "upsample target".into(),
            });
        }
        let mut out = vec![0.0; width * height];
        for j in 0..height {
            for i in 0..width {
                let (x, wx0, x0, x1) = resize_axis(i, width, self.width);
                let (y, wy0, y0, y1) = resize_axis(j, height, self.height);
                let _ = (x, y);
                let v = wy0 * (wx0 * self.get(y0, x0) + (1.0 - wx0) * self.get(y0, x1))
                    + (1.0 - wy0) * (wx0 * self.get(y1, x0) + (1.0 - wx0) * self.get(y1, x1));
                out[j * width + i] = v;
            }
        }
        DepthMap::from_data(width, height, self.kind, out)
    }

    /// Adjoint of `upsample_bilinear`: scatters a gradient on the resized
    /// grid back onto this map's resolution.
    pub fn upsample_adjoint(
        src_width: usize,
        src_height: usize,
        grad_up: &[f64],
        up_width: usize,
        up_height: usize,
    ) -> Vec<f64> {
        let mut out = vec![0.0; src_width * src_height];
        for j in 0..up_height {
            for i in 0..up_width {
                let g = grad_up[j * up_width + i];
                if g == 0.0 {
                    continue;
                }
                let (_, wx0, x0, x1) = resize_axis(i, up_width, src_width);
                let (_, wy0, y0, y1) = resize_axis(j, up_height, src_height);
                out[y0 * src_width + x0] += g * wy0 * wx0;
                out[y0 * src_width + x1] += g * wy0 * (1.0 - wx0);
                out[y1 * src_width + x0] += g * (1.0 - wy0) * wx0;
                out[y1 * src_width + x1] += g * (1.0 - wy0) * (1.0 - wx0);
            }
        }
        out
    }
}

/// Corner-aligned source coordinate for bilinear resizing: returns the
/// continuous source position plus the weight and indices of the two
/// bracketing samples along one axis.
#[inline]
fn resize_axis(dst: usize, dst_len: usize, src_len: usize) -> (f64, f64, usize, usize) {
    let x = if dst_len <= 1 {
        0.0
    } else {
        dst as f64 * (src_len - 1) as f64 / (dst_len - 1) as f64
    };
    let x0 = (x.floor() as usize).min(src_len.saturating_sub(1));
    let x1 = (x0 + 1).min(src_len - 1);
    let w0 = 1.0 - (x - x0 as f64);
    (x, w0, x0, x1)
}

/// H x W binary mask; 1 marks a pixel that survives reprojection and
/// sampling validity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl EgoMask {
    pub fn ones(width: usize, height: usize) -> Self {
        EgoMask {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        EgoMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, j: usize, i: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> bool {
        self.data[self.idx(j, i)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, i: usize, v: bool) {
        let k = self.idx(j, i);
        self.data[k] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn and(&self, other: &EgoMask) -> EgoMask {
        assert_eq!(self.width, other.width);
        assert_eq!(self.height, other.height);
        EgoMask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }
}

/// H x W grid of continuous sampling coordinates (i, j) into another image.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    pub width: usize,
    pub height: usize,
    /// Column coordinate per pixel.
    pub x: Vec<f64>,
    /// Row coordinate per pixel.
    pub y: Vec<f64>,
}

impl CoordinateMap {
    pub fn new(width: usize, height: usize) -> Self {
        CoordinateMap {
            width,
            height,
            x: vec![0.0; width * height],
            y: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, j: usize, i: usize) -> usize {
        j * self.width + i
    }

    /// Identity map: every pixel samples itself.
    pub fn identity(width: usize, height: usize) -> Self {
        let mut m = Self::new(width, height);
        for j in 0..height {
            for i in 0..width {
                let k = j * width + i;
                m.x[k] = i as f64;
                m.y[k] = j as f64;
            }
        }
        m
    }
}

/// Per-pixel 3D points with a validity flag, as produced by unprojecting a
/// depth map. Points are in the camera frame of the depth map's view.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub width: usize,
    pub height: usize,
    pub points: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

impl PointCloud {
    pub fn new(width: usize, height: usize) -> Self {
        PointCloud {
            width,
            height,
            points: vec![Vector3::zeros(); width * height],
            valid: vec![false; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, j: usize, i: usize) -> usize {
        j * self.width + i
    }
}
