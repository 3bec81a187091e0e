//! Differentiable view synthesis: depth unprojection to a point cloud, rigid
//! reprojection into a source view, and bilinear backward warping with
//! validity masks.

use crate::camera::{CameraModel, DistanceKind, InverseLut};
use crate::error::{Error, Result};
use crate::geometry::Se3Transform;
use crate::grid::{CoordinateMap, DepthMap, EgoMask, ImageBuffer, PointCloud};
use nalgebra::Vector3;

/// Per-pixel unit rays of a camera, precomputed once so repeated warps and
/// optimizer iterations skip the unprojection solve. `planar[k]` is the ray
/// scaled so its z component is 1 where that is defined.
#[derive(Debug, Clone)]
pub struct RayTable {
    pub width: usize,
    pub height: usize,
    /// Unit direction per pixel.
    pub unit: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

impl RayTable {
    pub fn build(cam: &CameraModel, lut: Option<&InverseLut>) -> RayTable {
        let (w, h) = (cam.width(), cam.height());
        let mut unit = vec![Vector3::zeros(); w * h];
        let mut valid = vec![false; w * h];
        for j in 0..h {
            for i in 0..w {
                let k = j * w + i;
                if let Ok(s) = cam.base_ray((i as f64, j as f64), lut) {
                    unit[k] = s;
                    valid[k] = true;
                }
            }
        }
        RayTable {
            width: w,
            height: h,
            unit,
            valid,
        }
    }

    /// Direction scaled so that `range * dir` is the camera-frame point for
    /// the given distance semantics. None where the ray is invalid or planar
    /// depth is undefined (incident angle >= pi/2).
    #[inline]
    pub fn scaled_dir(&self, k: usize, kind: DistanceKind) -> Option<Vector3<f64>> {
        if !self.valid[k] {
            return None;
        }
        let s = self.unit[k];
        match kind {
            DistanceKind::EuclideanDistance => Some(s),
            DistanceKind::PlanarDepth => {
                if s.z <= 0.0 {
                    None
                } else {
                    Some(s / s.z)
                }
            }
        }
    }
}

/// Back-projects every pixel of D through the camera. Pixels whose ray is
/// outside the model domain are flagged invalid rather than failing the map.
pub fn unproject_map(cam: &CameraModel, d: &DepthMap) -> Result<PointCloud> {
    if cam.width() != d.width || cam.height() != d.height {
        return Err(Error::mismatch(format!(
            "camera {}x{} vs depth {}x{}",
            cam.width(),
            cam.height(),
            d.width,
            d.height
        )));
    }
    let rays = RayTable::build(cam, None);
    unproject_map_with_rays(&rays, d)
}

/// `unproject_map` against a prebuilt ray table.
pub fn unproject_map_with_rays(rays: &RayTable, d: &DepthMap) -> Result<PointCloud> {
    if rays.width != d.width || rays.height != d.height {
        return Err(Error::mismatch(format!(
            "rays {}x{} vs depth {}x{}",
            rays.width, rays.height, d.width, d.height
        )));
    }
    let mut cloud = PointCloud::new(d.width, d.height);
    for k in 0..d.data.len() {
        if let Some(dir) = rays.scaled_dir(k, d.kind) {
            cloud.points[k] = d.data[k] * dir;
            cloud.valid[k] = true;
        }
    }
    Ok(cloud)
}

/// Transforms a point cloud by T and projects it through `cam`. Returns the
/// continuous sampling coordinates, the validity mask (projection succeeded
/// and landed inside [0, W-1] x [0, H-1]), and the transformed per-pixel
/// range (z for PlanarDepth, norm for EuclideanDistance) used by the depth
/// consistency loss. Range values at invalid pixels are a placeholder 1.
pub fn reproject(
    cloud: &PointCloud,
    t: &Se3Transform,
    cam: &CameraModel,
) -> Result<(CoordinateMap, EgoMask, DepthMap)> {
    let (w, h) = (cloud.width, cloud.height);
    let mut coords = CoordinateMap::new(w, h);
    let mut mask = EgoMask::zeros(w, h);
    let mut range = vec![1.0; w * h];
    let rot = t.rotation_matrix();
    let (iw, ih) = (cam.width() as f64 - 1.0, cam.height() as f64 - 1.0);
    for k in 0..cloud.points.len() {
        if !cloud.valid[k] {
            continue;
        }
        let y = rot * cloud.points[k] + t.translation;
        let Ok((pi, pj)) = cam.project(&y) else {
            continue;
        };
        coords.x[k] = pi;
        coords.y[k] = pj;
        let r = cam.range_of(&y);
        if !(pi >= 0.0 && pi <= iw && pj >= 0.0 && pj <= ih) || !(r > 0.0) {
            continue;
        }
        range[k] = r;
        mask.data[k] = true;
    }
    let range = DepthMap::from_data(w, h, cam.distance_kind, range)?;
    Ok((coords, mask, range))
}

/// Weights and neighbor indices of one bilinear tap. A sample is valid only
/// if all four neighbors lie inside the image.
#[derive(Debug, Clone, Copy)]
pub struct BilinearTap {
    pub x0: usize,
    pub y0: usize,
    /// Fractional offsets inside the cell.
    pub ax: f64,
    pub ay: f64,
}

#[inline]
pub fn bilinear_tap(x: f64, y: f64, width: usize, height: usize) -> Option<BilinearTap> {
    if !(x.is_finite() && y.is_finite()) {
        return None;
    }
    let x0f = x.floor();
    let y0f = y.floor();
    if x0f < 0.0 || y0f < 0.0 {
        return None;
    }
    let x0 = x0f as usize;
    let y0 = y0f as usize;
    if x0 + 1 > width - 1 || y0 + 1 > height - 1 {
        return None;
    }
    Some(BilinearTap {
        x0,
        y0,
        ax: x - x0f,
        ay: y - y0f,
    })
}

/// Standard bilinear interpolation of the four neighbors. Invalid samples
/// output 0 with mask 0; there is no edge clamping, since clamped samples
/// would leak border colors into the photometric loss.
pub fn bilinear_sample(src: &ImageBuffer, coords: &CoordinateMap) -> (ImageBuffer, EgoMask) {
    let (w, h) = (coords.width, coords.height);
    let mut out = ImageBuffer::new(w, h, src.channels).expect("nonempty");
    let mut mask = EgoMask::zeros(w, h);
    for k in 0..w * h {
        let Some(tap) = bilinear_tap(coords.x[k], coords.y[k], src.width, src.height) else {
            continue;
        };
        mask.data[k] = true;
        let (j, i) = (k / w, k % w);
        for c in 0..src.channels {
            let v00 = src.get(tap.y0, tap.x0, c);
            let v01 = src.get(tap.y0, tap.x0 + 1, c);
            let v10 = src.get(tap.y0 + 1, tap.x0, c);
            let v11 = src.get(tap.y0 + 1, tap.x0 + 1, c);
            let top = v00 + tap.ax * (v01 - v00);
            let bot = v10 + tap.ax * (v11 - v10);
            out.set(j, i, c, top + tap.ay * (bot - top));
        }
    }
    (out, mask)
}

/// Value and gradient of one bilinear sample of a single-channel grid.
#[inline]
pub fn bilinear_value_grad(
    data: &[f64],
    width: usize,
    tap: &BilinearTap,
) -> (f64, f64, f64) {
    let v00 = data[tap.y0 * width + tap.x0];
    let v01 = data[tap.y0 * width + tap.x0 + 1];
    let v10 = data[(tap.y0 + 1) * width + tap.x0];
    let v11 = data[(tap.y0 + 1) * width + tap.x0 + 1];
    let top = v00 + tap.ax * (v01 - v00);
    let bot = v10 + tap.ax * (v11 - v10);
    let value = top + tap.ay * (bot - top);
    let dx = (v01 - v00) * (1.0 - tap.ay) + (v11 - v10) * tap.ay;
    let dy = bot - top;
    (value, dx, dy)
}

/// Scatter a gradient through one bilinear tap onto the four source taps.
#[inline]
pub fn bilinear_scatter(grad: &mut [f64], width: usize, tap: &BilinearTap, g: f64) {
    let (ax, ay) = (tap.ax, tap.ay);
    grad[tap.y0 * width + tap.x0] += g * (1.0 - ax) * (1.0 - ay);
    grad[tap.y0 * width + tap.x0 + 1] += g * ax * (1.0 - ay);
    grad[(tap.y0 + 1) * width + tap.x0] += g * (1.0 - ax) * ay;
    grad[(tap.y0 + 1) * width + tap.x0 + 1] += g * ax * ay;
}

/// Full backward warp: unproject the target depth, transform by T into the
/// source frame, project through the source camera and sample the source
/// image. The mask is the conjunction of reprojection and sampling validity.
/// The target and source cameras may differ (rectification-map generation
/// projects into a virtual pinhole).
pub fn synthesize_view(
    src: &ImageBuffer,
    d_t: &DepthMap,
    t: &Se3Transform,
    cam_t: &CameraModel,
    cam_src: &CameraModel,
) -> Result<(ImageBuffer, EgoMask)> {
    if src.width != cam_src.width() || src.height != cam_src.height() {
        return Err(Error::mismatch(format!(
            "source image {}x{} vs source camera {}x{}",
            src.width,
            src.height,
            cam_src.width(),
            cam_src.height()
        )));
    }
    let cloud = unproject_map(cam_t, d_t)?;
    let (coords, proj_mask, _) = reproject(&cloud, t, cam_src)?;
    let (img, sample_mask) = bilinear_sample(src, &coords);
    let mask = proj_mask.and(&sample_mask);
    // Zero out samples whose reprojection was invalid so masked pixels
    // contribute exactly nothing downstream.
    let mut img = img;
    for k in 0..mask.data.len() {
        if !mask.data[k] {
            let (j, i) = (k / img.width, k % img.width);
            for c in 0..img.channels {
                img.set(j, i, c, 0.0);
            }
        }
    }
    Ok((img, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{BrownConradyParams, PinholeIntrinsics};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn pinhole(w: usize, h: usize, f: f64) -> CameraModel {
        let intr = PinholeIntrinsics::new(
            f,
            f,
            (w as f64 - 1.0) / 2.0,
            (h as f64 - 1.0) / 2.0,
            w,
            h,
        )
        .unwrap();
        let params = BrownConradyParams::new(0.0, 0.0, 0.0, 0.0, 0.0, intr).unwrap();
        CameraModel::brown_conrady(params, DistanceKind::PlanarDepth)
    }

    #[test]
    fn unproject_constant_depth_center_pixel() {
        let cam = pinhole(9, 9, 10.0);
        let d = DepthMap::constant(9, 9, DistanceKind::PlanarDepth, 1.0).unwrap();
        let cloud = unproject_map(&cam, &d).unwrap();
        let k = cloud.idx(4, 4);
        assert!(cloud.valid[k]);
        assert_relative_eq!(cloud.points[k], Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-9);
    }

    #[test]
    fn unproject_euclidean_norms() {
        let cam = CameraModel {
            distance_kind: DistanceKind::EuclideanDistance,
            ..pinhole(9, 9, 10.0)
        };
        let d = DepthMap::constant(9, 9, DistanceKind::EuclideanDistance, 5.0).unwrap();
        let cloud = unproject_map(&cam, &d).unwrap();
        for k in 0..cloud.points.len() {
            assert!(cloud.valid[k]);
            assert_relative_eq!(cloud.points[k].norm(), 5.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn identity_reprojection_reproduces_grid() {
        let cam = pinhole(12, 10, 15.0);
        let d = DepthMap::constant(12, 10, DistanceKind::PlanarDepth, 3.0).unwrap();
        let cloud = unproject_map(&cam, &d).unwrap();
        let (coords, mask, range) = reproject(&cloud, &Se3Transform::identity(), &cam).unwrap();
        for j in 0..10 {
            for i in 0..12 {
                let k = coords.idx(j, i);
                assert!(mask.data[k]);
                assert_relative_eq!(coords.x[k], i as f64, epsilon = 1e-6);
                assert_relative_eq!(coords.y[k], j as f64, epsilon = 1e-6);
                assert_relative_eq!(range.data[k], 3.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn forward_translation_moves_coordinates_outward() {
        let cam = pinhole(11, 11, 10.0);
        let d = DepthMap::constant(11, 11, DistanceKind::PlanarDepth, 5.0).unwrap();
        let cloud = unproject_map(&cam, &d).unwrap();
        // Moving the source camera 1 m forward along +z shrinks depths, so
        // off-center pixels reproject farther from the principal point.
        let t = Se3Transform::new(Vector3::zeros(), Vector3::new(0.0, 0.0, -1.0));
        let (coords, mask, range) = reproject(&cloud, &t, &cam).unwrap();
        let k = coords.idx(5, 8);
        assert!(mask.data[k]);
        assert!(coords.x[k] > 8.0);
        assert_relative_eq!(coords.y[k], 5.0, epsilon = 1e-9);
        assert_relative_eq!(range.data[k], 4.0, epsilon = 1e-9);
    }

    #[test]
    fn points_behind_camera_are_masked() {
        let cam = pinhole(5, 5, 5.0);
        let d = DepthMap::constant(5, 5, DistanceKind::PlanarDepth, 1.0).unwrap();
        let cloud = unproject_map(&cam, &d).unwrap();
        let t = Se3Transform::new(Vector3::zeros(), Vector3::new(0.0, 0.0, -2.0));
        let (_, mask, _) = reproject(&cloud, &t, &cam).unwrap();
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn bilinear_exact_at_integers_and_midpoints() {
        let img = ImageBuffer::from_data(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let mut coords = CoordinateMap::new(3, 1);
        coords.x = vec![0.0, 0.5, 1.0];
        coords.y = vec![0.0, 0.0, 0.0];
        let (out, mask) = bilinear_sample(&img, &coords);
        // The row has height 1, so y0 + 1 exceeds the image: everything is
        // masked under the all-four-neighbors rule.
        assert_eq!(mask.count(), 0);
        let _ = out;
        let img2 = ImageBuffer::from_data(2, 2, 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let (out2, mask2) = bilinear_sample(&img2, &coords);
        assert!(mask2.data[0] && mask2.data[1]);
        assert!(!mask2.data[2], "x0+1 leaves the image at x = 1 exactly");
        assert_relative_eq!(out2.get(0, 0, 0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(out2.get(0, 1, 0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn bilinear_gradient_matches_finite_differences() {
        let img = ImageBuffer::from_data(
            3,
            3,
            1,
            vec![0.1, 0.5, 0.2, 0.9, 0.3, 0.7, 0.4, 0.8, 0.6],
        )
        .unwrap();
        let (x, y) = (0.63, 1.27);
        let tap = bilinear_tap(x, y, 3, 3).unwrap();
        let (_, dx, dy) = bilinear_value_grad(&img.data, 3, &tap);
        let h = 1e-7;
        let val = |x: f64, y: f64| {
            let tap = bilinear_tap(x, y, 3, 3).unwrap();
            bilinear_value_grad(&img.data, 3, &tap).0
        };
        let fdx = (val(x + h, y) - val(x - h, y)) / (2.0 * h);
        let fdy = (val(x, y + h) - val(x, y - h)) / (2.0 * h);
        assert!((dx - fdx).abs() < 1e-6);
        assert!((dy - fdy).abs() < 1e-6);
    }

    #[test]
    fn identity_synthesis_is_bit_exact_in_interior() {
        let data: Vec<f64> = (0..100).map(|k| (k as f64 * 0.71).sin().abs()).collect();
        let img = ImageBuffer::from_data(10, 10, 1, data).unwrap();
        let cam = pinhole(10, 10, 12.0);
        let d = DepthMap::constant(10, 10, DistanceKind::PlanarDepth, 2.0).unwrap();
        let (synth, mask) =
            synthesize_view(&img, &d, &Se3Transform::identity(), &cam, &cam).unwrap();
        for j in 0..9 {
            for i in 0..9 {
                assert!(mask.get(j, i));
                assert_eq!(synth.get(j, i, 0), img.get(j, i, 0));
            }
        }
    }

    #[test]
    fn masked_pixels_output_zero() {
        let img = ImageBuffer::from_data(4, 4, 1, vec![0.5; 16]).unwrap();
        let cam = pinhole(4, 4, 4.0);
        let d = DepthMap::constant(4, 4, DistanceKind::PlanarDepth, 1.0).unwrap();
        // Large lateral motion pushes everything out of frame.
        let t = Se3Transform::new(Vector3::zeros(), Vector3::new(10.0, 0.0, 0.0));
        let (synth, mask) = synthesize_view(&img, &d, &t, &cam, &cam).unwrap();
        assert_eq!(mask.count(), 0);
        assert!(synth.data.iter().all(|v| *v == 0.0));
    }
}
