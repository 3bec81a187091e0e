//! Projection and unprojection for seven lens models: pinhole with
//! Brown-Conrady distortion plus six radially symmetric fisheye mappings
//! (polynomial, UCM, eUCM, rectilinear, stereographic, double sphere).
//!
//! Conventions: pixel coordinates are (i, j) = (column, row); the camera
//! looks along +z; fisheye models are isotropic with a single focal
//! parameter, and the incident angle theta is measured from the optical
//! axis. All projections are pure functions of immutable parameter sets.

mod brown_conrady;
mod fisheye;
mod lut;

pub use brown_conrady::{jacobian_brown_conrady, project_brown_conrady, unproject_brown_conrady, BrownConradyParams};
pub use fisheye::{
    inverse_radial, jacobian_fisheye, project_fisheye, radial, radial_deriv, FisheyeKind,
    FisheyeModel,
};
pub use lut::{build_inverse_lut, InverseLut, DEFAULT_LUT_RESOLUTION};

use crate::error::{Error, Result};
use nalgebra::{Matrix2x3, Vector3};

/// Whether a range value counts the planar z-depth or the Euclidean distance
/// from the optical center.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    PlanarDepth,
    EuclideanDistance,
}

/// Shared pinhole intrinsics: focal lengths and principal point in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl PinholeIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return Err(Error::invalid(format!("focal lengths ({fx}, {fy})")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image size {width}x{height}")));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::invalid(format!(
                "principal point ({cx}, {cy}) outside {width}x{height}"
            )));
        }
        Ok(PinholeIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Distortion-free projection.
    pub fn project(&self, x: &Vector3<f64>) -> Result<(f64, f64)> {
        if x.z <= 0.0 {
            return Err(Error::NonPositiveDepth { z: x.z });
        }
        Ok((
            self.fx * x.x / x.z + self.cx,
            self.fy * x.y / x.z + self.cy,
        ))
    }
}

/// One of the seven supported lens models.
#[derive(Debug, Clone, PartialEq)]
pub enum LensModel {
    BrownConrady(BrownConradyParams),
    Fisheye(FisheyeModel),
}

/// A lens model together with the range semantics its depth maps use.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub lens: LensModel,
    pub distance_kind: DistanceKind,
}

impl CameraModel {
    pub fn brown_conrady(params: BrownConradyParams, kind: DistanceKind) -> Self {
        CameraModel {
            lens: LensModel::BrownConrady(params),
            distance_kind: kind,
        }
    }

    pub fn fisheye(model: FisheyeModel, kind: DistanceKind) -> Self {
        CameraModel {
            lens: LensModel::Fisheye(model),
            distance_kind: kind,
        }
    }

    pub fn width(&self) -> usize {
        match &self.lens {
            LensModel::BrownConrady(m) => m.intrinsics.width,
            LensModel::Fisheye(m) => m.width,
        }
    }

    pub fn height(&self) -> usize {
        match &self.lens {
            LensModel::BrownConrady(m) => m.intrinsics.height,
            LensModel::Fisheye(m) => m.height,
        }
    }

    /// Project a camera-frame point to continuous pixel coordinates. The
    /// result may land outside the image; bounds are the caller's concern.
    pub fn project(&self, x: &Vector3<f64>) -> Result<(f64, f64)> {
        match &self.lens {
            LensModel::BrownConrady(m) => project_brown_conrady(m, x),
            LensModel::Fisheye(m) => project_fisheye(m, x),
        }
    }

    /// Analytic 2x3 Jacobian of `project` with respect to the point.
    pub fn jacobian_project(&self, x: &Vector3<f64>) -> Result<Matrix2x3<f64>> {
        match &self.lens {
            LensModel::BrownConrady(m) => jacobian_brown_conrady(m, x),
            LensModel::Fisheye(m) => jacobian_fisheye(m, x),
        }
    }

    /// Unit ray through pixel p. The z component is positive iff the incident
    /// angle is below pi/2.
    pub fn base_ray(&self, p: (f64, f64), lut: Option<&InverseLut>) -> Result<Vector3<f64>> {
        match &self.lens {
            LensModel::BrownConrady(m) => {
                let (xu, yu) = unproject_brown_conrady(m, p)?;
                Ok(Vector3::new(xu, yu, 1.0).normalize())
            }
            LensModel::Fisheye(m) => {
                let dx = p.0 - m.cx;
                let dy = p.1 - m.cy;
                let r = dx.hypot(dy);
                let theta = inverse_radial(m, r, lut)?;
                if r < 1e-12 {
                    return Ok(Vector3::new(0.0, 0.0, 1.0));
                }
                let (st, ct) = (theta.sin(), theta.cos());
                Ok(Vector3::new(st * dx / r, st * dy / r, ct))
            }
        }
    }

    /// Back-project pixel p at the given range. `kind` selects whether range
    /// is the planar depth (z) or the Euclidean distance along the ray.
    pub fn unproject(
        &self,
        p: (f64, f64),
        range: f64,
        kind: DistanceKind,
        lut: Option<&InverseLut>,
    ) -> Result<Vector3<f64>> {
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::DegenerateDepth {
                what: format!("range {range}"),
            });
        }
        let s = self.base_ray(p, lut)?;
        match kind {
            DistanceKind::EuclideanDistance => Ok(range * s),
            DistanceKind::PlanarDepth => {
                if s.z <= 0.0 {
                    return Err(Error::domain(format!(
                        "planar depth undefined at incident angle >= pi/2 (pixel {p:?})"
                    )));
                }
                Ok((range / s.z) * s)
            }
        }
    }

    /// The per-pixel range of a camera-frame point under this camera's
    /// distance semantics: z for PlanarDepth, norm for EuclideanDistance.
    pub fn range_of(&self, x: &Vector3<f64>) -> f64 {
        match self.distance_kind {
            DistanceKind::PlanarDepth => x.z,
            DistanceKind::EuclideanDistance => x.norm(),
        }
    }

    /// The inverse lookup table this model needs for unprojection at the
    /// default resolution, or None when every inverse is closed form.
    pub fn default_lut(&self) -> Result<Option<InverseLut>> {
        match &self.lens {
            LensModel::Fisheye(m) if matches!(m.kind, FisheyeKind::Polynomial { .. }) => {
                Ok(Some(build_inverse_lut(m, DEFAULT_LUT_RESOLUTION)?))
            }
            _ => Ok(None),
        }
    }
}
