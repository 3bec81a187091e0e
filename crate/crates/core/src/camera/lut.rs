//! Precomputed radius -> incident angle table for models whose radial
//! function has no cheap analytic inverse.

use super::fisheye::{radial_eval, FisheyeModel};
use crate::error::{Error, Result};

pub const DEFAULT_LUT_RESOLUTION: usize = 4096;

/// Monotone table mapping radius (pixels) to theta (radians); linear
/// interpolation between samples. Built once, then read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseLut {
    pub radii: Vec<f64>,
    pub thetas: Vec<f64>,
    pub resolution: usize,
    pub r_max: f64,
}

/// Samples radial() uniformly over [0, theta_max] and inverts the table by
/// monotonicity.
pub fn build_inverse_lut(m: &FisheyeModel, resolution: usize) -> Result<InverseLut> {
    if resolution < 64 {
        return Err(Error::invalid(format!(
            "lut resolution {resolution}, minimum 64"
        )));
    }
    let mut radii = Vec::with_capacity(resolution);
    let mut thetas = Vec::with_capacity(resolution);
    for s in 0..resolution {
        let theta = m.theta_max * s as f64 / (resolution - 1) as f64;
        let r = radial_eval(&m.kind, theta);
        if let Some(prev) = radii.last() {
            if !(r.is_finite() && r > *prev) {
                return Err(Error::NonMonotoneRadial { theta });
            }
        }
        radii.push(r);
        thetas.push(theta);
    }
    let r_max = *radii.last().expect("resolution >= 64");
    Ok(InverseLut {
        radii,
        thetas,
        resolution,
        r_max,
    })
}

impl InverseLut {
    /// Interpolated theta for a radius inside [0, r_max].
    pub fn lookup(&self, r: f64) -> Result<f64> {
        if !(0.0..=self.r_max * (1.0 + 1e-9)).contains(&r) {
            return Err(Error::domain(format!(
                "radius {r} outside table range [0, {}]",
                self.r_max
            )));
        }
        Ok(self.lookup_clamped(r))
    }

    /// Interpolated theta with the radius clamped into the table range;
    /// suitable as a Newton seed.
    pub fn lookup_clamped(&self, r: f64) -> f64 {
        let r = r.clamp(0.0, self.r_max);
        let hi = self.radii.partition_point(|v| *v < r);
        if hi == 0 {
            return self.thetas[0];
        }
        if hi >= self.radii.len() {
            return *self.thetas.last().expect("nonempty");
        }
        let lo = hi - 1;
        let (r0, r1) = (self.radii[lo], self.radii[hi]);
        let (t0, t1) = (self.thetas[lo], self.thetas[hi]);
        let w = (r - r0) / (r1 - r0);
        t0 + w * (t1 - t0)
    }
}
