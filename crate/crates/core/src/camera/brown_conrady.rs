//! Pinhole projection with Brown-Conrady radial and tangential distortion.
//!
//! Forward model on normalized coordinates x = X/Z, y = Y/Z with
//! r^2 = x^2 + y^2:
//!
//! ```text
//! x' = x (1 + k1 r^2 + k2 r^4 + k3 r^6) + 2 p1 x y + p2 (r^2 + 2 x^2)
//! y' = y (1 + k1 r^2 + k2 r^4 + k3 r^6) + p1 (r^2 + 2 y^2) + 2 p2 x y
//! i  = fx x' + cx,  j = fy y' + cy
//! ```

use super::PinholeIntrinsics;
use crate::error::{Error, Result};
use nalgebra::{Matrix2x3, Vector3};

/// Convergence tolerance of the undistortion fixed point, on normalized
/// coordinates.
const UNDISTORT_TOL: f64 = 1e-10;
const UNDISTORT_MAX_ITERS: usize = 50;
/// Samples used to certify radial-factor positivity at construction.
const DOMAIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownConradyParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub p1: f64,
    pub p2: f64,
    pub intrinsics: PinholeIntrinsics,
    /// Largest supported undistorted normalized radius, derived from the
    /// image corners at construction.
    pub r_max: f64,
}

impl BrownConradyParams {
    pub fn new(
        k1: f64,
        k2: f64,
        k3: f64,
        p1: f64,
        p2: f64,
        intrinsics: PinholeIntrinsics,
    ) -> Result<Self> {
        for (name, v) in [("k1", k1), ("k2", k2), ("k3", k3), ("p1", p1), ("p2", p2)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} = {v}")));
            }
        }
        let mut m = BrownConradyParams {
            k1,
            k2,
            k3,
            p1,
            p2,
            intrinsics,
            r_max: 0.0,
        };
        m.r_max = m.corner_radius()?;
        // The radial factor must stay positive across the valid domain; a
        // sign change would fold the image back on itself.
        for s in 0..=DOMAIN_SAMPLES {
            let r = m.r_max * s as f64 / DOMAIN_SAMPLES as f64;
            if m.radial_factor(r * r) <= 0.0 {
                return Err(Error::invalid(format!(
                    "radial factor non-positive at normalized radius {r:.6}"
                )));
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn radial_factor(&self, r2: f64) -> f64 {
        1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))
    }

    /// d(radial_factor)/d(r^2).
    #[inline]
    fn radial_factor_deriv(&self, r2: f64) -> f64 {
        self.k1 + r2 * (2.0 * self.k2 + r2 * 3.0 * self.k3)
    }

    /// Largest undistorted normalized radius reached by any image corner.
    fn corner_radius(&self) -> Result<f64> {
        let intr = &self.intrinsics;
        let (w, h) = (intr.width as f64 - 1.0, intr.height as f64 - 1.0);
        let mut r_max: f64 = 0.0;
        for (i, j) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)] {
            let xd = (i - intr.cx) / intr.fx;
            let yd = (j - intr.cy) / intr.fy;
            // The fixed point needs r_max already; bound the search with the
            // distorted radius inflated generously instead.
            let r = match undistort_fixed_point(self, xd, yd) {
                Ok((xu, yu)) => xu.hypot(yu),
                Err(_) => xd.hypot(yd),
            };
            r_max = r_max.max(r);
        }
        if !r_max.is_finite() {
            return Err(Error::invalid("corner undistortion produced non-finite radius"));
        }
        Ok(r_max.max(1e-6))
    }
}

pub fn project_brown_conrady(m: &BrownConradyParams, x3: &Vector3<f64>) -> Result<(f64, f64)> {
    if x3.z <= 0.0 {
        return Err(Error::NonPositiveDepth { z: x3.z });
    }
    let x = x3.x / x3.z;
    let y = x3.y / x3.z;
    let r2 = x * x + y * y;
    if r2.sqrt() > m.r_max * (1.0 + 1e-9) {
        return Err(Error::domain(format!(
            "normalized radius {:.6} exceeds r_max {:.6}",
            r2.sqrt(),
            m.r_max
        )));
    }
    let g = m.radial_factor(r2);
    let xp = x * g + 2.0 * m.p1 * x * y + m.p2 * (r2 + 2.0 * x * x);
    let yp = y * g + m.p1 * (r2 + 2.0 * y * y) + 2.0 * m.p2 * x * y;
    Ok((
        m.intrinsics.fx * xp + m.intrinsics.cx,
        m.intrinsics.fy * yp + m.intrinsics.cy,
    ))
}

/// Undistorted normalized coordinates of pixel p, via the fixed point
/// x <- (x_d - tangential(x, y)) / radial_factor(r^2).
pub fn unproject_brown_conrady(m: &BrownConradyParams, p: (f64, f64)) -> Result<(f64, f64)> {
    let xd = (p.0 - m.intrinsics.cx) / m.intrinsics.fx;
    let yd = (p.1 - m.intrinsics.cy) / m.intrinsics.fy;
    let (xu, yu) = undistort_fixed_point(m, xd, yd)?;
    if xu.hypot(yu) > m.r_max * (1.0 + 1e-9) {
        return Err(Error::domain(format!(
            "pixel {p:?} undistorts outside the valid radius"
        )));
    }
    Ok((xu, yu))
}

fn undistort_fixed_point(m: &BrownConradyParams, xd: f64, yd: f64) -> Result<(f64, f64)> {
    let mut x = xd;
    let mut y = yd;
    for _ in 0..UNDISTORT_MAX_ITERS {
        let r2 = x * x + y * y;
        let g = m.radial_factor(r2);
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::NoConvergence {
                iters: UNDISTORT_MAX_ITERS,
                residual: f64::INFINITY,
            });
        }
        let tx = 2.0 * m.p1 * x * y + m.p2 * (r2 + 2.0 * x * x);
        let ty = m.p1 * (r2 + 2.0 * y * y) + 2.0 * m.p2 * x * y;
        let xn = (xd - tx) / g;
        let yn = (yd - ty) / g;
        let delta = (xn - x).abs().max((yn - y).abs());
        x = xn;
        y = yn;
        if delta < UNDISTORT_TOL {
            return Ok((x, y));
        }
    }
    // Report the remaining forward residual, not the step size.
    let r2 = x * x + y * y;
    let g = m.radial_factor(r2);
    let fx = x * g + 2.0 * m.p1 * x * y + m.p2 * (r2 + 2.0 * x * x) - xd;
    let fy = y * g + m.p1 * (r2 + 2.0 * y * y) + 2.0 * m.p2 * x * y - yd;
    Err(Error::NoConvergence {
        iters: UNDISTORT_MAX_ITERS,
        residual: fx.hypot(fy),
    })
}

pub fn jacobian_brown_conrady(
    m: &BrownConradyParams,
    x3: &Vector3<f64>,
) -> Result<Matrix2x3<f64>> {
    if x3.z <= 0.0 {
        return Err(Error::NonPositiveDepth { z: x3.z });
    }
    let z = x3.z;
    let x = x3.x / z;
    let y = x3.y / z;
    let r2 = x * x + y * y;
    if r2.sqrt() > m.r_max * (1.0 + 1e-9) {
        return Err(Error::domain("jacobian outside valid radius".to_string()));
    }
    let g = m.radial_factor(r2);
    let gp = m.radial_factor_deriv(r2);
    // d(x', y')/d(x, y)
    let b00 = g + 2.0 * x * x * gp + 2.0 * m.p1 * y + 6.0 * m.p2 * x;
    let b01 = 2.0 * x * y * gp + 2.0 * m.p1 * x + 2.0 * m.p2 * y;
    let b10 = 2.0 * x * y * gp + 2.0 * m.p1 * x + 2.0 * m.p2 * y;
    let b11 = g + 2.0 * y * y * gp + 6.0 * m.p1 * y + 2.0 * m.p2 * x;
    // d(x, y)/dX
    let a = [
        [1.0 / z, 0.0, -x / z],
        [0.0, 1.0 / z, -y / z],
    ];
    let fx = m.intrinsics.fx;
    let fy = m.intrinsics.fy;
    let mut j = Matrix2x3::zeros();
    for col in 0..3 {
        j[(0, col)] = fx * (b00 * a[0][col] + b01 * a[1][col]);
        j[(1, col)] = fy * (b10 * a[0][col] + b11 * a[1][col]);
    }
    Ok(j)
}
