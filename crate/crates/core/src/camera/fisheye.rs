//! Radially symmetric fisheye models.
//!
//! Projection runs in four steps: normalize X to the unit sphere S, take the
//! incident angle theta between S and the optical axis, evaluate the model's
//! radial function r(theta) in pixels, then place the pixel along the unit
//! image-plane offset:
//!
//! ```text
//! S = X / |X|,  theta = pi/2 - asin(s_z),  rho = sqrt(s_x^2 + s_y^2)
//! i = r(theta) * s_x / rho + cx,  j = r(theta) * s_y / rho + cy
//! ```
//!
//! Radial functions:
//!   Polynomial     r = a1 t + a2 t^2 + a3 t^3 + a4 t^4
//!   UCM            r = f sin t / (cos t + xi)
//!   eUCM           r = f sin t / (cos t + alpha (sqrt(beta sin^2 t + cos^2 t) - cos t))
//!   Rectilinear    r = f tan t
//!   Stereographic  r = 2 f tan(t/2)
//!   Double sphere  r = f sin t / (alpha sqrt(sin^2 t + (xi + cos t)^2) + (1 - alpha)(xi + cos t))

use super::lut::InverseLut;
use crate::error::{Error, Result};
use nalgebra::{Matrix2x3, Vector3};
use std::f64::consts::PI;

/// Construction sweep density for the monotonicity check.
const MONOTONE_SAMPLES: usize = 10_000;
const NEWTON_MAX_ITERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FisheyeKind {
    Polynomial { a1: f64, a2: f64, a3: f64, a4: f64 },
    Ucm { f: f64, xi: f64 },
    Eucm { f: f64, alpha: f64, beta: f64 },
    Rectilinear { f: f64 },
    Stereographic { f: f64 },
    DoubleSphere { f: f64, xi: f64, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisheyeModel {
    pub kind: FisheyeKind,
    /// Distortion centre in pixels.
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Largest supported incident angle in radians.
    pub theta_max: f64,
}

impl FisheyeModel {
    /// Validates parameters and certifies that r(theta) is strictly
    /// increasing on [0, theta_max] over a dense sweep. `theta_max` of None
    /// picks the model default (100 degrees; 89 for rectilinear, which is
    /// also a hard cap for that model).
    pub fn new(
        kind: FisheyeKind,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        theta_max: Option<f64>,
    ) -> Result<Self> {
        validate_kind(&kind)?;
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image size {width}x{height}")));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::invalid(format!(
                "distortion centre ({cx}, {cy}) outside {width}x{height}"
            )));
        }
        let rectilinear_cap = 89.0_f64.to_radians();
        let default = match kind {
            FisheyeKind::Rectilinear { .. } => rectilinear_cap,
            _ => 100.0_f64.to_radians(),
        };
        let mut theta_max = theta_max.unwrap_or(default);
        if let FisheyeKind::Rectilinear { .. } = kind {
            theta_max = theta_max.min(rectilinear_cap);
        }
        if !(theta_max.is_finite() && theta_max > 0.0 && theta_max <= PI) {
            return Err(Error::invalid(format!("theta_max {theta_max}")));
        }
        let m = FisheyeModel {
            kind,
            cx,
            cy,
            width,
            height,
            theta_max,
        };
        let mut prev = 0.0;
        for s in 1..=MONOTONE_SAMPLES {
            let theta = theta_max * s as f64 / MONOTONE_SAMPLES as f64;
            let r = radial_eval(&m.kind, theta);
            if !(r.is_finite() && r > prev) {
                return Err(Error::NonMonotoneRadial { theta });
            }
            prev = r;
        }
        Ok(m)
    }

    /// r at the domain edge; the largest radius the model produces.
    pub fn r_max(&self) -> f64 {
        radial_eval(&self.kind, self.theta_max)
    }
}

fn validate_kind(kind: &FisheyeKind) -> Result<()> {
    let check_pos = |name: &str, v: f64| -> Result<()> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("{name} = {v}, must be > 0")));
        }
        Ok(())
    };
    match *kind {
        FisheyeKind::Polynomial { a1, a2, a3, a4 } => {
            check_pos("a1", a1)?;
            for (n, v) in [("a2", a2), ("a3", a3), ("a4", a4)] {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("{n} = {v}")));
                }
            }
        }
        FisheyeKind::Ucm { f, xi } => {
            check_pos("f", f)?;
            if !(xi.is_finite() && xi >= 0.0) {
                return Err(Error::invalid(format!("xi = {xi}, must be >= 0")));
            }
        }
        FisheyeKind::Eucm { f, alpha, beta } => {
            check_pos("f", f)?;
            check_pos("beta", beta)?;
            if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
                return Err(Error::invalid(format!("alpha = {alpha}, must be in [0, 1]")));
            }
        }
        FisheyeKind::Rectilinear { f } | FisheyeKind::Stereographic { f } => {
            check_pos("f", f)?;
        }
        FisheyeKind::DoubleSphere { f, xi, alpha } => {
            check_pos("f", f)?;
            if !xi.is_finite() {
                return Err(Error::invalid(format!("xi = {xi}")));
            }
            if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
                return Err(Error::invalid(format!("alpha = {alpha}, must be in [0, 1]")));
            }
        }
    }
    Ok(())
}

/// r(theta) without the domain guard; used by construction sweeps.
pub(crate) fn radial_eval(kind: &FisheyeKind, theta: f64) -> f64 {
    let (st, ct) = (theta.sin(), theta.cos());
    match *kind {
        FisheyeKind::Polynomial { a1, a2, a3, a4 } => {
            theta * (a1 + theta * (a2 + theta * (a3 + theta * a4)))
        }
        FisheyeKind::Ucm { f, xi } => f * st / (ct + xi),
        FisheyeKind::Eucm { f, alpha, beta } => {
            let w = (beta * st * st + ct * ct).sqrt();
            f * st / (ct + alpha * (w - ct))
        }
        FisheyeKind::Rectilinear { f } => f * theta.tan(),
        FisheyeKind::Stereographic { f } => 2.0 * f * (theta * 0.5).tan(),
        FisheyeKind::DoubleSphere { f, xi, alpha } => {
            let d2 = (st * st + (xi + ct) * (xi + ct)).sqrt();
            f * st / (alpha * d2 + (1.0 - alpha) * (xi + ct))
        }
    }
}

/// dr/dtheta.
pub(crate) fn radial_deriv_eval(kind: &FisheyeKind, theta: f64) -> f64 {
    let (st, ct) = (theta.sin(), theta.cos());
    match *kind {
        FisheyeKind::Polynomial { a1, a2, a3, a4 } => {
            a1 + theta * (2.0 * a2 + theta * (3.0 * a3 + theta * 4.0 * a4))
        }
        FisheyeKind::Ucm { f, xi } => {
            let den = ct + xi;
            f * (1.0 + xi * ct) / (den * den)
        }
        FisheyeKind::Eucm { f, alpha, beta } => {
            let w = (beta * st * st + ct * ct).sqrt();
            let den = ct + alpha * (w - ct);
            let dw = if w > 1e-15 { (beta - 1.0) * st * ct / w } else { 0.0 };
            let dden = -st + alpha * (dw + st);
            f * (ct * den - st * dden) / (den * den)
        }
        FisheyeKind::Rectilinear { f } => f / (ct * ct),
        FisheyeKind::Stereographic { f } => {
            let c = (theta * 0.5).cos();
            f / (c * c)
        }
        FisheyeKind::DoubleSphere { f, xi, alpha } => {
            let d2 = (st * st + (xi + ct) * (xi + ct)).sqrt();
            let den = alpha * d2 + (1.0 - alpha) * (xi + ct);
            let dd2 = if d2 > 1e-15 { -xi * st / d2 } else { 0.0 };
            let dden = alpha * dd2 - (1.0 - alpha) * st;
            f * (ct * den - st * dden) / (den * den)
        }
    }
}

/// Radius on the image plane for incident angle theta.
pub fn radial(m: &FisheyeModel, theta: f64) -> Result<f64> {
    if !(0.0..=m.theta_max * (1.0 + 1e-12)).contains(&theta) {
        return Err(Error::domain(format!(
            "theta {theta} outside [0, {}]",
            m.theta_max
        )));
    }
    Ok(radial_eval(&m.kind, theta))
}

/// dr/dtheta at theta.
pub fn radial_deriv(m: &FisheyeModel, theta: f64) -> Result<f64> {
    if !(0.0..=m.theta_max * (1.0 + 1e-12)).contains(&theta) {
        return Err(Error::domain(format!(
            "theta {theta} outside [0, {}]",
            m.theta_max
        )));
    }
    Ok(radial_deriv_eval(&m.kind, theta))
}

/// Incident angle whose radius is r. Closed form for all models except the
/// polynomial, which runs Newton seeded by the LUT (or r/a1 without one).
pub fn inverse_radial(m: &FisheyeModel, r: f64, lut: Option<&InverseLut>) -> Result<f64> {
    let r_end = m.r_max();
    if !(0.0..=r_end * (1.0 + 1e-9)).contains(&r) {
        return Err(Error::domain(format!("radius {r} outside [0, {r_end}]")));
    }
    let r = r.min(r_end);
    if r <= 0.0 {
        return Ok(0.0);
    }
    let theta = match m.kind {
        FisheyeKind::Rectilinear { f } => (r / f).atan(),
        FisheyeKind::Stereographic { f } => 2.0 * (r / (2.0 * f)).atan(),
        FisheyeKind::Ucm { f, xi } => {
            // sin t - m cos t = m xi with m = r/f
            let mr = r / f;
            let phi = mr.atan();
            let s = (mr * xi / (1.0 + mr * mr).sqrt()).clamp(-1.0, 1.0);
            phi + s.asin()
        }
        FisheyeKind::Eucm { f, alpha, beta } => {
            let mr = r / f;
            let m2 = mr * mr;
            let mz = (1.0 - beta * alpha * alpha * m2)
                / (alpha * (1.0 - (2.0 * alpha - 1.0) * beta * m2).max(0.0).sqrt() + 1.0 - alpha);
            mr.atan2(mz)
        }
        FisheyeKind::DoubleSphere { f, xi, alpha } => {
            let mr = r / f;
            let m2 = mr * mr;
            let mz = (1.0 - alpha * alpha * m2)
                / (alpha * (1.0 - (2.0 * alpha - 1.0) * m2).max(0.0).sqrt() + 1.0 - alpha);
            let k = (mz * xi + (mz * mz + (1.0 - xi * xi) * m2).sqrt()) / (mz * mz + m2);
            (k * mr).atan2(k * mz - xi)
        }
        FisheyeKind::Polynomial { a1, .. } => {
            let seed = match lut {
                Some(table) => table.lookup_clamped(r),
                None => (r / a1).min(m.theta_max),
            };
            newton_polynomial(m, r, seed)?.0
        }
    };
    Ok(theta.clamp(0.0, m.theta_max))
}

/// Newton iteration on g(t) = r(t) - r. Returns the root and the number of
/// iterations spent.
pub(crate) fn newton_polynomial(m: &FisheyeModel, r: f64, seed: f64) -> Result<(f64, usize)> {
    let tol = 1e-9 * r.max(1.0);
    let mut theta = seed.clamp(0.0, m.theta_max);
    for iter in 0..NEWTON_MAX_ITERS {
        let g = radial_eval(&m.kind, theta) - r;
        if g.abs() <= tol {
            return Ok((theta, iter));
        }
        let dg = radial_deriv_eval(&m.kind, theta);
        if dg.abs() < 1e-15 {
            break;
        }
        theta = (theta - g / dg).clamp(0.0, m.theta_max);
    }
    let residual = (radial_eval(&m.kind, theta) - r).abs();
    if residual <= tol {
        return Ok((theta, NEWTON_MAX_ITERS));
    }
    Err(Error::NoConvergence {
        iters: NEWTON_MAX_ITERS,
        residual,
    })
}

pub fn project_fisheye(m: &FisheyeModel, x: &Vector3<f64>) -> Result<(f64, f64)> {
    let n = x.norm();
    if n < 1e-15 {
        return Err(Error::ZeroVector {
            what: "projection input".into(),
        });
    }
    let s = x / n;
    let rho = s.x.hypot(s.y);
    let theta = rho.atan2(s.z);
    if theta > m.theta_max * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "incident angle {theta} exceeds theta_max {}",
            m.theta_max
        )));
    }
    if rho < 1e-15 {
        return Ok((m.cx, m.cy));
    }
    let r = radial_eval(&m.kind, theta.min(m.theta_max));
    Ok((r * s.x / rho + m.cx, r * s.y / rho + m.cy))
}

pub fn jacobian_fisheye(m: &FisheyeModel, x: &Vector3<f64>) -> Result<Matrix2x3<f64>> {
    let n = x.norm();
    if n < 1e-15 {
        return Err(Error::ZeroVector {
            what: "jacobian input".into(),
        });
    }
    let rho3 = x.x.hypot(x.y);
    let theta = rho3.atan2(x.z);
    if theta > m.theta_max * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "incident angle {theta} exceeds theta_max {}",
            m.theta_max
        )));
    }
    if rho3 < 1e-9 * n {
        // On axis: i - cx ~= r'(0) * X/z, j - cy ~= r'(0) * Y/z.
        let rp0 = radial_deriv_eval(&m.kind, 0.0);
        let mut j = Matrix2x3::zeros();
        j[(0, 0)] = rp0 / x.z;
        j[(1, 1)] = rp0 / x.z;
        return Ok(j);
    }
    let n2 = n * n;
    let r = radial_eval(&m.kind, theta);
    let rp = radial_deriv_eval(&m.kind, theta);
    // theta = atan2(rho3, z) on the raw point
    let dtheta = Vector3::new(
        x.z * x.x / (rho3 * n2),
        x.z * x.y / (rho3 * n2),
        -rho3 / n2,
    );
    // unit in-plane direction (u, v) = (X, Y)/rho3
    let u = x.x / rho3;
    let v = x.y / rho3;
    let du = Vector3::new(v * v / rho3, -u * v / rho3, 0.0);
    let dv = Vector3::new(-u * v / rho3, u * u / rho3, 0.0);
    let mut jac = Matrix2x3::zeros();
    for col in 0..3 {
        jac[(0, col)] = rp * dtheta[col] * u + r * du[col];
        jac[(1, col)] = rp * dtheta[col] * v + r * dv[col];
    }
    Ok(jac)
}
