//! Rigid transforms between camera frames and odometry-based scale recovery.
//!
//! Rotations are stored as axis-angle vectors (rotation vector omega whose
//! norm is the angle in radians). `apply` maps points from the source frame
//! into the destination frame: X_dst = R * X_src + t.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// Angle below which Taylor expansions replace the closed-form exp/log maps.
const SMALL_ANGLE: f64 = 1e-9;

/// Rigid transform: rotation (axis-angle) followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se3Transform {
    pub rotation: Vector3<f64>,
    pub translation: Vector3<f64>,
}

impl Se3Transform {
    pub fn identity() -> Self {
        Se3Transform {
            rotation: Vector3::zeros(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Se3Transform {
            rotation,
            translation,
        }
    }

    /// Build from a 6-vector laid out as [w1, w2, w3, t1, t2, t3].
    pub fn from_params(p: &[f64; 6]) -> Self {
        Se3Transform {
            rotation: Vector3::new(p[0], p[1], p[2]),
            translation: Vector3::new(p[3], p[4], p[5]),
        }
    }

    pub fn params(&self) -> [f64; 6] {
        [
            self.rotation.x,
            self.rotation.y,
            self.rotation.z,
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        rotation_exp(&self.rotation)
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * x + self.translation
    }

    /// self then other: (other * self).apply(x) == other.apply(self.apply(x)).
    pub fn compose(&self, first: &Se3Transform) -> Se3Transform {
        let r = self.rotation_matrix() * first.rotation_matrix();
        let t = self.rotation_matrix() * first.translation + self.translation;
        Se3Transform {
            rotation: rotation_log(&r),
            translation: t,
        }
    }

    pub fn inverse(&self) -> Se3Transform {
        let rt = self.rotation_matrix().transpose();
        Se3Transform {
            rotation: -self.rotation,
            translation: -(rt * self.translation),
        }
    }
}

/// Rodrigues formula.
pub fn rotation_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let k = skew(omega);
    if theta < SMALL_ANGLE {
        // sin t / t -> 1, (1 - cos t) / t^2 -> 1/2
        return Matrix3::identity() + k + 0.5 * (k * k);
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + a * k + b * (k * k)
}

/// Inverse of `rotation_exp`, returning the rotation vector with angle in
/// [0, pi]. Stable near both zero and pi.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let trace = r.trace();
    let cos_theta = ((trace - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta < SMALL_ANGLE {
        // R approx I + skew(w)
        return 0.5
            * Vector3::new(
                r[(2, 1)] - r[(1, 2)],
                r[(0, 2)] - r[(2, 0)],
                r[(1, 0)] - r[(0, 1)],
            );
    }
    if (std::f64::consts::PI - theta) < 1e-6 {
        // Near pi the antisymmetric part vanishes; recover the axis from the
        // dominant diagonal of (R + I)/2 = axis * axis^T at theta = pi.
        let b = 0.5 * (r + Matrix3::identity());
        let (d0, d1, d2) = (b[(0, 0)], b[(1, 1)], b[(2, 2)]);
        let k = if d0 >= d1 && d0 >= d2 {
            0
        } else if d1 >= d2 {
            1
        } else {
            2
        };
        let mut axis = Vector3::new(
            b[(0, k)] / b[(k, k)].sqrt(),
            b[(1, k)] / b[(k, k)].sqrt(),
            b[(2, k)] / b[(k, k)].sqrt(),
        );
        axis /= axis.norm();
        // Fix the sign using the antisymmetric residue (zero exactly at pi,
        // where either sign is correct).
        let asym = Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        );
        if axis.dot(&asym) < 0.0 {
            axis = -axis;
        }
        return theta * axis;
    }
    let factor = theta / (2.0 * theta.sin());
    factor
        * Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        )
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Derivatives of the rotation matrix with respect to each rotation-vector
/// component: dR/dw_i for i = 0, 1, 2.
///
/// Closed form for w != 0:
///   dR/dw_i = (w_i [w]x + [w x ((I - R) e_i)]x) / |w|^2 * R
/// and [e_i]x at w = 0.
pub fn rotation_jacobian(omega: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let theta2 = omega.norm_squared();
    if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        return [
            skew(&Vector3::x()),
            skew(&Vector3::y()),
            skew(&Vector3::z()),
        ];
    }
    let r = rotation_exp(omega);
    let eye_minus_r = Matrix3::identity() - r;
    let mut out = [Matrix3::zeros(); 3];
    for i in 0..3 {
        let e = Vector3::ith(i, 1.0);
        let v = omega[i] * omega + omega.cross(&(eye_minus_r * e));
        out[i] = (skew(&v) / theta2) * r;
    }
    out
}

/// One odometry reading: vehicle speed at a timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometrySample {
    pub timestamp_s: f64,
    pub speed_mps: f64,
}

/// Distance traveled between two consecutive readings, trapezoid rule:
/// 0.5 * (v0 + v1) * (t1 - t0).
pub fn displacement_from_odometry(s0: &OdometrySample, s1: &OdometrySample) -> Result<f64> {
    if s1.timestamp_s <= s0.timestamp_s {
        return Err(Error::NonMonotonicTime { index: 1 });
    }
    Ok(0.5 * (s0.speed_mps + s1.speed_mps) * (s1.timestamp_s - s0.timestamp_s))
}

/// Distance traveled between t0 and t1 across a whole odometry sequence,
/// applying the trapezoid rule per interval. Speeds at t0 and t1 are linearly
/// interpolated when they fall between samples.
pub fn integrate_odometry(samples: &[OdometrySample], t0: f64, t1: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            what: "odometry samples".into(),
        });
    }
    for (idx, pair) in samples.windows(2).enumerate() {
        if pair[1].timestamp_s <= pair[0].timestamp_s {
            return Err(Error::NonMonotonicTime { index: idx + 1 });
        }
    }
    if !(t1 > t0) {
        return Err(Error::invalid(format!("time window [{t0}, {t1}]")));
    }
    let lo = samples[0].timestamp_s;
    let hi = samples[samples.len() - 1].timestamp_s;
    if t0 < lo || t1 > hi {
        return Err(Error::domain(format!(
            "window [{t0}, {t1}] outside odometry span [{lo}, {hi}]"
        )));
    }
    let speed_at = |t: f64| -> f64 {
        let k = samples.partition_point(|s| s.timestamp_s <= t);
        if k == 0 {
            return samples[0].speed_mps;
        }
        if k == samples.len() {
            return samples[samples.len() - 1].speed_mps;
        }
        let a = &samples[k - 1];
        let b = &samples[k];
        let w = (t - a.timestamp_s) / (b.timestamp_s - a.timestamp_s);
        a.speed_mps + w * (b.speed_mps - a.speed_mps)
    };
    let mut knots = vec![(t0, speed_at(t0))];
    for s in samples {
        if s.timestamp_s > t0 && s.timestamp_s < t1 {
            knots.push((s.timestamp_s, s.speed_mps));
        }
    }
    knots.push((t1, speed_at(t1)));
    let mut dist = 0.0;
    for pair in knots.windows(2) {
        let (ta, va) = pair[0];
        let (tb, vb) = pair[1];
        dist += 0.5 * (va + vb) * (tb - ta);
    }
    Ok(dist)
}

/// Rescale a unit-norm-ambiguous pose so its translation has length
/// `displacement`; the rotation is untouched.
pub fn scale_pose(pose: &Se3Transform, displacement: f64) -> Result<Se3Transform> {
    let norm = pose.translation.norm();
    if norm <= 1e-6 {
        return Err(Error::DegenerateTranslation { norm });
    }
    if !(displacement.is_finite() && displacement >= 0.0) {
        return Err(Error::invalid(format!("displacement {displacement}")));
    }
    Ok(Se3Transform {
        rotation: pose.rotation,
        translation: pose.translation * (displacement / norm),
    })
}

/// Transform whose (R, t) carry forward-mode derivatives with respect to a
/// fixed set of scalar parameters. Built from `Se3Transform`s and combined
/// with `inverse`/`compose`, it lets warp gradients reach the primary pose
/// parameters through arbitrary chains of inversions and compositions.
#[derive(Debug, Clone)]
pub struct DiffTransform {
    pub rot: Matrix3<f64>,
    pub trans: Vector3<f64>,
    pub d_rot: Vec<Matrix3<f64>>,
    pub d_trans: Vec<Vector3<f64>>,
}

impl DiffTransform {
    /// Constant transform: all derivatives zero.
    pub fn constant(pose: &Se3Transform, n_params: usize) -> Self {
        DiffTransform {
            rot: pose.rotation_matrix(),
            trans: pose.translation,
            d_rot: vec![Matrix3::zeros(); n_params],
            d_trans: vec![Vector3::zeros(); n_params],
        }
    }

    /// Transform parameterized by entries [offset, offset + 6) of the global
    /// parameter vector, laid out as [w1, w2, w3, t1, t2, t3].
    pub fn from_pose(pose: &Se3Transform, n_params: usize, offset: usize) -> Self {
        let mut out = Self::constant(pose, n_params);
        let dr = rotation_jacobian(&pose.rotation);
        for i in 0..3 {
            out.d_rot[offset + i] = dr[i];
            out.d_trans[offset + 3 + i] = Vector3::ith(i, 1.0);
        }
        out
    }

    pub fn inverse(&self) -> DiffTransform {
        let rt = self.rot.transpose();
        let n = self.d_rot.len();
        let mut d_rot = Vec::with_capacity(n);
        let mut d_trans = Vec::with_capacity(n);
        for k in 0..n {
            let drt = self.d_rot[k].transpose();
            d_rot.push(drt);
            d_trans.push(-(drt * self.trans) - rt * self.d_trans[k]);
        }
        DiffTransform {
            rot: rt,
            trans: -(rt * self.trans),
            d_rot,
            d_trans,
        }
    }

    /// self after first: result.apply(x) == self.apply(first.apply(x)).
    pub fn compose(&self, first: &DiffTransform) -> DiffTransform {
        let n = self.d_rot.len();
        assert_eq!(n, first.d_rot.len());
        let mut d_rot = Vec::with_capacity(n);
        let mut d_trans = Vec::with_capacity(n);
        for k in 0..n {
            d_rot.push(self.d_rot[k] * first.rot + self.rot * first.d_rot[k]);
            d_trans.push(self.d_rot[k] * first.trans + self.rot * first.d_trans[k] + self.d_trans[k]);
        }
        DiffTransform {
            rot: self.rot * first.rot,
            trans: self.rot * first.trans + self.trans,
            d_rot,
            d_trans,
        }
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rot * x + self.trans
    }
}
