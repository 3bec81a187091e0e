//! Per-pair machinery: backward-warp synthesis with recorded intermediates,
//! the reconstruction adjoint that carries image-space gradients back to
//! depth values and pose parameters, and the depth-consistency term. All
//! reductions are serial so repeated runs are bit-identical.

use nalgebra::{Vector2, Vector3};

use crate::camera::{CameraModel, DistanceKind};
use crate::error::Result;
use crate::geometry::DiffTransform;
use crate::warp::{bilinear_scatter, bilinear_tap, bilinear_value_grad, BilinearTap, RayTable};

use super::photometric::{erode_window, pe_adjoint_planes};

#[inline]
fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Ray directions scaled so `range * dir` is the camera-frame point, one per
/// pixel, None where the model has no ray or planar depth is undefined.
pub(crate) fn scaled_rays(rays: &RayTable, kind: DistanceKind) -> Vec<Option<Vector3<f64>>> {
    (0..rays.width * rays.height)
        .map(|k| rays.scaled_dir(k, kind))
        .collect()
}

/// Intermediates of synthesizing one frame on another frame's pixel grid,
/// kept so the adjoint pass can re-walk the chain.
pub(crate) struct PairSynth {
    pub width: usize,
    pub height: usize,
    /// Window erosion of warp validity (ray defined, projection succeeded,
    /// sample fully in bounds); the pixels the error map may score.
    pub eroded: Vec<bool>,
    pub taps: Vec<Option<BilinearTap>>,
    /// Camera-frame points of the grid being synthesized.
    pub world: Vec<Vector3<f64>>,
    /// The same points expressed in the sampled frame.
    pub moved: Vec<Vector3<f64>>,
    /// Synthesized channel planes, zero at invalid pixels.
    pub synth: Vec<Vec<f64>>,
}

/// Backward warp of `sample_planes` onto the grid carrying `depth_full`,
/// through `pose` and the shared camera.
pub(crate) fn synth_pair(
    scaled: &[Option<Vector3<f64>>],
    width: usize,
    height: usize,
    depth_full: &[f64],
    pose: &DiffTransform,
    cam: &CameraModel,
    sample_planes: &[Vec<f64>],
) -> PairSynth {
    let px = width * height;
    let mut valid = vec![false; px];
    let mut taps: Vec<Option<BilinearTap>> = vec![None; px];
    let mut world = vec![Vector3::zeros(); px];
    let mut moved = vec![Vector3::zeros(); px];
    let mut synth = vec![vec![0.0; px]; sample_planes.len()];
    for k in 0..px {
        let Some(dir) = scaled[k] else { continue };
        let x = depth_full[k] * dir;
        let y = pose.apply(&x);
        let Ok((u, v)) = cam.project(&y) else { continue };
        let Some(tap) = bilinear_tap(u, v, width, height) else {
            continue;
        };
        for (c, plane) in sample_planes.iter().enumerate() {
            synth[c][k] = bilinear_value_grad(plane, width, &tap).0;
        }
        world[k] = x;
        moved[k] = y;
        taps[k] = Some(tap);
        valid[k] = true;
    }
    let eroded = erode_window(Some(&valid), width, height);
    PairSynth {
        width,
        height,
        eroded,
        taps,
        world,
        moved,
        synth,
    }
}

/// Push the upstream error-map gradient `dpe` of one synthesized pair back
/// onto the synthesizing grid's depth raster and the pose parameters. The
/// photometric adjoint spreads gradients over 3x3 windows, so any warp-valid
/// pixel may receive mass, not only scored ones.
pub(crate) fn recon_pair_adjoint(
    rec: &PairSynth,
    grid_planes: &[Vec<f64>],
    scaled: &[Option<Vector3<f64>>],
    pose: &DiffTransform,
    cam: &CameraModel,
    sample_planes: &[Vec<f64>],
    omega: f64,
    dpe: &[f64],
    d_depth: &mut [f64],
    d_pose: &mut [f64],
) -> Result<()> {
    let mut grad_b = vec![vec![0.0; rec.width * rec.height]; rec.synth.len()];
    pe_adjoint_planes(grid_planes, &rec.synth, rec.width, omega, dpe, &mut grad_b);
    for k in 0..rec.width * rec.height {
        let Some(tap) = &rec.taps[k] else { continue };
        let (mut du, mut dv) = (0.0, 0.0);
        let mut any = false;
        for (c, plane) in sample_planes.iter().enumerate() {
            let g = grad_b[c][k];
            if g == 0.0 {
                continue;
            }
            any = true;
            let (_, dx, dy) = bilinear_value_grad(plane, rec.width, tap);
            du += g * dx;
            dv += g * dy;
        }
        if !any {
            continue;
        }
        let jac = cam.jacobian_project(&rec.moved[k])?;
        let dy_pt = jac.transpose() * Vector2::new(du, dv);
        let dir = scaled[k].expect("warp-valid pixel has a ray");
        d_depth[k] += dy_pt.dot(&(pose.rot * dir));
        for (p, (dr, dt)) in pose.d_rot.iter().zip(pose.d_trans.iter()).enumerate() {
            d_pose[p] += dy_pt.dot(&(dr * rec.world[k] + dt));
        }
    }
    Ok(())
}

/// One directed depth-consistency term: frame-a depth transported into frame
/// b, compared against frame-b depth sampled at the reprojected coordinates.
pub(crate) struct ConsistencyTerm {
    pub loss: f64,
    pub count: usize,
    taps: Vec<Option<BilinearTap>>,
    world: Vec<Vector3<f64>>,
    moved: Vec<Vector3<f64>>,
    rho: Vec<f64>,
    sampled: Vec<f64>,
}

pub(crate) fn consistency_pair(
    scaled: &[Option<Vector3<f64>>],
    width: usize,
    height: usize,
    depth_a: &[f64],
    pose: &DiffTransform,
    cam: &CameraModel,
    depth_b: &[f64],
) -> ConsistencyTerm {
    let px = width * height;
    let mut taps: Vec<Option<BilinearTap>> = vec![None; px];
    let mut world = vec![Vector3::zeros(); px];
    let mut moved = vec![Vector3::zeros(); px];
    let mut rho = vec![0.0; px];
    let mut sampled = vec![0.0; px];
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in 0..px {
        let Some(dir) = scaled[k] else { continue };
        let x = depth_a[k] * dir;
        let y = pose.apply(&x);
        let range = match cam.distance_kind {
            DistanceKind::PlanarDepth => y.z,
            DistanceKind::EuclideanDistance => y.norm(),
        };
        if range <= 1e-12 {
            continue;
        }
        let Ok((u, v)) = cam.project(&y) else { continue };
        let Some(tap) = bilinear_tap(u, v, width, height) else {
            continue;
        };
        let s = bilinear_value_grad(depth_b, width, &tap).0;
        world[k] = x;
        moved[k] = y;
        rho[k] = range;
        sampled[k] = s;
        taps[k] = Some(tap);
        sum += (range - s).abs();
        count += 1;
    }
    let loss = if count == 0 { 0.0 } else { sum / count as f64 };
    ConsistencyTerm {
        loss,
        count,
        taps,
        world,
        moved,
        rho,
        sampled,
    }
}

/// Adjoint of `consistency_pair` scaled by the upstream weight: gradients on
/// the transported side reach `depth_a` and the pose twice (through the range
/// and through the sampling coordinates), the sampled side scatters onto
/// `depth_b` through the bilinear taps.
pub(crate) fn consistency_adjoint(
    term: &ConsistencyTerm,
    scaled: &[Option<Vector3<f64>>],
    pose: &DiffTransform,
    cam: &CameraModel,
    depth_b: &[f64],
    width: usize,
    weight: f64,
    d_depth_a: &mut [f64],
    d_depth_b: &mut [f64],
    d_pose: &mut [f64],
) -> Result<()> {
    if term.count == 0 || weight == 0.0 {
        return Ok(());
    }
    let inv_n = weight / term.count as f64;
    for (k, tap) in term.taps.iter().enumerate() {
        let Some(tap) = tap else { continue };
        let g = inv_n * signum0(term.rho[k] - term.sampled[k]);
        if g == 0.0 {
            continue;
        }
        let drho = match cam.distance_kind {
            DistanceKind::PlanarDepth => Vector3::new(0.0, 0.0, 1.0),
            DistanceKind::EuclideanDistance => term.moved[k] / term.moved[k].norm(),
        };
        let mut dy_pt = g * drho;
        bilinear_scatter(d_depth_b, width, tap, -g);
        let (_, dxb, dyb) = bilinear_value_grad(depth_b, width, tap);
        let jac = cam.jacobian_project(&term.moved[k])?;
        dy_pt += jac.transpose() * Vector2::new(-g * dxb, -g * dyb);
        let dir = scaled[k].expect("valid pixel has a ray");
        d_depth_a[k] += dy_pt.dot(&(pose.rot * dir));
        for (p, (dr, dt)) in pose.d_rot.iter().zip(pose.d_trans.iter()).enumerate() {
            d_pose[p] += dy_pt.dot(&(dr * term.world[k] + dt));
        }
    }
    Ok(())
}
