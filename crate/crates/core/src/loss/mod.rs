//! Self-supervised view-synthesis objective: photometric reconstruction with
//! a per-pixel minimum over sources, static-pixel masking, percentile
//! clipping, edge-aware smoothness and cross-frame depth consistency, over a
//! multi-scale depth pyramid. Forward values come with hand-rolled adjoints
//! so the optimizer gets exact gradients with respect to every depth raster
//! and both pose parameter blocks.

mod pair;
mod photometric;
mod smooth;

pub use photometric::{photometric_error, ssim_map};
pub use smooth::smoothness_loss;

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::geometry::{DiffTransform, Se3Transform};
use crate::grid::{DepthMap, ImageBuffer};
use crate::warp::RayTable;

use pair::{
    consistency_adjoint, consistency_pair, recon_pair_adjoint, scaled_rays, synth_pair, PairSynth,
};
use photometric::{channel_planes, erode_window, pe_map_planes};
use smooth::smoothness_with_grad;

/// How a network sigmoid in [0, 1] maps to metric depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmoidDepthKind {
    /// Affine in inverse depth: sigma 0 is the far bound, 1 the near bound.
    PinholeReciprocal,
    /// Affine in depth: sigma 0 is the near bound, 1 the far bound.
    FisheyeAffine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidDepthParams {
    pub kind: SigmoidDepthKind,
    pub min_depth: f64,
    pub max_depth: f64,
}

impl SigmoidDepthParams {
    pub fn new(kind: SigmoidDepthKind, min_depth: f64, max_depth: f64) -> Result<Self> {
        if !(min_depth.is_finite() && max_depth.is_finite() && 0.0 < min_depth && min_depth < max_depth) {
            return Err(Error::invalid(format!(
                "depth bounds [{min_depth}, {max_depth}]"
            )));
        }
        Ok(SigmoidDepthParams {
            kind,
            min_depth,
            max_depth,
        })
    }
}

pub fn sigmoid_to_depth(sigma: f64, params: &SigmoidDepthParams) -> Result<f64> {
    Ok(sigmoid_to_depth_grad(sigma, params)?.0)
}

/// Depth and its derivative with respect to the sigmoid value.
pub fn sigmoid_to_depth_grad(sigma: f64, params: &SigmoidDepthParams) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::domain(format!("sigmoid value {sigma}")));
    }
    match params.kind {
        SigmoidDepthKind::PinholeReciprocal => {
            let b = 1.0 / params.max_depth;
            let a = 1.0 / params.min_depth - b;
            let inv = a * sigma + b;
            Ok((1.0 / inv, -a / (inv * inv)))
        }
        SigmoidDepthKind::FisheyeAffine => {
            let a = params.max_depth - params.min_depth;
            Ok((a * sigma + params.min_depth, a))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// SSIM share of the mixed photometric error.
    pub ssim_weight: f64,
    /// Multiplier on the smoothness term.
    pub smoothness_weight: f64,
    /// Multiplier on the depth-consistency term.
    pub consistency_weight: f64,
    /// Percentile for error clipping, in (0, 1]; 1 disables clipping.
    pub clip_percentile: f64,
    /// Pyramid levels scored; level s is weighted by 1/2^s.
    pub num_scales: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            ssim_weight: 0.85,
            smoothness_weight: 1e-3,
            consistency_weight: 1e-3,
            clip_percentile: 0.95,
            num_scales: 1,
        }
    }
}

/// Raw per-scale terms before scale weighting.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScaleLoss {
    pub reconstruction_forward: f64,
    pub reconstruction_backward: f64,
    pub depth_consistency: f64,
    pub smoothness: f64,
}

/// Scale-weighted objective terms. The four component fields already include
/// the 1/2^s scale weights; `total` further applies the consistency and
/// smoothness multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub per_scale: Vec<ScaleLoss>,
    pub reconstruction_forward: f64,
    pub reconstruction_backward: f64,
    pub depth_consistency: f64,
    pub smoothness: f64,
    pub total: f64,
}

/// Gradients of `LossBreakdown::total`: one raster per frame and pyramid
/// level, plus the two pose blocks laid out as
/// [prev w1 w2 w3 t1 t2 t3, next w1 w2 w3 t1 t2 t3].
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub d_depth: Vec<Vec<Vec<f64>>>,
    pub d_pose: [f64; 12],
}

/// A three-frame training sample. `frames` and `depths` are ordered
/// [previous, target, next]; `poses` carry the rigid motions target-to-
/// previous and target-to-next. Depth pyramids list full resolution first,
/// every further level halving both dimensions (floor, minimum 1).
#[derive(Clone, Copy)]
pub struct SequenceSample<'a> {
    pub frames: [&'a ImageBuffer; 3],
    pub depths: [&'a [DepthMap]; 3],
    pub poses: [&'a Se3Transform; 2],
}

/// Expected raster size of pyramid level `s` for a full resolution (w, h).
pub fn scale_dims(width: usize, height: usize, s: usize) -> (usize, usize) {
    ((width >> s).max(1), (height >> s).max(1))
}

/// Per-pixel minimum across candidate error maps. A pixel stays valid only
/// where every candidate scored it, so the minimum compares like with like;
/// ties pick the earliest map.
pub fn min_reconstruction(maps: &[(&[f64], &[bool])]) -> Result<(Vec<f64>, Vec<bool>, Vec<usize>)> {
    if maps.is_empty() {
        return Err(Error::EmptyInput {
            what: "reconstruction maps".into(),
        });
    }
    let n = maps[0].0.len();
    for (pe, v) in maps {
        if pe.len() != n || v.len() != n {
            return Err(Error::mismatch("reconstruction map lengths".to_string()));
        }
    }
    let mut best = vec![0.0; n];
    let mut valid = vec![false; n];
    let mut arg = vec![0usize; n];
    for k in 0..n {
        if !maps.iter().all(|(_, v)| v[k]) {
            continue;
        }
        let (mut bi, mut bv) = (0usize, maps[0].0[k]);
        for (m, (pe, _)) in maps.iter().enumerate().skip(1) {
            if pe[k] < bv {
                bv = pe[k];
                bi = m;
            }
        }
        best[k] = bv;
        arg[k] = bi;
        valid[k] = true;
    }
    Ok((best, valid, arg))
}

/// Static-scene mask: keep a pixel where the best synthesized error beats the
/// best identity error. Pixels that look the same without any warp (static
/// objects moving with the camera, texture-free sky) drop out.
pub fn static_pixel_mask(
    synth: &[f64],
    synth_valid: &[bool],
    ident: &[f64],
    ident_valid: &[bool],
) -> Result<Vec<bool>> {
    let n = synth.len();
    if ident.len() != n || synth_valid.len() != n || ident_valid.len() != n {
        return Err(Error::mismatch("mask input lengths".to_string()));
    }
    Ok((0..n)
        .map(|k| synth_valid[k] && ident_valid[k] && synth[k] < ident[k])
        .collect())
}

/// Nearest-rank percentile clipping: with n values, the threshold is the
/// ceil(q n)-th smallest and everything above it is replaced by it. Returns
/// the clipped values and the threshold.
pub fn percentile_clip(values: &[f64], q: f64) -> Result<(Vec<f64>, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput {
            what: "percentile clip".into(),
        });
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!("percentile {q}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in percentile clip".to_string()));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let k = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let tau = sorted[k - 1];
    Ok((values.iter().map(|v| v.min(tau)).collect(), tau))
}

/// Mean of the mask-included values after nearest-rank clipping, together
/// with its gradient. Unclipped values pass 1/n through; the mass of clipped
/// values routes to the threshold-defining pixel, whose value the clip copies.
pub(crate) fn clipped_masked_mean(pe: &[f64], included: &[bool], q: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; pe.len()];
    let idx: Vec<usize> = (0..pe.len()).filter(|k| included[*k]).collect();
    if idx.is_empty() {
        return (0.0, grad);
    }
    let n = idx.len();
    let mut order = idx.clone();
    order.sort_by(|a, b| {
        pe[*a]
            .partial_cmp(&pe[*b])
            .expect("finite error values")
            .then(a.cmp(b))
    });
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    let rank = order[k - 1];
    let tau = pe[rank];
    let mut sum = 0.0;
    let mut clipped = 0usize;
    for &p in &idx {
        if pe[p] > tau {
            sum += tau;
            clipped += 1;
        } else {
            sum += pe[p];
            grad[p] = 1.0;
        }
    }
    grad[rank] += clipped as f64;
    let inv = 1.0 / n as f64;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    (sum * inv, grad)
}

/// Directed depth consistency between two frames sharing one camera: the
/// first map transported through `a_to_b`, compared as mean L1 against the
/// second map sampled at the reprojected pixels.
pub fn depth_consistency_pair(
    depth_a: &DepthMap,
    depth_b: &DepthMap,
    a_to_b: &Se3Transform,
    cam: &CameraModel,
) -> Result<f64> {
    let (w, h) = (cam.width(), cam.height());
    if depth_a.width != w || depth_a.height != h || depth_b.width != w || depth_b.height != h {
        return Err(Error::mismatch("depth map size vs camera".to_string()));
    }
    let lut = cam.default_lut()?;
    let rays = RayTable::build(cam, lut.as_ref());
    let scaled = scaled_rays(&rays, cam.distance_kind);
    let dt = DiffTransform::constant(a_to_b, 0);
    Ok(consistency_pair(&scaled, w, h, &depth_a.data, &dt, cam, &depth_b.data).loss)
}

/// Sum of the four directed consistency terms between the target and each
/// neighbor, with `poses` ordered target-to-previous, target-to-next and
/// `depths` ordered [previous, target, next].
pub fn cross_sequence_consistency(
    depths: [&DepthMap; 3],
    poses: [&Se3Transform; 2],
    cam: &CameraModel,
) -> Result<f64> {
    let mut total = 0.0;
    for (si, neighbor) in [(0usize, 0usize), (1, 2)] {
        let fwd = poses[si];
        let bwd = fwd.inverse();
        total += depth_consistency_pair(depths[1], depths[neighbor], fwd, cam)?;
        total += depth_consistency_pair(depths[neighbor], depths[1], &bwd, cam)?;
    }
    Ok(total)
}

pub fn total_loss(
    sample: &SequenceSample,
    cam: &CameraModel,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    Ok(evaluate(sample, cam, weights, false)?.0)
}

pub fn total_loss_with_grad(
    sample: &SequenceSample,
    cam: &CameraModel,
    weights: &LossWeights,
) -> Result<(LossBreakdown, LossGradients)> {
    let (breakdown, grads) = evaluate(sample, cam, weights, true)?;
    Ok((breakdown, grads.expect("gradients were requested")))
}

fn src_frame(si: usize) -> usize {
    if si == 0 {
        0
    } else {
        2
    }
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (l, r) = v.split_at_mut(b);
        (&mut l[a], &mut r[0])
    } else {
        let (l, r) = v.split_at_mut(a);
        (&mut r[0], &mut l[b])
    }
}

fn validate(sample: &SequenceSample, cam: &CameraModel, weights: &LossWeights) -> Result<()> {
    let (w, h) = (cam.width(), cam.height());
    for f in &sample.frames {
        if f.width != w || f.height != h {
            return Err(Error::mismatch(format!(
                "frame {}x{} vs camera {w}x{h}",
                f.width, f.height
            )));
        }
    }
    if !sample.frames[0].same_shape(sample.frames[1])
        || !sample.frames[1].same_shape(sample.frames[2])
    {
        return Err(Error::mismatch("frame shapes differ".to_string()));
    }
    if weights.num_scales == 0 {
        return Err(Error::invalid("num_scales = 0".to_string()));
    }
    if !(weights.clip_percentile > 0.0 && weights.clip_percentile <= 1.0) {
        return Err(Error::invalid(format!(
            "clip percentile {}",
            weights.clip_percentile
        )));
    }
    if !(0.0..=1.0).contains(&weights.ssim_weight) {
        return Err(Error::invalid(format!("ssim weight {}", weights.ssim_weight)));
    }
    for (f, pyr) in sample.depths.iter().enumerate() {
        if pyr.len() != weights.num_scales {
            return Err(Error::mismatch(format!(
                "frame {f} has {} pyramid levels, expected {}",
                pyr.len(),
                weights.num_scales
            )));
        }
        for (s, d) in pyr.iter().enumerate() {
            let (ws, hs) = scale_dims(w, h, s);
            if d.width != ws || d.height != hs {
                return Err(Error::mismatch(format!(
                    "frame {f} level {s} is {}x{}, expected {ws}x{hs}",
                    d.width, d.height
                )));
            }
            if d.kind != cam.distance_kind {
                return Err(Error::mismatch(format!(
                    "frame {f} level {s} distance kind differs from the camera"
                )));
            }
        }
    }
    Ok(())
}

fn evaluate(
    sample: &SequenceSample,
    cam: &CameraModel,
    weights: &LossWeights,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<LossGradients>)> {
    validate(sample, cam, weights)?;
    let (w, h) = (cam.width(), cam.height());
    let px = w * h;
    let omega = weights.ssim_weight;

    let planes: Vec<Vec<Vec<f64>>> = sample.frames.iter().map(|f| channel_planes(f)).collect();
    let lut = cam.default_lut()?;
    let rays = RayTable::build(cam, lut.as_ref());
    let scaled = scaled_rays(&rays, cam.distance_kind);
    let dt_fwd = [
        DiffTransform::from_pose(sample.poses[0], 12, 0),
        DiffTransform::from_pose(sample.poses[1], 12, 6),
    ];
    let dt_bwd = [dt_fwd[0].inverse(), dt_fwd[1].inverse()];

    // Identity errors do not depend on depth or pose; compute once.
    let interior = erode_window(None, w, h);
    let pe_ident = [
        pe_map_planes(&planes[1], &planes[0], w, &interior, omega),
        pe_map_planes(&planes[1], &planes[2], w, &interior, omega),
    ];
    let ident_min: Vec<f64> = (0..px)
        .map(|k| pe_ident[0][k].min(pe_ident[1][k]))
        .collect();
    let pe_ident_back = [
        pe_map_planes(&planes[0], &planes[1], w, &interior, omega),
        pe_map_planes(&planes[2], &planes[1], w, &interior, omega),
    ];

    let mut per_scale = Vec::with_capacity(weights.num_scales);
    let mut weighted = ScaleLoss::default();
    let mut grads = want_grad.then(|| LossGradients {
        d_depth: sample
            .depths
            .iter()
            .map(|pyr| pyr.iter().map(|d| vec![0.0; d.data.len()]).collect())
            .collect(),
        d_pose: [0.0; 12],
    });

    for s in 0..weights.num_scales {
        let wn = 0.5f64.powi(s as i32);
        let ups: Vec<DepthMap> = (0..3)
            .map(|f| sample.depths[f][s].upsample_bilinear(w, h))
            .collect::<Result<_>>()?;
        let mut d_full = want_grad.then(|| vec![vec![0.0; px]; 3]);

        // Forward reconstruction: target synthesized from each source.
        let recs: Vec<PairSynth> = (0..2)
            .map(|si| {
                synth_pair(
                    &scaled,
                    w,
                    h,
                    &ups[1].data,
                    &dt_fwd[si],
                    cam,
                    &planes[src_frame(si)],
                )
            })
            .collect();
        let pes: Vec<Vec<f64>> = recs
            .iter()
            .map(|rec| pe_map_planes(&planes[1], &rec.synth, w, &rec.eroded, omega))
            .collect();
        let (pe_min, valid_min, argmin) = min_reconstruction(&[
            (&pes[0], &recs[0].eroded),
            (&pes[1], &recs[1].eroded),
        ])?;
        let included = static_pixel_mask(&pe_min, &valid_min, &ident_min, &interior)?;
        let (f_loss, f_grad) = clipped_masked_mean(&pe_min, &included, weights.clip_percentile);

        // Backward reconstruction: each source synthesized from the target,
        // scored independently and summed.
        let mut b_loss = 0.0;
        let mut back: Vec<(PairSynth, Vec<f64>)> = Vec::with_capacity(2);
        for si in 0..2 {
            let f = src_frame(si);
            let rec = synth_pair(&scaled, w, h, &ups[f].data, &dt_bwd[si], cam, &planes[1]);
            let pe = pe_map_planes(&planes[f], &rec.synth, w, &rec.eroded, omega);
            let inc = static_pixel_mask(&pe, &rec.eroded, &pe_ident_back[si], &interior)?;
            let (l, g) = clipped_masked_mean(&pe, &inc, weights.clip_percentile);
            b_loss += l;
            back.push((rec, g));
        }

        // Depth consistency over the four directed neighbor pairs.
        let pair_spec: [(usize, usize, &DiffTransform); 4] = [
            (1, 0, &dt_fwd[0]),
            (0, 1, &dt_bwd[0]),
            (1, 2, &dt_fwd[1]),
            (2, 1, &dt_bwd[1]),
        ];
        let mut c_loss = 0.0;
        let mut c_terms = Vec::with_capacity(4);
        for (fa, fb, dt) in pair_spec {
            let term = consistency_pair(&scaled, w, h, &ups[fa].data, dt, cam, &ups[fb].data);
            c_loss += term.loss;
            c_terms.push((fa, fb, dt, term));
        }

        let s_loss = match d_full.as_mut() {
            Some(df) => smoothness_with_grad(
                &ups[1],
                sample.frames[1],
                wn * weights.smoothness_weight,
                &mut df[1],
            )?,
            None => smoothness_loss(&ups[1], sample.frames[1])?,
        };

        if let (Some(g), Some(df)) = (grads.as_mut(), d_full.as_mut()) {
            for si in 0..2 {
                let mut dpe = vec![0.0; px];
                let mut any = false;
                for k in 0..px {
                    if f_grad[k] != 0.0 && argmin[k] == si {
                        dpe[k] = wn * f_grad[k];
                        any = true;
                    }
                }
                if any {
                    recon_pair_adjoint(
                        &recs[si],
                        &planes[1],
                        &scaled,
                        &dt_fwd[si],
                        cam,
                        &planes[src_frame(si)],
                        omega,
                        &dpe,
                        &mut df[1],
                        &mut g.d_pose,
                    )?;
                }
            }
            for (si, (rec, bg)) in back.iter().enumerate() {
                let f = src_frame(si);
                if bg.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let dpe: Vec<f64> = bg.iter().map(|v| wn * v).collect();
                recon_pair_adjoint(
                    rec,
                    &planes[f],
                    &scaled,
                    &dt_bwd[si],
                    cam,
                    &planes[1],
                    omega,
                    &dpe,
                    &mut df[f],
                    &mut g.d_pose,
                )?;
            }
            for (fa, fb, dt, term) in &c_terms {
                let (da, db) = two_mut(df, *fa, *fb);
                consistency_adjoint(
                    term,
                    &scaled,
                    dt,
                    cam,
                    &ups[*fb].data,
                    w,
                    wn * weights.consistency_weight,
                    da,
                    db,
                    &mut g.d_pose,
                )?;
            }
            for f in 0..3 {
                let src = &sample.depths[f][s];
                let coarse = DepthMap::upsample_adjoint(src.width, src.height, &df[f], w, h);
                for (a, b) in g.d_depth[f][s].iter_mut().zip(coarse) {
                    *a += b;
                }
            }
        }

        per_scale.push(ScaleLoss {
            reconstruction_forward: f_loss,
            reconstruction_backward: b_loss,
            depth_consistency: c_loss,
            smoothness: s_loss,
        });
        weighted.reconstruction_forward += wn * f_loss;
        weighted.reconstruction_backward += wn * b_loss;
        weighted.depth_consistency += wn * c_loss;
        weighted.smoothness += wn * s_loss;
    }

    let total = weighted.reconstruction_forward
        + weighted.reconstruction_backward
        + weights.consistency_weight * weighted.depth_consistency
        + weights.smoothness_weight * weighted.smoothness;
    Ok((
        LossBreakdown {
            per_scale,
            reconstruction_forward: weighted.reconstruction_forward,
            reconstruction_backward: weighted.reconstruction_backward,
            depth_consistency: weighted.depth_consistency,
            smoothness: weighted.smoothness,
            total,
        },
        grads,
    ))
}

/// Forward-only objective for single-frame depth recovery: the clipped,
/// masked photometric reconstruction of the target from both sources, plus
/// weighted smoothness. The sources' own depths never enter, so this is the
/// objective when only the target depth is being estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthObjective {
    pub reconstruction: f64,
    pub smoothness: f64,
    /// reconstruction + smoothness_weight * smoothness.
    pub total: f64,
}

pub fn depth_objective(
    target: &ImageBuffer,
    sources: [&ImageBuffer; 2],
    poses: [&Se3Transform; 2],
    depth: &DepthMap,
    cam: &CameraModel,
    weights: &LossWeights,
) -> Result<DepthObjective> {
    Ok(depth_objective_eval(target, sources, poses, depth, cam, weights, false)?.0)
}

/// Objective and its gradient with respect to the full-resolution depth
/// raster.
pub fn depth_objective_grad(
    target: &ImageBuffer,
    sources: [&ImageBuffer; 2],
    poses: [&Se3Transform; 2],
    depth: &DepthMap,
    cam: &CameraModel,
    weights: &LossWeights,
) -> Result<(DepthObjective, Vec<f64>)> {
    let (obj, grad) = depth_objective_eval(target, sources, poses, depth, cam, weights, true)?;
    Ok((obj, grad.expect("gradient was requested")))
}

fn depth_objective_eval(
    target: &ImageBuffer,
    sources: [&ImageBuffer; 2],
    poses: [&Se3Transform; 2],
    depth: &DepthMap,
    cam: &CameraModel,
    weights: &LossWeights,
    want_grad: bool,
) -> Result<(DepthObjective, Option<Vec<f64>>)> {
    let (w, h) = (cam.width(), cam.height());
    let px = w * h;
    if target.width != w || target.height != h || depth.width != w || depth.height != h {
        return Err(Error::mismatch("target or depth size vs camera".to_string()));
    }
    for s in sources {
        if !s.same_shape(target) {
            return Err(Error::mismatch("source shape vs target".to_string()));
        }
    }
    if depth.kind != cam.distance_kind {
        return Err(Error::mismatch(
            "depth distance kind differs from the camera".to_string(),
        ));
    }
    let omega = weights.ssim_weight;
    let tplanes = channel_planes(target);
    let splanes: Vec<Vec<Vec<f64>>> = sources.iter().map(|s| channel_planes(s)).collect();
    let lut = cam.default_lut()?;
    let rays = RayTable::build(cam, lut.as_ref());
    let scaled = scaled_rays(&rays, cam.distance_kind);
    let dts = [
        DiffTransform::constant(poses[0], 0),
        DiffTransform::constant(poses[1], 0),
    ];
    let interior = erode_window(None, w, h);
    let ident_min: Vec<f64> = {
        let a = pe_map_planes(&tplanes, &splanes[0], w, &interior, omega);
        let b = pe_map_planes(&tplanes, &splanes[1], w, &interior, omega);
        (0..px).map(|k| a[k].min(b[k])).collect()
    };

    let recs: Vec<PairSynth> = (0..2)
        .map(|si| synth_pair(&scaled, w, h, &depth.data, &dts[si], cam, &splanes[si]))
        .collect();
    let pes: Vec<Vec<f64>> = recs
        .iter()
        .map(|rec| pe_map_planes(&tplanes, &rec.synth, w, &rec.eroded, omega))
        .collect();
    let (pe_min, valid_min, argmin) =
        min_reconstruction(&[(&pes[0], &recs[0].eroded), (&pes[1], &recs[1].eroded)])?;
    let included = static_pixel_mask(&pe_min, &valid_min, &ident_min, &interior)?;
    let (recon, f_grad) = clipped_masked_mean(&pe_min, &included, weights.clip_percentile);

    let mut grad = want_grad.then(|| vec![0.0; px]);
    let smooth = match grad.as_mut() {
        Some(g) => smoothness_with_grad(depth, target, weights.smoothness_weight, g)?,
        None => smoothness_loss(depth, target)?,
    };
    if let Some(g) = grad.as_mut() {
        let mut d_pose: [f64; 0] = [];
        for si in 0..2 {
            let mut dpe = vec![0.0; px];
            let mut any = false;
            for k in 0..px {
                if f_grad[k] != 0.0 && argmin[k] == si {
                    dpe[k] = f_grad[k];
                    any = true;
                }
            }
            if any {
                recon_pair_adjoint(
                    &recs[si],
                    &tplanes,
                    &scaled,
                    &dts[si],
                    cam,
                    &splanes[si],
                    omega,
                    &dpe,
                    g,
                    &mut d_pose,
                )?;
            }
        }
    }
    Ok((
        DepthObjective {
            reconstruction: recon,
            smoothness: smooth,
            total: recon + weights.smoothness_weight * smooth,
        },
        grad,
    ))
}

/// Photometric-only score of one target-to-source pose: the plain mean of
/// the mixed error over warp-valid window pixels, with no source minimum,
/// masking or clipping, so the value responds smoothly to the pose.
pub fn pose_objective(
    target: &ImageBuffer,
    source: &ImageBuffer,
    depth: &DepthMap,
    pose: &Se3Transform,
    cam: &CameraModel,
    ssim_weight: f64,
) -> Result<f64> {
    Ok(pose_objective_eval(target, source, depth, pose, cam, ssim_weight, false)?.0)
}

/// Score and gradient with respect to the pose parameters
/// [w1, w2, w3, t1, t2, t3].
pub fn pose_objective_grad(
    target: &ImageBuffer,
    source: &ImageBuffer,
    depth: &DepthMap,
    pose: &Se3Transform,
    cam: &CameraModel,
    ssim_weight: f64,
) -> Result<(f64, [f64; 6])> {
    let (loss, grad) = pose_objective_eval(target, source, depth, pose, cam, ssim_weight, true)?;
    Ok((loss, grad.expect("gradient was requested")))
}

fn pose_objective_eval(
    target: &ImageBuffer,
    source: &ImageBuffer,
    depth: &DepthMap,
    pose: &Se3Transform,
    cam: &CameraModel,
    ssim_weight: f64,
    want_grad: bool,
) -> Result<(f64, Option<[f64; 6]>)> {
    let (w, h) = (cam.width(), cam.height());
    let px = w * h;
    if target.width != w || target.height != h || depth.width != w || depth.height != h {
        return Err(Error::mismatch("target or depth size vs camera".to_string()));
    }
    if !source.same_shape(target) {
        return Err(Error::mismatch("source shape vs target".to_string()));
    }
    if !(0.0..=1.0).contains(&ssim_weight) {
        return Err(Error::invalid(format!("ssim weight {ssim_weight}")));
    }
    let tplanes = channel_planes(target);
    let splanes = channel_planes(source);
    let lut = cam.default_lut()?;
    let rays = RayTable::build(cam, lut.as_ref());
    let scaled = scaled_rays(&rays, cam.distance_kind);
    let dt = DiffTransform::from_pose(pose, 6, 0);
    let rec = synth_pair(&scaled, w, h, &depth.data, &dt, cam, &splanes);
    let pe = pe_map_planes(&tplanes, &rec.synth, w, &rec.eroded, ssim_weight);
    let n = rec.eroded.iter().filter(|v| **v).count();
    if n == 0 {
        return Err(Error::NoValidPixels {
            what: "pose objective has no scored pixels".into(),
        });
    }
    let loss = rec
        .eroded
        .iter()
        .enumerate()
        .filter(|(_, v)| **v)
        .map(|(k, _)| pe[k])
        .sum::<f64>()
        / n as f64;
    if !want_grad {
        return Ok((loss, None));
    }
    let mut dpe = vec![0.0; px];
    for (k, v) in rec.eroded.iter().enumerate() {
        if *v {
            dpe[k] = 1.0 / n as f64;
        }
    }
    let mut d_depth = vec![0.0; px];
    let mut d_pose = [0.0; 6];
    recon_pair_adjoint(
        &rec, &tplanes, &scaled, &dt, cam, &splanes, ssim_weight, &dpe, &mut d_depth, &mut d_pose,
    )?;
    Ok((loss, Some(d_pose)))
}
