//! Synthetic ray-cast scenes that serve as ground-truth oracles (exact
//! depth, exact color, exact relative pose), plus the rectification
//! analyzer that quantifies what undistorting a lens costs: field of view
//! lost to cropping and fidelity lost to resampling.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::camera::{CameraModel, DistanceKind, PinholeIntrinsics};
use crate::error::{Error, Result};
use crate::geometry::Se3Transform;
use crate::grid::{CoordinateMap, DepthMap, EgoMask, ImageBuffer};
use crate::loss::ssim_map;
use crate::warp::{bilinear_sample, bilinear_tap, RayTable};

/// Smallest accepted ray parameter; rejects grazing self-intersections.
const RAY_EPS: f64 = 1e-9;

/// Depth slot filler for pixels that saw no surface. Such pixels are
/// flagged invalid; the value only keeps the map inside its positivity
/// invariant.
const MISS_DEPTH: f64 = 1.0;

/// Mean squared error below which a resampling round trip counts as exact
/// (pure floating-point noise) and reports the +inf PSNR sentinel. An RMS
/// intensity error of 1e-12 is ten orders below any real resampling effect.
const EXACT_MSE: f64 = 1e-24;

/// Rectification coordinates within this many pixels of the image border
/// are snapped onto it, so rounding in an exact projection round trip
/// cannot invalidate border pixels.
const BORDER_SNAP: f64 = 1e-9;

/// Procedural surface color as a function of 2D surface coordinates in
/// meters. Checker is hard-edged, which makes its cell corners usable as
/// exactly known landmarks; noise is smooth value noise, which keeps
/// interpolation error far below the signal when images get resampled.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceTexture {
    Checker {
        /// Cell side length in meters.
        period: f64,
        bright: [f64; 3],
        dark: [f64; 3],
    },
    Noise {
        /// Lattice spacing of the noise in meters.
        period: f64,
        seed: u64,
        base: [f64; 3],
        /// Peak deviation from `base` per channel.
        amplitude: f64,
    },
}

impl SurfaceTexture {
    fn validate(&self) -> Result<()> {
        let color_ok = |c: &[f64; 3]| c.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v));
        match self {
            SurfaceTexture::Checker { period, bright, dark } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::invalid(format!("checker period {period}")));
                }
                if !color_ok(bright) || !color_ok(dark) {
                    return Err(Error::invalid("checker colors must lie in [0, 1]".to_string()));
                }
            }
            SurfaceTexture::Noise { period, base, amplitude, .. } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::invalid(format!("noise period {period}")));
                }
                if !color_ok(base) {
                    return Err(Error::invalid("noise base color must lie in [0, 1]".to_string()));
                }
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return Err(Error::invalid(format!("noise amplitude {amplitude}")));
                }
            }
        }
        Ok(())
    }

    /// Color at surface coordinates (u, v) in meters, clamped to [0, 1].
    pub fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        match self {
            SurfaceTexture::Checker { period, bright, dark } => {
                let cell = (u / period).floor() as i64 + (v / period).floor() as i64;
                if cell.rem_euclid(2) == 0 {
                    *bright
                } else {
                    *dark
                }
            }
            SurfaceTexture::Noise { period, seed, base, amplitude } => {
                let mut c = [0.0; 3];
                for (ch, out) in c.iter_mut().enumerate() {
                    let n = value_noise(u / period, v / period, *seed, ch);
                    *out = (base[ch] + amplitude * n).clamp(0.0, 1.0);
                }
                c
            }
        }
    }
}

/// SplitMix64 finalizer; decorrelates lattice coordinates and seeds.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic lattice value in [-1, 1) for integer coordinates, channel
/// and seed.
fn lattice_value(ix: i64, iy: i64, channel: usize, seed: u64) -> f64 {
    let mut h = mix64(seed);
    h = mix64(h ^ ix as u64);
    h = mix64(h ^ iy as u64);
    h = mix64(h ^ channel as u64);
    2.0 * ((h >> 11) as f64 / (1u64 << 53) as f64) - 1.0
}

/// Quintic smoothstep; C2 at the lattice lines, so resampled renders stay
/// twice differentiable.
fn smooth01(t: f64) -> f64 {
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Single-octave smooth value noise in [-1, 1] with unit lattice spacing.
fn value_noise(x: f64, y: f64, seed: u64, channel: usize) -> f64 {
    let xf = x.floor();
    let yf = y.floor();
    let (ix, iy) = (xf as i64, yf as i64);
    let (sx, sy) = (smooth01(x - xf), smooth01(y - yf));
    let v00 = lattice_value(ix, iy, channel, seed);
    let v01 = lattice_value(ix + 1, iy, channel, seed);
    let v10 = lattice_value(ix, iy + 1, channel, seed);
    let v11 = lattice_value(ix + 1, iy + 1, channel, seed);
    let top = v00 + sx * (v01 - v00);
    let bot = v10 + sx * (v11 - v10);
    top + sy * (bot - top)
}

/// Scene building block. A plane is a textured rectangle spanning
/// [-hx, hx] x [-hy, hy] in its local xy plane (normal along local +z),
/// placed by `pose` (local to world). A sphere is textured in arc-length
/// coordinates (longitude and colatitude, both scaled by the radius).
#[derive(Debug, Clone, PartialEq)]
pub enum ScenePrimitive {
    Plane {
        pose: Se3Transform,
        half_extent: (f64, f64),
        texture: SurfaceTexture,
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
        texture: SurfaceTexture,
    },
}

/// Intersection-ready form of a primitive; planes store the inverse
/// rotation so per-pixel casts avoid re-running Rodrigues.
enum Prepared {
    Plane {
        rot_t: Matrix3<f64>,
        origin: Vector3<f64>,
        half: (f64, f64),
        texture: SurfaceTexture,
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
        texture: SurfaceTexture,
    },
}

/// One ray-scene intersection: Euclidean distance along the unit ray and
/// the surface color there.
#[derive(Debug, Clone, Copy)]
pub struct SceneHit {
    pub t: f64,
    pub color: [f64; 3],
}

/// A list of textured primitives in world coordinates plus a background
/// color for rays that miss everything.
pub struct SyntheticScene {
    prepared: Vec<Prepared>,
    background: [f64; 3],
}

impl SyntheticScene {
    pub fn new(primitives: Vec<ScenePrimitive>, background: [f64; 3]) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::EmptyInput {
                what: "scene primitives".to_string(),
            });
        }
        if !background.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(Error::invalid("background color must lie in [0, 1]".to_string()));
        }
        let mut prepared = Vec::with_capacity(primitives.len());
        for p in primitives {
            match p {
                ScenePrimitive::Plane { pose, half_extent, texture } => {
                    let (hx, hy) = half_extent;
                    if !(hx.is_finite() && hx > 0.0 && hy.is_finite() && hy > 0.0) {
                        return Err(Error::invalid(format!("plane half extent ({hx}, {hy})")));
                    }
                    texture.validate()?;
                    prepared.push(Prepared::Plane {
                        rot_t: pose.rotation_matrix().transpose(),
                        origin: pose.translation,
                        half: half_extent,
                        texture,
                    });
                }
                ScenePrimitive::Sphere { center, radius, texture } => {
                    if !(radius.is_finite() && radius > 0.0) {
                        return Err(Error::invalid(format!("sphere radius {radius}")));
                    }
                    texture.validate()?;
                    prepared.push(Prepared::Sphere { center, radius, texture });
                }
            }
        }
        Ok(SyntheticScene { prepared, background })
    }

    /// Fronto-parallel textured plane z = `distance` (world frame), extent
    /// +-`half` meters in x and y, on a black background.
    pub fn plane_at_z(distance: f64, half: f64, texture: SurfaceTexture) -> Result<Self> {
        SyntheticScene::new(
            vec![ScenePrimitive::Plane {
                pose: Se3Transform::new(Vector3::zeros(), Vector3::new(0.0, 0.0, distance)),
                half_extent: (half, half),
                texture,
            }],
            [0.0, 0.0, 0.0],
        )
    }

    pub fn background(&self) -> [f64; 3] {
        self.background
    }

    /// Nearest intersection of the ray `origin + t * dir` (world frame)
    /// over all primitives. `dir` must have nonzero norm; `t` is reported
    /// as a Euclidean distance (the direction is normalized internally).
    /// Ties go to the earlier primitive in the construction order.
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<SceneHit> {
        let norm = dir.norm();
        if !(norm.is_finite() && norm > 1e-12) {
            return None;
        }
        let d = dir / norm;
        let mut best: Option<(f64, f64, f64, &SurfaceTexture)> = None;
        for prim in &self.prepared {
            let candidate = match prim {
                Prepared::Plane { rot_t, origin: p0, half, texture } => {
                    intersect_plane(origin, &d, rot_t, p0, *half).map(|(t, u, v)| (t, u, v, texture))
                }
                Prepared::Sphere { center, radius, texture } => {
                    intersect_sphere(origin, &d, center, *radius).map(|(t, u, v)| (t, u, v, texture))
                }
            };
            if let Some((t, u, v, tex)) = candidate {
                if best.as_ref().is_none_or(|(bt, ..)| t < *bt) {
                    best = Some((t, u, v, tex));
                }
            }
        }
        best.map(|(t, u, v, tex)| SceneHit {
            t,
            color: tex.sample(u, v),
        })
    }
}

/// Ray / rectangle intersection in the plane's local frame. Returns
/// (distance, u, v) with (u, v) the local surface coordinates in meters.
fn intersect_plane(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    rot_t: &Matrix3<f64>,
    plane_origin: &Vector3<f64>,
    half: (f64, f64),
) -> Option<(f64, f64, f64)> {
    let o = rot_t * (origin - plane_origin);
    let d = rot_t * dir;
    if d.z.abs() < 1e-15 {
        return None;
    }
    let t = -o.z / d.z;
    if t <= RAY_EPS {
        return None;
    }
    let u = o.x + t * d.x;
    let v = o.y + t * d.y;
    if u.abs() > half.0 || v.abs() > half.1 {
        return None;
    }
    Some((t, u, v))
}

/// Ray / sphere intersection. Surface coordinates are arc lengths:
/// longitude and colatitude of the hit point, each scaled by the radius.
fn intersect_sphere(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    center: &Vector3<f64>,
    radius: f64,
) -> Option<(f64, f64, f64)> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.dot(&oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let mut t = -b - sq;
    if t <= RAY_EPS {
        t = -b + sq;
        if t <= RAY_EPS {
            return None;
        }
    }
    let p = (oc + t * dir) / radius;
    let lon = p.y.atan2(p.x);
    let lat = p.z.clamp(-1.0, 1.0).acos();
    Some((t, lon * radius, lat * radius))
}

/// Everything one ray-cast view yields: the color image, the exact
/// per-pixel range in the camera's distance semantics, and the mask of
/// pixels that actually saw a surface.
pub struct RenderOutput {
    pub image: ImageBuffer,
    pub depth: DepthMap,
    pub hit: EgoMask,
}

/// Ray-casts the scene through `cam` placed at `cam_to_world`. Pixels whose
/// ray misses every primitive, falls outside the camera's valid domain, or
/// has no positive range under the camera's DistanceKind take the
/// background color and are flagged invalid. Rows are rendered in parallel;
/// the result is identical for any thread count.
pub fn render(
    scene: &SyntheticScene,
    cam: &CameraModel,
    cam_to_world: &Se3Transform,
) -> Result<RenderOutput> {
    let (w, h) = (cam.width(), cam.height());
    let lut = cam.default_lut()?;
    let rays = RayTable::build(cam, lut.as_ref());
    let rot = cam_to_world.rotation_matrix();
    let origin = cam_to_world.translation;
    let mut image = vec![0.0; w * h * 3];
    let mut depth = vec![MISS_DEPTH; w * h];
    let mut hit = vec![false; w * h];
    image
        .par_chunks_mut(w * 3)
        .zip(depth.par_chunks_mut(w))
        .zip(hit.par_chunks_mut(w))
        .enumerate()
        .for_each(|(j, ((img_row, d_row), hit_row))| {
            for i in 0..w {
                let k = j * w + i;
                img_row[i * 3..i * 3 + 3].copy_from_slice(&scene.background);
                if !rays.valid[k] {
                    continue;
                }
                let d_cam = rays.unit[k];
                let Some(s) = scene.cast(&origin, &(rot * d_cam)) else {
                    continue;
                };
                let range = match cam.distance_kind {
                    DistanceKind::EuclideanDistance => s.t,
                    DistanceKind::PlanarDepth => s.t * d_cam.z,
                };
                if !(range > RAY_EPS) {
                    continue;
                }
                img_row[i * 3..i * 3 + 3].copy_from_slice(&s.color);
                d_row[i] = range;
                hit_row[i] = true;
            }
        });
    Ok(RenderOutput {
        image: ImageBuffer::from_data(w, h, 3, image)?,
        depth: DepthMap::from_data(w, h, cam.distance_kind, depth)?,
        hit: EgoMask {
            width: w,
            height: h,
            data: hit,
        },
    })
}

/// For each pixel of the virtual rectified camera `dst`, the source pixel
/// it samples under an identity virtual rotation. Pixels whose ray leaves
/// `src`'s projection domain or lands outside its image bounds are flagged
/// invalid and carry an out-of-range placeholder coordinate, so sampling
/// through the map rejects them too.
pub fn rectification_maps(src: &CameraModel, dst: &PinholeIntrinsics) -> (CoordinateMap, EgoMask) {
    let (w, h) = (dst.width, dst.height);
    let mut map = CoordinateMap::new(w, h);
    let mut mask = EgoMask::zeros(w, h);
    let (iw, ih) = (src.width() as f64 - 1.0, src.height() as f64 - 1.0);
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            let ray = Vector3::new(
                (i as f64 - dst.cx) / dst.fx,
                (j as f64 - dst.cy) / dst.fy,
                1.0,
            );
            let Ok((x, y)) = src.project(&ray) else {
                map.x[k] = -1.0;
                map.y[k] = -1.0;
                continue;
            };
            if x >= -BORDER_SNAP && x <= iw + BORDER_SNAP && y >= -BORDER_SNAP && y <= ih + BORDER_SNAP
            {
                map.x[k] = x.clamp(0.0, iw);
                map.y[k] = y.clamp(0.0, ih);
                mask.data[k] = true;
            } else {
                map.x[k] = x;
                map.y[k] = y;
            }
        }
    }
    (map, mask)
}

/// The distortion-free pinhole over `hfov_deg` degrees of horizontal field
/// of view on a width x height canvas, principal point at the canvas
/// center. The usual rectification target when the source is a fisheye.
pub fn pinhole_for_hfov(hfov_deg: f64, width: usize, height: usize) -> Result<PinholeIntrinsics> {
    if !(hfov_deg.is_finite() && hfov_deg > 0.0 && hfov_deg < 180.0) {
        return Err(Error::invalid(format!("horizontal fov {hfov_deg} degrees")));
    }
    let f = width as f64 / 2.0 / (hfov_deg.to_radians() / 2.0).tan();
    PinholeIntrinsics::new(
        f,
        f,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        width,
        height,
    )
}

/// What rectification costs. `info_loss_fraction` follows the crop rule
/// below; the resampling scores come from round-tripping a probe image.
#[derive(Debug, Clone, PartialEq)]
pub struct RectificationReport {
    pub raw_size: (usize, usize),
    /// Size of the crop rectangle; (0, 0) when no valid crop exists.
    pub rect_size: (usize, usize),
    /// 1 - retained / valid raw pixels.
    pub info_loss_fraction: f64,
    /// dB against a unit peak; +inf when the round trip is bit-exact.
    pub resampling_psnr: f64,
    pub resampling_ssim: f64,
}

/// Largest all-valid axis-aligned rectangle containing pixel (px, py),
/// as (x0, y0, width, height). Monotone-stack histogram scan; every
/// maximal rectangle is visited, so filtering by containment keeps the
/// optimum. None when (px, py) is itself invalid.
fn largest_valid_rect(
    valid: &[bool],
    w: usize,
    h: usize,
    px: usize,
    py: usize,
) -> Option<(usize, usize, usize, usize)> {
    let mut heights = vec![0usize; w];
    let mut best: Option<(usize, usize, usize, usize)> = None;
    let mut best_area = 0usize;
    for j in 0..h {
        for (i, hh) in heights.iter_mut().enumerate() {
            *hh = if valid[j * w + i] { *hh + 1 } else { 0 };
        }
        let mut stack: Vec<usize> = Vec::new();
        for i in 0..=w {
            let cur = if i < w { heights[i] } else { 0 };
            while let Some(&top) = stack.last() {
                if heights[top] <= cur {
                    break;
                }
                stack.pop();
                let hgt = heights[top];
                let left = stack.last().map_or(0, |&s| s + 1);
                let area = hgt * (i - left);
                let contains =
                    left <= px && px < i && j + 1 >= hgt && j + 1 - hgt <= py && py <= j;
                if contains && area > best_area {
                    best_area = area;
                    best = Some((left, j + 1 - hgt, i - left, hgt));
                }
            }
            stack.push(i);
        }
    }
    best
}

/// Deterministic smooth three-channel noise probe used to measure
/// resampling distortion; lattice period 6 px, values within [0.1, 0.9].
fn noise_image(width: usize, height: usize, seed: u64) -> ImageBuffer {
    let mut data = vec![0.0; width * height * 3];
    for j in 0..height {
        for i in 0..width {
            for c in 0..3 {
                data[(j * width + i) * 3 + c] =
                    0.5 + 0.4 * value_noise(i as f64 / 6.0, j as f64 / 6.0, seed, c);
            }
        }
    }
    ImageBuffer::from_data(width, height, 3, data).expect("probe dimensions are valid")
}

/// Analyzes rectifying `src` into the pinhole `dst`. The crop is the
/// largest fully-valid axis-aligned rectangle of the rectified canvas that
/// contains the principal point; a raw pixel counts as retained when its
/// forward-mapped position lands inside the crop's pixel area. Resampling
/// quality is measured by round-tripping a seeded noise probe at the raw
/// resolution.
pub fn fov_loss(src: &CameraModel, dst: &PinholeIntrinsics, seed: u64) -> Result<RectificationReport> {
    let (_, mask) = rectification_maps(src, dst);
    let px = (dst.cx.round().max(0.0) as usize).min(dst.width - 1);
    let py = (dst.cy.round().max(0.0) as usize).min(dst.height - 1);
    let crop = largest_valid_rect(&mask.data, dst.width, dst.height, px, py);

    let lut = src.default_lut()?;
    let rays = RayTable::build(src, lut.as_ref());
    let mut valid_raw = 0usize;
    let mut retained = 0usize;
    for k in 0..rays.unit.len() {
        if !rays.valid[k] {
            continue;
        }
        valid_raw += 1;
        let Some((x0, y0, cw, ch)) = crop else {
            continue;
        };
        let Ok((u, v)) = dst.project(&rays.unit[k]) else {
            continue;
        };
        let (u0, v0) = (x0 as f64 - 0.5, y0 as f64 - 0.5);
        if u >= u0 && u < u0 + cw as f64 && v >= v0 && v < v0 + ch as f64 {
            retained += 1;
        }
    }
    if valid_raw == 0 {
        return Err(Error::NoValidPixels {
            what: "no raw pixel has a valid ray".to_string(),
        });
    }

    let probe = noise_image(src.width(), src.height(), seed);
    let (psnr, ssim) = resampling_distortion(&probe, src, dst)?;
    Ok(RectificationReport {
        raw_size: (src.width(), src.height()),
        rect_size: crop.map_or((0, 0), |(_, _, cw, ch)| (cw, ch)),
        info_loss_fraction: 1.0 - retained as f64 / valid_raw as f64,
        resampling_psnr: psnr,
        resampling_ssim: ssim,
    })
}

/// Warps `img` into the rectified view of `dst` and back, scoring PSNR
/// (dB, +inf when exact up to floating-point noise) and mean SSIM against
/// the original. Both are evaluated only where the whole resampling
/// neighborhood stayed valid, so black borders never contaminate the
/// scores.
pub fn resampling_distortion(
    img: &ImageBuffer,
    src: &CameraModel,
    dst: &PinholeIntrinsics,
) -> Result<(f64, f64)> {
    if img.width != src.width() || img.height != src.height() {
        return Err(Error::mismatch(format!(
            "image {}x{} vs camera {}x{}",
            img.width,
            img.height,
            src.width(),
            src.height()
        )));
    }
    let (fwd, _) = rectification_maps(src, dst);
    let (rect, rect_mask) = bilinear_sample(img, &fwd);

    let lut = src.default_lut()?;
    let rays = RayTable::build(src, lut.as_ref());
    let (w, h) = (img.width, img.height);
    let mut back = ImageBuffer::new(w, h, img.channels)?;
    let mut back_valid = vec![false; w * h];
    for k in 0..w * h {
        if !rays.valid[k] {
            continue;
        }
        let Ok((u, v)) = dst.project(&rays.unit[k]) else {
            continue;
        };
        let Some(tap) = bilinear_tap(u, v, dst.width, dst.height) else {
            continue;
        };
        let corners = [
            (tap.y0, tap.x0),
            (tap.y0, tap.x0 + 1),
            (tap.y0 + 1, tap.x0),
            (tap.y0 + 1, tap.x0 + 1),
        ];
        if corners.iter().any(|&(jj, ii)| !rect_mask.get(jj, ii)) {
            continue;
        }
        back_valid[k] = true;
        let (j, i) = (k / w, k % w);
        for c in 0..img.channels {
            let v00 = rect.get(tap.y0, tap.x0, c);
            let v01 = rect.get(tap.y0, tap.x0 + 1, c);
            let v10 = rect.get(tap.y0 + 1, tap.x0, c);
            let v11 = rect.get(tap.y0 + 1, tap.x0 + 1, c);
            let top = v00 + tap.ax * (v01 - v00);
            let bot = v10 + tap.ax * (v11 - v10);
            back.set(j, i, c, top + tap.ay * (bot - top));
        }
    }

    let mut se = 0.0;
    let mut n = 0usize;
    for k in 0..w * h {
        if !back_valid[k] {
            continue;
        }
        let (j, i) = (k / w, k % w);
        for c in 0..img.channels {
            let d = back.get(j, i, c) - img.get(j, i, c);
            se += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoValidPixels {
            what: "rectification round trip kept no pixels".to_string(),
        });
    }
    let mse = se / n as f64;
    let psnr = if mse < EXACT_MSE {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    };

    // SSIM windows must see only valid round-trip pixels; erode the
    // validity by the 3x3 window before averaging.
    let (smap, svalid) = ssim_map(img, &back)?;
    let mut ssim_sum = 0.0;
    let mut ssim_n = 0usize;
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            if !svalid[k] {
                continue;
            }
            let mut window_ok = true;
            'win: for dj in -1..=1i64 {
                for di in -1..=1i64 {
                    let kk = (j as i64 + dj) as usize * w + (i as i64 + di) as usize;
                    if !back_valid[kk] {
                        window_ok = false;
                        break 'win;
                    }
                }
            }
            if window_ok {
                ssim_sum += smap[k];
                ssim_n += 1;
            }
        }
    }
    if ssim_n == 0 {
        return Err(Error::NoValidPixels {
            what: "rectification round trip kept no full SSIM window".to_string(),
        });
    }
    Ok((psnr, ssim_sum / ssim_n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{BrownConradyParams, FisheyeKind, FisheyeModel};
    use crate::loss::{
        depth_consistency_pair, min_reconstruction, photometric_error, static_pixel_mask,
        total_loss, LossWeights, SequenceSample,
    };
    use crate::warp::{reproject, synthesize_view, unproject_map};
    use approx::assert_relative_eq;

    fn pinhole_cam(
        fx: f64,
        w: usize,
        h: usize,
        kind: DistanceKind,
    ) -> CameraModel {
        let intr = PinholeIntrinsics::new(
            fx,
            fx,
            (w as f64 - 1.0) / 2.0,
            (h as f64 - 1.0) / 2.0,
            w,
            h,
        )
        .unwrap();
        let params = BrownConradyParams::new(0.0, 0.0, 0.0, 0.0, 0.0, intr).unwrap();
        CameraModel::brown_conrady(params, kind)
    }

    /// KITTI camera 00: raw 1392x512 with the published OpenCV-ordered
    /// distortion [k1 k2 p1 p2 k3].
    fn kitti_camera() -> CameraModel {
        let intr = PinholeIntrinsics::new(984.2439, 980.8141, 690.0, 233.1966, 1392, 512).unwrap();
        let params = BrownConradyParams::new(
            -0.3728755,
            0.2037299,
            -0.07233722,
            0.002219027,
            0.001383707,
            intr,
        )
        .unwrap();
        CameraModel::brown_conrady(params, DistanceKind::PlanarDepth)
    }

    fn noise_texture(seed: u64) -> SurfaceTexture {
        SurfaceTexture::Noise {
            period: 0.8,
            seed,
            base: [0.55, 0.5, 0.45],
            amplitude: 0.3,
        }
    }

    #[test]
    fn fronto_parallel_plane_has_constant_planar_depth() {
        let cam = pinhole_cam(12.0, 16, 12, DistanceKind::PlanarDepth);
        let scene = SyntheticScene::plane_at_z(5.0, 50.0, noise_texture(7)).unwrap();
        let out = render(&scene, &cam, &Se3Transform::identity()).unwrap();
        assert!(out.hit.data.iter().all(|&v| v));
        for v in &out.depth.data {
            assert!((v - 5.0).abs() < 1e-9, "planar depth {v}");
        }
    }

    #[test]
    fn fisheye_euclidean_range_is_secant_of_incident_angle() {
        let model = FisheyeModel::new(
            FisheyeKind::Stereographic { f: 30.0 },
            8.0,
            6.0,
            17,
            13,
            None,
        )
        .unwrap();
        let cam = CameraModel::fisheye(model, DistanceKind::EuclideanDistance);
        let scene = SyntheticScene::plane_at_z(5.0, 200.0, noise_texture(3)).unwrap();
        let out = render(&scene, &cam, &Se3Transform::identity()).unwrap();
        // Center pixel looks straight down the axis.
        assert!((out.depth.get(6, 8) - 5.0).abs() < 1e-12);
        // Hand-computed stereographic inverse: theta = 2 atan(r / 2f).
        for (j, i) in [(6usize, 14usize), (1, 8), (12, 2)] {
            let r = ((i as f64 - 8.0).powi(2) + (j as f64 - 6.0).powi(2)).sqrt();
            let theta = 2.0 * (r / 60.0).atan();
            assert_relative_eq!(out.depth.get(j, i), 5.0 / theta.cos(), max_relative = 1e-9);
        }
    }

    #[test]
    fn sphere_center_pixel_range_is_distance_minus_radius() {
        let cam = pinhole_cam(20.0, 9, 9, DistanceKind::EuclideanDistance);
        let scene = SyntheticScene::new(
            vec![ScenePrimitive::Sphere {
                center: Vector3::new(0.0, 0.0, 5.0),
                radius: 1.0,
                texture: noise_texture(1),
            }],
            [0.25, 0.5, 0.75],
        )
        .unwrap();
        let out = render(&scene, &cam, &Se3Transform::identity()).unwrap();
        assert!((out.depth.get(4, 4) - 4.0).abs() < 1e-12);
        assert!(out.hit.get(4, 4));
        // Corner rays pass the sphere: background color, invalid depth.
        assert!(!out.hit.get(0, 0));
        assert_eq!(out.image.get(0, 0, 2), 0.75);
    }

    #[test]
    fn checker_cells_alternate_across_the_cell_boundary() {
        let cam = pinhole_cam(10.0, 10, 10, DistanceKind::PlanarDepth);
        let tex = SurfaceTexture::Checker {
            period: 1.0,
            bright: [0.9, 0.9, 0.9],
            dark: [0.1, 0.1, 0.1],
        };
        let scene = SyntheticScene::plane_at_z(2.0, 50.0, tex).unwrap();
        let out = render(&scene, &cam, &Se3Transform::identity()).unwrap();
        // Pixel (9, 4): plane point (0.9, -0.1), cells (0, -1) -> dark.
        assert_eq!(out.image.get(4, 9, 0), 0.1);
        // Pixel (0, 4): plane point (-0.9, -0.1), cells (-1, -1) -> bright.
        assert_eq!(out.image.get(4, 0, 0), 0.9);
    }

    #[test]
    fn noise_renders_are_seed_deterministic() {
        let cam = pinhole_cam(40.0, 24, 18, DistanceKind::PlanarDepth);
        let a = render(
            &SyntheticScene::plane_at_z(3.0, 50.0, noise_texture(42)).unwrap(),
            &cam,
            &Se3Transform::identity(),
        )
        .unwrap();
        let b = render(
            &SyntheticScene::plane_at_z(3.0, 50.0, noise_texture(42)).unwrap(),
            &cam,
            &Se3Transform::identity(),
        )
        .unwrap();
        let c = render(
            &SyntheticScene::plane_at_z(3.0, 50.0, noise_texture(43)).unwrap(),
            &cam,
            &Se3Transform::identity(),
        )
        .unwrap();
        assert_eq!(a.image.data, b.image.data);
        assert_ne!(a.image.data, c.image.data);
        assert!(a.image.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn cast_agrees_with_direct_projection_of_known_landmarks() {
        let cam = pinhole_cam(40.0, 32, 24, DistanceKind::PlanarDepth);
        let tex = SurfaceTexture::Checker {
            period: 0.5,
            bright: [1.0; 3],
            dark: [0.0; 3],
        };
        let scene = SyntheticScene::plane_at_z(5.0, 50.0, tex).unwrap();
        let pose_b = Se3Transform::new(
            Vector3::new(0.02, -0.03, 0.01),
            Vector3::new(0.3, -0.2, 0.5),
        );
        let t_ab = pose_b.inverse();
        let mut checked = 0;
        for m in -2i32..=2 {
            for n in -1i32..=1 {
                // Checker cell corners are exactly known world points.
                let x_w = Vector3::new(m as f64 * 0.5, n as f64 * 0.5, 5.0);
                let p_a = cam.project(&x_w).unwrap();
                // Reconstruct the same point by casting the pixel's ray.
                let ray = cam.base_ray(p_a, None).unwrap();
                let hit = scene.cast(&Vector3::zeros(), &ray).unwrap();
                let x_hat = hit.t * ray;
                let p_direct = cam.project(&t_ab.apply(&x_w)).unwrap();
                let p_chained = cam.project(&t_ab.apply(&x_hat)).unwrap();
                let err = (p_direct.0 - p_chained.0).hypot(p_direct.1 - p_chained.1);
                assert!(err < 1e-6, "landmark ({m}, {n}) reprojects {err} px off");
                checked += 1;
            }
        }
        assert_eq!(checked, 15);
    }

    #[test]
    fn ground_truth_pair_reconstructs_below_one_percent() {
        let cam = pinhole_cam(80.0, 96, 72, DistanceKind::PlanarDepth);
        let scene = SyntheticScene::plane_at_z(5.0, 50.0, noise_texture(11)).unwrap();
        let target = render(&scene, &cam, &Se3Transform::identity()).unwrap();
        let src_pose = Se3Transform::new(Vector3::zeros(), Vector3::new(0.12, 0.0, 0.0));
        let source = render(&scene, &cam, &src_pose).unwrap();
        let t_ts = src_pose.inverse();
        let (synth, mask) = synthesize_view(&source.image, &target.depth, &t_ts, &cam, &cam).unwrap();
        let mut err = 0.0;
        let mut n = 0usize;
        for k in 0..mask.data.len() {
            if !mask.data[k] {
                continue;
            }
            let (j, i) = (k / 96, k % 96);
            for c in 0..3 {
                err += (synth.get(j, i, c) - target.image.get(j, i, c)).abs();
                n += 1;
            }
        }
        assert!(n > 90 * 68 * 3, "mask kept only {n} samples");
        let mean = err / n as f64;
        assert!(mean < 0.01, "mean reconstruction error {mean}");
    }

    #[test]
    fn static_pixel_mask_is_dense_for_a_moving_camera() {
        let cam = pinhole_cam(80.0, 96, 72, DistanceKind::PlanarDepth);
        let scene = SyntheticScene::plane_at_z(5.0, 50.0, noise_texture(19)).unwrap();
        let target = render(&scene, &cam, &Se3Transform::identity()).unwrap();
        let mut synth_pes = Vec::new();
        let mut ident_pes = Vec::new();
        for dx in [-0.12, 0.12] {
            let pose = Se3Transform::new(Vector3::zeros(), Vector3::new(dx, 0.0, 0.0));
            let src = render(&scene, &cam, &pose).unwrap();
            let (synth, mask) =
                synthesize_view(&src.image, &target.depth, &pose.inverse(), &cam, &cam).unwrap();
            synth_pes.push(photometric_error(&target.image, &synth, Some(&mask.data), 0.85).unwrap());
            ident_pes.push(photometric_error(&target.image, &src.image, None, 0.85).unwrap());
        }
        let synth_refs: Vec<(&[f64], &[bool])> = synth_pes
            .iter()
            .map(|(pe, v)| (pe.as_slice(), v.as_slice()))
            .collect();
        let ident_refs: Vec<(&[f64], &[bool])> = ident_pes
            .iter()
            .map(|(pe, v)| (pe.as_slice(), v.as_slice()))
            .collect();
        let (synth_min, synth_valid, _) = min_reconstruction(&synth_refs).unwrap();
        let (ident_min, ident_valid, _) = min_reconstruction(&ident_refs).unwrap();
        let mask = static_pixel_mask(&synth_min, &synth_valid, &ident_min, &ident_valid).unwrap();
        let kept = mask.iter().filter(|&&v| v).count();
        let candidates = synth_valid.iter().filter(|&&v| v).count();
        assert!(candidates > 0);
        let density = kept as f64 / candidates as f64;
        assert!(density > 0.9, "static mask density {density}");
    }

    #[test]
    fn true_depths_of_a_translated_pair_are_consistent() {
        let cam = pinhole_cam(60.0, 64, 48, DistanceKind::PlanarDepth);
        let scene = SyntheticScene::plane_at_z(5.0, 50.0, noise_texture(5)).unwrap();
        let a = render(&scene, &cam, &Se3Transform::identity()).unwrap();
        let fwd = Se3Transform::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0));
        let b = render(&scene, &cam, &fwd).unwrap();
        assert!((b.depth.get(24, 32) - 4.0).abs() < 1e-9);
        let loss = depth_consistency_pair(&a.depth, &b.depth, &fwd.inverse(), &cam).unwrap();
        assert!(loss < 1e-3, "consistency {loss}");
    }

    #[test]
    fn ground_truth_sequence_total_loss_is_below_one_percent() {
        let cam = pinhole_cam(80.0, 96, 72, DistanceKind::PlanarDepth);
        let scene = SyntheticScene::plane_at_z(5.0, 50.0, noise_texture(23)).unwrap();
        let poses: Vec<Se3Transform> = [-0.1, 0.0, 0.1]
            .iter()
            .map(|&dx| Se3Transform::new(Vector3::zeros(), Vector3::new(dx, 0.0, 0.0)))
            .collect();
        let views: Vec<RenderOutput> = poses.iter().map(|p| render(&scene, &cam, p).unwrap()).collect();
        let depths: Vec<Vec<DepthMap>> = views.iter().map(|v| vec![v.depth.clone()]).collect();
        let to_prev = poses[0].inverse().compose(&poses[1]);
        let to_next = poses[2].inverse().compose(&poses[1]);
        let sample = SequenceSample {
            frames: [&views[0].image, &views[1].image, &views[2].image],
            depths: [&depths[0], &depths[1], &depths[2]],
            poses: [&to_prev, &to_next],
        };
        let breakdown = total_loss(&sample, &cam, &LossWeights::default()).unwrap();
        assert!(breakdown.total < 0.01, "total {}", breakdown.total);
        assert!(breakdown.total > 0.0);
    }

    #[test]
    fn forward_motion_flows_radially_outward() {
        let cam = pinhole_cam(60.0, 33, 25, DistanceKind::PlanarDepth);
        let scene = SyntheticScene::plane_at_z(5.0, 50.0, noise_texture(2)).unwrap();
        let view = render(&scene, &cam, &Se3Transform::identity()).unwrap();
        let cloud = unproject_map(&cam, &view.depth).unwrap();
        // Source camera one meter closer to the plane.
        let fwd = Se3Transform::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0)).inverse();
        let (coords, mask, _) = reproject(&cloud, &fwd, &cam).unwrap();
        for j in 0..25 {
            for i in 0..33 {
                let k = j * 33 + i;
                if !mask.data[k] {
                    continue;
                }
                let r_old = (i as f64 - 16.0).hypot(j as f64 - 12.0);
                let r_new = (coords.x[k] - 16.0).hypot(coords.y[k] - 12.0);
                assert!(r_new >= r_old - 1e-9);
                if r_old > 0.5 {
                    assert!(r_new > r_old, "pixel ({i}, {j}) did not move outward");
                }
            }
        }
    }

    #[test]
    fn rectifying_a_pinhole_into_itself_is_the_identity_map() {
        let cam = pinhole_cam(30.0, 32, 24, DistanceKind::PlanarDepth);
        let intr = PinholeIntrinsics::new(30.0, 30.0, 15.5, 11.5, 32, 24).unwrap();
        let (map, mask) = rectification_maps(&cam, &intr);
        assert!(mask.data.iter().all(|&v| v));
        for j in 0..24 {
            for i in 0..32 {
                let k = j * 32 + i;
                assert!((map.x[k] - i as f64).abs() < 1e-9);
                assert!((map.y[k] - j as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn curved_projections_straighten_after_rectification() {
        // Orthogonal residuals of a line fit through 2D points.
        fn max_line_residual(pts: &[(f64, f64)]) -> f64 {
            let n = pts.len() as f64;
            let (mx, my) = pts
                .iter()
                .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x / n, ay + y / n));
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for (x, y) in pts {
                sxx += (x - mx) * (x - mx);
                sxy += (x - mx) * (y - my);
                syy += (y - my) * (y - my);
            }
            // Principal axis of the 2x2 scatter matrix.
            let tr = sxx + syy;
            let det = sxx * syy - sxy * sxy;
            let lam = tr / 2.0 + (tr * tr / 4.0 - det).max(0.0).sqrt();
            let (dx, dy) = if sxy.abs() > 1e-15 {
                (lam - syy, sxy)
            } else if sxx >= syy {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            };
            let norm = dx.hypot(dy);
            pts.iter()
                .map(|(x, y)| ((x - mx) * (-dy / norm) + (y - my) * (dx / norm)).abs())
                .fold(0.0, f64::max)
        }

        let cam = kitti_camera();
        let dst = PinholeIntrinsics::new(984.2439, 980.8141, 690.0, 233.1966, 1392, 512).unwrap();
        let mut raw = Vec::new();
        let mut rectified = Vec::new();
        for s in 0..=20 {
            let x_w = Vector3::new(-1.4 + 0.14 * s as f64, 0.45, 4.0);
            let p = cam.project(&x_w).unwrap();
            raw.push(p);
            let ray = cam.base_ray(p, None).unwrap();
            rectified.push(dst.project(&ray).unwrap());
        }
        assert!(max_line_residual(&raw) > 0.3, "raw projection should bow");
        let resid = max_line_residual(&rectified);
        assert!(resid < 0.1, "rectified residual {resid} px");
    }

    #[test]
    fn zoomed_out_rectification_loses_the_corners() {
        let cam = kitti_camera();
        let dst = PinholeIntrinsics::new(640.0, 640.0, 690.0, 233.1966, 1392, 512).unwrap();
        let (_, mask) = rectification_maps(&cam, &dst);
        assert!(!mask.get(0, 0));
        assert!(!mask.get(0, 1391));
        let report = fov_loss(&cam, &dst, 1).unwrap();
        assert!(report.rect_size.0 < 1392 || report.rect_size.1 < 512);
        assert!(report.rect_size.0 > 0);
        assert!(report.info_loss_fraction > 0.0);
    }

    #[test]
    fn matching_distortion_free_model_loses_nothing() {
        let cam = pinhole_cam(50.0, 48, 36, DistanceKind::PlanarDepth);
        let intr = PinholeIntrinsics::new(50.0, 50.0, 23.5, 17.5, 48, 36).unwrap();
        let report = fov_loss(&cam, &intr, 9).unwrap();
        assert_eq!(report.info_loss_fraction, 0.0);
        assert_eq!(report.rect_size, (48, 36));
        assert_eq!(report.resampling_psnr, f64::INFINITY);
        assert!((report.resampling_ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kitti_rectification_loses_roughly_a_tenth() {
        let cam = kitti_camera();
        let dst = PinholeIntrinsics::new(840.0, 840.0, 690.0, 233.1966, 1392, 512).unwrap();
        let report = fov_loss(&cam, &dst, 3).unwrap();
        assert!(
            report.info_loss_fraction >= 0.07 && report.info_loss_fraction <= 0.13,
            "info loss {}",
            report.info_loss_fraction
        );
        assert!(report.resampling_psnr.is_finite() && report.resampling_psnr > 25.0);
        assert!(report.resampling_ssim > 0.8 && report.resampling_ssim <= 1.0);
    }

    #[test]
    fn wide_fisheye_to_narrow_pinhole_loses_over_thirty_percent() {
        let model = FisheyeModel::new(
            FisheyeKind::Polynomial {
                a1: 170.0,
                a2: 0.55,
                a3: -2.8,
                a4: 0.2,
            },
            299.5,
            279.5,
            600,
            560,
            Some(95f64.to_radians()),
        )
        .unwrap();
        let cam = CameraModel::fisheye(model, DistanceKind::EuclideanDistance);
        let dst = pinhole_for_hfov(120.0, 600, 560).unwrap();
        let report = fov_loss(&cam, &dst, 4).unwrap();
        assert!(
            report.info_loss_fraction > 0.30,
            "info loss {}",
            report.info_loss_fraction
        );
    }

    #[test]
    fn resampling_fidelity_drops_with_distortion_strength() {
        // Stronger barrel terms squeeze the outer field onto fewer raw
        // pixels, so the rectification target that keeps the corner on the
        // canvas needs a shorter focal length and the round trip resamples
        // the image center ever more coarsely. The fixed quartic term keeps
        // each profile invertible across the whole canvas, and the probe is
        // fine grained (period 2.5 px) so that coarsening costs content.
        let mut probe = ImageBuffer::new(128, 96, 3).unwrap();
        for j in 0..96 {
            for i in 0..128 {
                for c in 0..3 {
                    probe.data[(j * 128 + i) * 3 + c] =
                        0.5 + 0.4 * value_noise(i as f64 / 2.5, j as f64 / 2.5, 17, c);
                }
            }
        }
        let mut psnrs = Vec::new();
        let mut ssims = Vec::new();
        for k1 in [-0.42, -0.47, -0.52] {
            let intr = PinholeIntrinsics::new(110.0, 110.0, 63.5, 47.5, 128, 96).unwrap();
            let params = BrownConradyParams::new(k1, 0.18, 0.0, 0.0, 0.0, intr).unwrap();
            let cam = CameraModel::brown_conrady(params, DistanceKind::PlanarDepth);
            let ray = cam.base_ray((0.0, 0.0), None).unwrap();
            let r_u = (ray.x / ray.z).hypot(ray.y / ray.z);
            let f_rect = 63.5f64.hypot(47.5) / r_u;
            let dst = PinholeIntrinsics::new(f_rect, f_rect, 63.5, 47.5, 128, 96).unwrap();
            let (psnr, ssim) = resampling_distortion(&probe, &cam, &dst).unwrap();
            assert!(psnr.is_finite());
            assert!(ssim < 1.0);
            psnrs.push(psnr);
            ssims.push(ssim);
        }
        assert!(psnrs[0] > psnrs[1] && psnrs[1] > psnrs[2], "psnr sweep {psnrs:?}");
        assert!(ssims[0] > ssims[1] && ssims[1] > ssims[2], "ssim sweep {ssims:?}");
    }

    #[test]
    fn fisheye_periphery_resamples_worse_than_the_center() {
        // The fisheye raw image resolves the scene ever more coarsely
        // toward wide angles, so the rectified periphery, compared against
        // a direct render at the rectified geometry, fares worse than the
        // rectified center.
        let model = FisheyeModel::new(
            FisheyeKind::Polynomial {
                a1: 60.0,
                a2: 0.2,
                a3: -1.0,
                a4: 0.07,
            },
            79.5,
            59.5,
            160,
            120,
            Some(95f64.to_radians()),
        )
        .unwrap();
        let cam = CameraModel::fisheye(model, DistanceKind::EuclideanDistance);
        let dst = pinhole_for_hfov(120.0, 160, 120).unwrap();
        let scene = SyntheticScene::plane_at_z(
            2.0,
            500.0,
            SurfaceTexture::Noise {
                period: 0.18,
                seed: 77,
                base: [0.5; 3],
                amplitude: 0.35,
            },
        )
        .unwrap();
        let raw = render(&scene, &cam, &Se3Transform::identity()).unwrap();
        let truth_cam = {
            let params =
                BrownConradyParams::new(0.0, 0.0, 0.0, 0.0, 0.0, dst).unwrap();
            CameraModel::brown_conrady(params, DistanceKind::PlanarDepth)
        };
        let truth = render(&scene, &truth_cam, &Se3Transform::identity()).unwrap();
        let (fwd, _) = rectification_maps(&cam, &dst);
        let (rect, rect_mask) = bilinear_sample(&raw.image, &fwd);
        let (mut se_center, mut n_center) = (0.0, 0usize);
        let (mut se_edge, mut n_edge) = (0.0, 0usize);
        for j in 0..120 {
            for i in 0..160 {
                let k = j * 160 + i;
                if !rect_mask.data[k] || !truth.hit.data[k] {
                    continue;
                }
                let mut se = 0.0;
                for c in 0..3 {
                    let d = rect.get(j, i, c) - truth.image.get(j, i, c);
                    se += d * d;
                }
                let r = (i as f64 - 79.5).hypot(j as f64 - 59.5);
                if r < 25.0 {
                    se_center += se;
                    n_center += 3;
                } else if r > 55.0 {
                    se_edge += se;
                    n_edge += 3;
                }
            }
        }
        assert!(n_center > 500 && n_edge > 500);
        let mse_center = se_center / n_center as f64;
        let mse_edge = se_edge / n_edge as f64;
        assert!(
            mse_edge > mse_center * 2.0,
            "center {mse_center:e} vs periphery {mse_edge:e}"
        );
    }

    #[test]
    fn scene_construction_rejects_bad_parameters() {
        assert!(SyntheticScene::new(vec![], [0.0; 3]).is_err());
        let tex = noise_texture(0);
        assert!(SyntheticScene::new(
            vec![ScenePrimitive::Sphere {
                center: Vector3::zeros(),
                radius: 0.0,
                texture: tex.clone(),
            }],
            [0.0; 3],
        )
        .is_err());
        assert!(SyntheticScene::plane_at_z(
            5.0,
            -1.0,
            tex.clone(),
        )
        .is_err());
        assert!(SyntheticScene::new(
            vec![ScenePrimitive::Plane {
                pose: Se3Transform::identity(),
                half_extent: (1.0, 1.0),
                texture: SurfaceTexture::Checker {
                    period: 0.0,
                    bright: [1.0; 3],
                    dark: [0.0; 3],
                },
            }],
            [0.0; 3],
        )
        .is_err());
        assert!(SyntheticScene::new(
            vec![ScenePrimitive::Plane {
                pose: Se3Transform::identity(),
                half_extent: (1.0, 1.0),
                texture: SurfaceTexture::Noise {
                    period: 1.0,
                    seed: 0,
                    base: [1.5, 0.5, 0.5],
                    amplitude: 0.1,
                },
            }],
            [0.0; 3],
        )
        .is_err());
        assert!(SyntheticScene::new(
            vec![ScenePrimitive::Sphere {
                center: Vector3::zeros(),
                radius: 1.0,
                texture: tex,
            }],
            [1.5, 0.0, 0.0],
        )
        .is_err());
    }

    #[test]
    fn largest_rectangle_respects_validity_and_containment() {
        // 6x4 grid with an invalid column at x=2 above y=1.
        let w = 6;
        let h = 4;
        let mut valid = vec![true; w * h];
        valid[2] = false;
        valid[w + 2] = false;
        // Principal point on the right side: best rect is columns 3..=5.
        let r = largest_valid_rect(&valid, w, h, 4, 1).unwrap();
        assert_eq!(r, (3, 0, 3, 4));
        // Principal point on the left: columns 0..=1 give 2x4 = 8, but the
        // bottom strip 6x2 = 12 also contains it and is larger.
        let r = largest_valid_rect(&valid, w, h, 0, 2).unwrap();
        assert_eq!(r, (0, 2, 6, 2));
        // Invalid principal point: no rectangle.
        assert!(largest_valid_rect(&valid, w, h, 2, 0).is_none());
    }
}
