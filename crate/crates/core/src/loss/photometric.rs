//! Mixed SSIM and L1 photometric error over uniform 3x3 windows, plus the
//! adjoint that pushes per-pixel error gradients back onto the second image.

use crate::error::{Error, Result};
use crate::grid::ImageBuffer;

pub(crate) const SSIM_C1: f64 = 1e-4;
pub(crate) const SSIM_C2: f64 = 9e-4;
const WINDOW_N: f64 = 9.0;

/// Deinterleave into per-channel planes so window sums index with stride 1.
pub(crate) fn channel_planes(img: &ImageBuffer) -> Vec<Vec<f64>> {
    let px = img.width * img.height;
    (0..img.channels)
        .map(|c| (0..px).map(|k| img.data[k * img.channels + c]).collect())
        .collect()
}

/// True where the whole 3x3 window around a pixel lies inside the image and,
/// when a mask is given, every window sample is masked valid. This erosion is
/// what keeps half-filled SSIM windows out of the loss.
pub(crate) fn erode_window(valid: Option<&[bool]>, width: usize, height: usize) -> Vec<bool> {
    let mut out = vec![false; width * height];
    if width < 3 || height < 3 {
        return out;
    }
    for j in 1..height - 1 {
        for i in 1..width - 1 {
            let ok = match valid {
                None => true,
                Some(v) => {
                    let mut all = true;
                    for dj in 0..3 {
                        for di in 0..3 {
                            all &= v[(j + dj - 1) * width + (i + di - 1)];
                        }
                    }
                    all
                }
            };
            out[j * width + i] = ok;
        }
    }
    out
}

struct WindowStats {
    mu_a: f64,
    mu_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
}

fn window_stats(a: &[f64], b: &[f64], width: usize, j: usize, i: usize) -> WindowStats {
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for dj in 0..3 {
        for di in 0..3 {
            let k = (j + dj - 1) * width + (i + di - 1);
            let (x, y) = (a[k], b[k]);
            sa += x;
            sb += y;
            saa += x * x;
            sbb += y * y;
            sab += x * y;
        }
    }
    let mu_a = sa / WINDOW_N;
    let mu_b = sb / WINDOW_N;
    WindowStats {
        mu_a,
        mu_b,
        var_a: saa / WINDOW_N - mu_a * mu_a,
        var_b: sbb / WINDOW_N - mu_b * mu_b,
        cov: sab / WINDOW_N - mu_a * mu_b,
    }
}

fn ssim_value(s: &WindowStats) -> f64 {
    let a1 = 2.0 * s.mu_a * s.mu_b + SSIM_C1;
    let a2 = 2.0 * s.cov + SSIM_C2;
    let b1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + SSIM_C1;
    let b2 = s.var_a + s.var_b + SSIM_C2;
    (a1 * a2) / (b1 * b2)
}

/// Channel-averaged SSIM between two equally shaped images, over uniform 3x3
/// windows with C1 = 0.01^2 and C2 = 0.03^2. The mask marks pixels whose
/// window fits inside the image; the map is 0 elsewhere.
pub fn ssim_map(a: &ImageBuffer, b: &ImageBuffer) -> Result<(Vec<f64>, Vec<bool>)> {
    if !a.same_shape(b) {
        return Err(Error::mismatch("ssim inputs differ in shape".to_string()));
    }
    let (w, h) = (a.width, a.height);
    let pa = channel_planes(a);
    let pb = channel_planes(b);
    let valid = erode_window(None, w, h);
    let mut out = vec![0.0; w * h];
    for (k, v) in valid.iter().enumerate() {
        if !v {
            continue;
        }
        let (j, i) = (k / w, k % w);
        let mut s = 0.0;
        for ch in 0..pa.len() {
            s += ssim_value(&window_stats(&pa[ch], &pb[ch], w, j, i));
        }
        out[k] = s / pa.len() as f64;
    }
    Ok((out, valid))
}

/// Error map over precomputed planes at the pixels flagged in `valid`.
pub(crate) fn pe_map_planes(
    pa: &[Vec<f64>],
    pb: &[Vec<f64>],
    width: usize,
    valid: &[bool],
    omega: f64,
) -> Vec<f64> {
    let channels = pa.len() as f64;
    let mut out = vec![0.0; valid.len()];
    for (k, v) in valid.iter().enumerate() {
        if !v {
            continue;
        }
        let (j, i) = (k / width, k % width);
        let (mut ssim, mut l1) = (0.0, 0.0);
        for ch in 0..pa.len() {
            ssim += ssim_value(&window_stats(&pa[ch], &pb[ch], width, j, i));
            l1 += (pb[ch][k] - pa[ch][k]).abs();
        }
        out[k] = omega * 0.5 * (1.0 - ssim / channels) + (1.0 - omega) * l1 / channels;
    }
    out
}

/// Mixed photometric error `w/2 (1 - SSIM) + (1 - w) L1`, both parts averaged
/// over channels. A pixel is scored only when its full 3x3 window is inside
/// the image and, when `b_valid` is given, every window sample of `b` is
/// valid; elsewhere the mask is 0 and the error 0.
pub fn photometric_error(
    a: &ImageBuffer,
    b: &ImageBuffer,
    b_valid: Option<&[bool]>,
    ssim_weight: f64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if !a.same_shape(b) {
        return Err(Error::mismatch(
            "photometric error inputs differ in shape".to_string(),
        ));
    }
    if !(0.0..=1.0).contains(&ssim_weight) {
        return Err(Error::invalid(format!("ssim weight {ssim_weight}")));
    }
    if let Some(m) = b_valid {
        if m.len() != a.width * a.height {
            return Err(Error::mismatch("validity mask length".to_string()));
        }
    }
    let valid = erode_window(b_valid, a.width, a.height);
    let pa = channel_planes(a);
    let pb = channel_planes(b);
    let pe = pe_map_planes(&pa, &pb, a.width, &valid, ssim_weight);
    Ok((pe, valid))
}

/// Adjoint of `pe_map_planes` with respect to image `b`. `dpe` carries the
/// upstream gradient per pixel and must be nonzero only where the error was
/// scored, which guarantees every touched window sample exists.
pub(crate) fn pe_adjoint_planes(
    pa: &[Vec<f64>],
    pb: &[Vec<f64>],
    width: usize,
    omega: f64,
    dpe: &[f64],
    grad_b: &mut [Vec<f64>],
) {
    let channels = pa.len() as f64;
    for (k, &g) in dpe.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let (j, i) = (k / width, k % width);
        for ch in 0..pa.len() {
            let a = &pa[ch];
            let b = &pb[ch];
            let diff = b[k] - a[k];
            let sgn = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            grad_b[ch][k] += g * (1.0 - omega) * sgn / channels;
            let s = window_stats(a, b, width, j, i);
            let a1 = 2.0 * s.mu_a * s.mu_b + SSIM_C1;
            let a2 = 2.0 * s.cov + SSIM_C2;
            let b1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + SSIM_C1;
            let b2 = s.var_a + s.var_b + SSIM_C2;
            let denom = (b1 * b2) * (b1 * b2);
            let scale = g * (-omega * 0.5) / channels;
            for dj in 0..3 {
                for di in 0..3 {
                    let q = (j + dj - 1) * width + (i + di - 1);
                    let d_cov = (a[q] - s.mu_a) / WINDOW_N;
                    let d_var = 2.0 * (b[q] - s.mu_b) / WINDOW_N;
                    let ds = ((2.0 * s.mu_a / WINDOW_N * a2 + a1 * 2.0 * d_cov) * b1 * b2
                        - a1 * a2 * (2.0 * s.mu_b / WINDOW_N * b2 + b1 * d_var))
                        / denom;
                    grad_b[ch][q] += scale * ds;
                }
            }
        }
    }
}
