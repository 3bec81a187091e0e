//! Edge-aware smoothness of mean-normalized inverse depth.

use crate::error::{Error, Result};
use crate::grid::{DepthMap, ImageBuffer};

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

/// Forward-difference smoothness of inverse depth normalized by its mean,
/// attenuated by exp(-|image gradient|) with channel-averaged gradients, and
/// averaged over the pixel count. Mean normalization keeps the term from
/// rewarding a uniform shrink of the whole map.
pub fn smoothness_loss(depth: &DepthMap, image: &ImageBuffer) -> Result<f64> {
    smoothness_eval(depth, image, 0.0, None)
}

/// Same forward value, also accumulating `weight * dL/d(depth)` into the
/// gradient raster.
pub(crate) fn smoothness_with_grad(
    depth: &DepthMap,
    image: &ImageBuffer,
    weight: f64,
    d_depth: &mut [f64],
) -> Result<f64> {
    smoothness_eval(depth, image, weight, Some(d_depth))
}

fn smoothness_eval(
    depth: &DepthMap,
    image: &ImageBuffer,
    weight: f64,
    d_depth: Option<&mut [f64]>,
) -> Result<f64> {
    let (w, h) = (depth.width, depth.height);
    if image.width != w || image.height != h {
        return Err(Error::mismatch(format!(
            "smoothness image {}x{} vs depth {w}x{h}",
            image.width, image.height
        )));
    }
    let px = w * h;
    let inv: Vec<f64> = depth.data.iter().map(|d| 1.0 / d).collect();
    let mu = inv.iter().sum::<f64>() / px as f64;
    let star: Vec<f64> = inv.iter().map(|d| d / mu).collect();

    let mut loss = 0.0;
    // Gradient with respect to the normalized inverse depth.
    let mut gs = vec![0.0; px];
    let m = px as f64;
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            if i + 1 < w {
                let mut gi = 0.0;
                for c in 0..image.channels {
                    gi += (image.get(j, i + 1, c) - image.get(j, i, c)).abs();
                }
                let ew = (-gi / image.channels as f64).exp();
                let diff = star[k + 1] - star[k];
                loss += ew * diff.abs() / m;
                let g = ew * signum0(diff) / m;
                gs[k + 1] += g;
                gs[k] -= g;
            }
            if j + 1 < h {
                let mut gi = 0.0;
                for c in 0..image.channels {
                    gi += (image.get(j + 1, i, c) - image.get(j, i, c)).abs();
                }
                let ew = (-gi / image.channels as f64).exp();
                let diff = star[k + w] - star[k];
                loss += ew * diff.abs() / m;
                let g = ew * signum0(diff) / m;
                gs[k + w] += g;
                gs[k] -= g;
            }
        }
    }
    if let Some(out) = d_depth {
        // star = inv / mu with mu depending on every pixel:
        // dL/dinv_q = gs_q / mu - (sum_p gs_p inv_p) / (m mu^2).
        let dot: f64 = gs.iter().zip(&inv).map(|(g, d)| g * d).sum();
        for k in 0..px {
            let dinv = gs[k] / mu - dot / (m * mu * mu);
            out[k] += weight * dinv * (-1.0 / (depth.data[k] * depth.data[k]));
        }
    }
    Ok(loss)
}
