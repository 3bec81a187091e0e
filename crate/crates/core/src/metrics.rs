//! Depth evaluation metrics with distance caps and optional median scaling.
//!
//! A ground-truth pixel participates iff its value lies in [min_depth, cap];
//! anything else (including zero markers for missing returns) is skipped.
//! Predictions are clamped into [min_depth, cap] before metric evaluation,
//! after the optional median rescaling.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

impl DepthMetrics {
    /// Table column order used by CSV output.
    pub fn as_row(&self) -> [f64; 7] {
        [
            self.abs_rel,
            self.sq_rel,
            self.rmse,
            self.rmse_log,
            self.delta1,
            self.delta2,
            self.delta3,
        ]
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn depth_metrics(
    pred: &[f64],
    gt: &[f64],
    cap: f64,
    median_scale: bool,
    min_depth: f64,
) -> Result<DepthMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::mismatch(format!(
            "pred has {} pixels, gt has {}",
            pred.len(),
            gt.len()
        )));
    }
    if !(min_depth > 0.0 && cap > min_depth) {
        return Err(Error::invalid(format!(
            "depth window [{min_depth}, {cap}]"
        )));
    }
    let valid: Vec<usize> = (0..gt.len())
        .filter(|k| gt[*k].is_finite() && gt[*k] >= min_depth && gt[*k] <= cap)
        .collect();
    if valid.is_empty() {
        return Err(Error::NoValidPixels {
            what: format!("no ground truth in [{min_depth}, {cap}]"),
        });
    }
    let scale = if median_scale {
        let mut g: Vec<f64> = valid.iter().map(|k| gt[*k]).collect();
        let mut p: Vec<f64> = valid.iter().map(|k| pred[*k]).collect();
        let mp = median(&mut p);
        if !(mp.is_finite() && mp > 0.0) {
            return Err(Error::DegenerateDepth {
                what: format!("median prediction {mp}"),
            });
        }
        median(&mut g) / mp
    } else {
        1.0
    };
    let n = valid.len() as f64;
    let (mut abs_rel, mut sq_rel, mut se, mut se_log) = (0.0, 0.0, 0.0, 0.0);
    let (mut d1, mut d2, mut d3) = (0usize, 0usize, 0usize);
    let (t1, t2, t3) = (1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25);
    for &k in &valid {
        let g = gt[k];
        let p = (pred[k] * scale).clamp(min_depth, cap);
        let e = p - g;
        abs_rel += e.abs() / g;
        sq_rel += e * e / g;
        se += e * e;
        let el = p.ln() - g.ln();
        se_log += el * el;
        let ratio = (p / g).max(g / p);
        if ratio < t1 {
            d1 += 1;
        }
        if ratio < t2 {
            d2 += 1;
        }
        if ratio < t3 {
            d3 += 1;
        }
    }
    Ok(DepthMetrics {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (se / n).sqrt(),
        rmse_log: (se_log / n).sqrt(),
        delta1: d1 as f64 / n,
        delta2: d2 as f64 / n,
        delta3: d3 as f64 / n,
    })
}

/// `depth_metrics` restricted to an axis-aligned evaluation window
/// (i0, j0, width, height) of a width*height raster. Off by default in every
/// supplied pipeline; present for protocols that crop the evaluation region.
pub fn depth_metrics_cropped(
    pred: &[f64],
    gt: &[f64],
    raster_width: usize,
    crop: (usize, usize, usize, usize),
    cap: f64,
    median_scale: bool,
    min_depth: f64,
) -> Result<DepthMetrics> {
    let (i0, j0, w, h) = crop;
    if w == 0 || h == 0 {
        return Err(Error::EmptyInput {
            what: "crop window".into(),
        });
    }
    let mut p = Vec::with_capacity(w * h);
    let mut g = Vec::with_capacity(w * h);
    for j in j0..j0 + h {
        for i in i0..i0 + w {
            let k = j * raster_width + i;
            if k >= pred.len() {
                return Err(Error::mismatch("crop exceeds raster".to_string()));
            }
            p.push(pred[k]);
            g.push(gt[k]);
        }
    }
    depth_metrics(&p, &g, cap, median_scale, min_depth)
}
