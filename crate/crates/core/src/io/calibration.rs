//! Calibration documents: a JSON schema naming the lens model, the image
//! size, the range semantics and the model's parameters by symbol.
//!
//! ```json
//! {
//!   "model": "brown_conrady",
//!   "width": 1392,
//!   "height": 512,
//!   "distance_kind": "planar_depth",
//!   "params": { "fx": 959.79, "fy": 956.93, "cx": 696.02, "cy": 224.18,
//!                "k1": -0.369, "k2": 0.158, "k3": -0.000421,
//!                "p1": 0.001, "p2": -0.000085 }
//! }
//! ```
//!
//! Models and their parameter sets:
//!   brown_conrady   fx fy cx cy k1 k2 k3 p1 p2
//!   rectilinear     f cx cy [theta_max]
//!   stereographic   f cx cy [theta_max]
//!   polynomial      a1 a2 a3 a4 cx cy [theta_max]
//!   ucm             f xi cx cy [theta_max]
//!   eucm            f alpha beta cx cy [theta_max]
//!   double_sphere   f xi alpha cx cy [theta_max]
//!
//! `theta_max` is in radians. `distance_kind` defaults to planar_depth for
//! brown_conrady and rectilinear and to euclidean_distance for the other
//! fisheye models. The parameter set must match the model exactly; unknown
//! or missing keys are rejected by name. Serialization uses shortest
//! round-trip float formatting, so parse -> serialize -> parse is the
//! identity.

use crate::camera::{
    BrownConradyParams, CameraModel, DistanceKind, FisheyeKind, FisheyeModel, LensModel,
    PinholeIntrinsics,
};
use crate::error::{Error, Result};
use serde_json::{Map, Value};
use std::fmt::Write as _;

fn as_object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::parse(format!("{what} must be a JSON object")))
}

fn field<'a>(m: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    m.get(key)
        .ok_or_else(|| Error::invalid(format!("{key} missing")))
}

fn num(m: &Map<String, Value>, key: &str) -> Result<f64> {
    field(m, key)?
        .as_f64()
        .ok_or_else(|| Error::parse(format!("{key} must be a number")))
}

fn size(m: &Map<String, Value>, key: &str) -> Result<usize> {
    let v = field(m, key)?
        .as_u64()
        .ok_or_else(|| Error::parse(format!("{key} must be a non-negative integer")))?;
    Ok(v as usize)
}

/// Confirms `params` holds exactly the keys the model declares, `required`
/// plus optionally `theta_max` where allowed.
fn check_keys(
    params: &Map<String, Value>,
    model: &str,
    required: &[&str],
    optional: &[&str],
) -> Result<()> {
    for key in params.keys() {
        if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
            return Err(Error::invalid(format!(
                "unexpected key {key} in params for model {model}"
            )));
        }
    }
    Ok(())
}

fn opt_theta_max(params: &Map<String, Value>) -> Result<Option<f64>> {
    match params.get("theta_max") {
        None => Ok(None),
        Some(v) => Ok(Some(v.as_f64().ok_or_else(|| {
            Error::parse("theta_max must be a number".to_string())
        })?)),
    }
}

/// Parses and validates a calibration document, running the full model
/// construction checks (monotone radial mapping, positive radial factor).
pub fn parse_calibration(text: &str) -> Result<CameraModel> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("calibration: {e}")))?;
    let top = as_object(&doc, "calibration document")?;
    for key in top.keys() {
        if !["model", "width", "height", "distance_kind", "params"].contains(&key.as_str()) {
            return Err(Error::invalid(format!("unexpected key {key} in calibration")));
        }
    }
    let model = field(top, "model")?
        .as_str()
        .ok_or_else(|| Error::parse("model must be a string".to_string()))?;
    let width = size(top, "width")?;
    let height = size(top, "height")?;
    let params = as_object(field(top, "params")?, "params")?;

    let default_kind = match model {
        "brown_conrady" | "rectilinear" => DistanceKind::PlanarDepth,
        _ => DistanceKind::EuclideanDistance,
    };
    let kind = match top.get("distance_kind") {
        None => default_kind,
        Some(v) => match v.as_str() {
            Some("planar_depth") => DistanceKind::PlanarDepth,
            Some("euclidean_distance") => DistanceKind::EuclideanDistance,
            _ => {
                return Err(Error::parse(
                    "distance_kind must be \"planar_depth\" or \"euclidean_distance\""
                        .to_string(),
                ))
            }
        },
    };

    if model == "brown_conrady" {
        check_keys(
            params,
            model,
            &["fx", "fy", "cx", "cy", "k1", "k2", "k3", "p1", "p2"],
            &[],
        )?;
        let intr = PinholeIntrinsics::new(
            num(params, "fx")?,
            num(params, "fy")?,
            num(params, "cx")?,
            num(params, "cy")?,
            width,
            height,
        )?;
        let bc = BrownConradyParams::new(
            num(params, "k1")?,
            num(params, "k2")?,
            num(params, "k3")?,
            num(params, "p1")?,
            num(params, "p2")?,
            intr,
        )?;
        return Ok(CameraModel::brown_conrady(bc, kind));
    }

    let fisheye_kind = match model {
        "polynomial" => {
            check_keys(params, model, &["a1", "a2", "a3", "a4", "cx", "cy"], &["theta_max"])?;
            FisheyeKind::Polynomial {
                a1: num(params, "a1")?,
                a2: num(params, "a2")?,
                a3: num(params, "a3")?,
                a4: num(params, "a4")?,
            }
        }
        "ucm" => {
            check_keys(params, model, &["f", "xi", "cx", "cy"], &["theta_max"])?;
            FisheyeKind::Ucm {
                f: num(params, "f")?,
                xi: num(params, "xi")?,
            }
        }
        "eucm" => {
            check_keys(params, model, &["f", "alpha", "beta", "cx", "cy"], &["theta_max"])?;
            FisheyeKind::Eucm {
                f: num(params, "f")?,
                alpha: num(params, "alpha")?,
                beta: num(params, "beta")?,
            }
        }
        "rectilinear" => {
            check_keys(params, model, &["f", "cx", "cy"], &["theta_max"])?;
            FisheyeKind::Rectilinear { f: num(params, "f")? }
        }
        "stereographic" => {
            check_keys(params, model, &["f", "cx", "cy"], &["theta_max"])?;
            FisheyeKind::Stereographic { f: num(params, "f")? }
        }
        "double_sphere" => {
            check_keys(params, model, &["f", "xi", "alpha", "cx", "cy"], &["theta_max"])?;
            FisheyeKind::DoubleSphere {
                f: num(params, "f")?,
                xi: num(params, "xi")?,
                alpha: num(params, "alpha")?,
            }
        }
        other => {
            return Err(Error::UnknownModel {
                name: other.to_string(),
            })
        }
    };
    let fisheye = FisheyeModel::new(
        fisheye_kind,
        num(params, "cx")?,
        num(params, "cy")?,
        width,
        height,
        opt_theta_max(params)?,
    )?;
    Ok(CameraModel::fisheye(fisheye, kind))
}

fn push_params(out: &mut String, pairs: &[(&str, f64)]) {
    for (i, (key, v)) in pairs.iter().enumerate() {
        let sep = if i + 1 == pairs.len() { "\n" } else { ",\n" };
        write!(out, "    \"{key}\": {v}{sep}").expect("string write");
    }
}

/// Serializes a model back to the documented schema with a fixed key order.
pub fn serialize_calibration(cam: &CameraModel) -> String {
    let kind = match cam.distance_kind {
        DistanceKind::PlanarDepth => "planar_depth",
        DistanceKind::EuclideanDistance => "euclidean_distance",
    };
    let (model, pairs): (&str, Vec<(&str, f64)>) = match &cam.lens {
        LensModel::BrownConrady(m) => (
            "brown_conrady",
            vec![
                ("fx", m.intrinsics.fx),
                ("fy", m.intrinsics.fy),
                ("cx", m.intrinsics.cx),
                ("cy", m.intrinsics.cy),
                ("k1", m.k1),
                ("k2", m.k2),
                ("k3", m.k3),
                ("p1", m.p1),
                ("p2", m.p2),
            ],
        ),
        LensModel::Fisheye(m) => {
            let mut pairs = match m.kind {
                FisheyeKind::Polynomial { a1, a2, a3, a4 } => {
                    vec![("a1", a1), ("a2", a2), ("a3", a3), ("a4", a4)]
                }
                FisheyeKind::Ucm { f, xi } => vec![("f", f), ("xi", xi)],
                FisheyeKind::Eucm { f, alpha, beta } => {
                    vec![("f", f), ("alpha", alpha), ("beta", beta)]
                }
                FisheyeKind::Rectilinear { f } => vec![("f", f)],
                FisheyeKind::Stereographic { f } => vec![("f", f)],
                FisheyeKind::DoubleSphere { f, xi, alpha } => {
                    vec![("f", f), ("xi", xi), ("alpha", alpha)]
                }
            };
            pairs.push(("cx", m.cx));
            pairs.push(("cy", m.cy));
            pairs.push(("theta_max", m.theta_max));
            let name = match m.kind {
                FisheyeKind::Polynomial { .. } => "polynomial",
                FisheyeKind::Ucm { .. } => "ucm",
                FisheyeKind::Eucm { .. } => "eucm",
                FisheyeKind::Rectilinear { .. } => "rectilinear",
                FisheyeKind::Stereographic { .. } => "stereographic",
                FisheyeKind::DoubleSphere { .. } => "double_sphere",
            };
            (name, pairs)
        }
    };
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"model\": \"{model}\",");
    let _ = writeln!(out, "  \"width\": {},", cam.width());
    let _ = writeln!(out, "  \"height\": {},", cam.height());
    let _ = writeln!(out, "  \"distance_kind\": \"{kind}\",");
    out.push_str("  \"params\": {\n");
    push_params(&mut out, &pairs);
    out.push_str("  }\n}\n");
    out
}
