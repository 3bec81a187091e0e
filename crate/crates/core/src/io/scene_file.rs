//! Scene description documents for the synthetic renderer.
//!
//! ```json
//! {
//!   "background": [0.1, 0.1, 0.1],
//!   "primitives": [
//!     {"shape": "plane", "pose": [0, 0, 0, 0, 0, 5], "half_extent": [60, 60],
//!      "texture": {"kind": "noise", "period": 0.8, "seed": 9,
//!                   "base": [0.55, 0.5, 0.45], "amplitude": 0.3}},
//!     {"shape": "sphere", "center": [0, 0, 5], "radius": 1,
//!      "texture": {"kind": "checker", "period": 0.5,
//!                   "bright": [0.9, 0.9, 0.9], "dark": [0.1, 0.1, 0.1]}}
//!   ]
//! }
//! ```
//!
//! A plane's pose is the six-value form `[w1, w2, w3, t1, t2, t3]` (local
//! to world); its half extents are in meters along local x and y. All
//! lengths are meters and colors live in [0, 1].

use crate::error::{Error, Result};
use crate::geometry::Se3Transform;
use crate::scene::{ScenePrimitive, SurfaceTexture, SyntheticScene};
use nalgebra::Vector3;
use serde_json::{Map, Value};
use std::fmt::Write as _;

/// A parsed scene document: the primitive list in file order plus the
/// background color. Build the renderer-ready form with [`Self::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescription {
    pub primitives: Vec<ScenePrimitive>,
    pub background: [f64; 3],
}

impl SceneDescription {
    /// Validates and prepares the scene for rendering.
    pub fn build(&self) -> Result<SyntheticScene> {
        SyntheticScene::new(self.primitives.clone(), self.background)
    }
}

fn as_object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::parse(format!("{what} must be a JSON object")))
}

fn field<'a>(m: &'a Map<String, Value>, key: &str, what: &str) -> Result<&'a Value> {
    m.get(key)
        .ok_or_else(|| Error::invalid(format!("{key} missing in {what}")))
}

fn number(v: &Value, what: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::parse(format!("{what} must be a number")))
}

fn float_array<const N: usize>(v: &Value, what: &str) -> Result<[f64; N]> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::parse(format!("{what} must be an array of {N} numbers")))?;
    if arr.len() != N {
        return Err(Error::parse(format!(
            "{what} holds {} values, expected {N}",
            arr.len()
        )));
    }
    let mut out = [0.0; N];
    for (k, item) in arr.iter().enumerate() {
        out[k] = number(item, what)?;
    }
    Ok(out)
}

fn parse_texture(v: &Value) -> Result<SurfaceTexture> {
    let m = as_object(v, "texture")?;
    let kind = field(m, "kind", "texture")?
        .as_str()
        .ok_or_else(|| Error::parse("texture kind must be a string".to_string()))?;
    match kind {
        "checker" => Ok(SurfaceTexture::Checker {
            period: number(field(m, "period", "checker texture")?, "period")?,
            bright: float_array(field(m, "bright", "checker texture")?, "bright")?,
            dark: float_array(field(m, "dark", "checker texture")?, "dark")?,
        }),
        "noise" => Ok(SurfaceTexture::Noise {
            period: number(field(m, "period", "noise texture")?, "period")?,
            seed: field(m, "seed", "noise texture")?
                .as_u64()
                .ok_or_else(|| Error::parse("seed must be a non-negative integer".to_string()))?,
            base: float_array(field(m, "base", "noise texture")?, "base")?,
            amplitude: number(field(m, "amplitude", "noise texture")?, "amplitude")?,
        }),
        other => Err(Error::invalid(format!("texture kind {other}"))),
    }
}

fn parse_primitive(v: &Value, index: usize) -> Result<ScenePrimitive> {
    let what = format!("primitive {index}");
    let m = as_object(v, &what)?;
    let shape = field(m, "shape", &what)?
        .as_str()
        .ok_or_else(|| Error::parse(format!("{what} shape must be a string")))?;
    match shape {
        "plane" => {
            let p: [f64; 6] = float_array(field(m, "pose", &what)?, "pose")?;
            let half: [f64; 2] = float_array(field(m, "half_extent", &what)?, "half_extent")?;
            Ok(ScenePrimitive::Plane {
                pose: Se3Transform::from_params(&p),
                half_extent: (half[0], half[1]),
                texture: parse_texture(field(m, "texture", &what)?)?,
            })
        }
        "sphere" => {
            let c: [f64; 3] = float_array(field(m, "center", &what)?, "center")?;
            Ok(ScenePrimitive::Sphere {
                center: Vector3::new(c[0], c[1], c[2]),
                radius: number(field(m, "radius", &what)?, "radius")?,
                texture: parse_texture(field(m, "texture", &what)?)?,
            })
        }
        other => Err(Error::invalid(format!("{what} shape {other}"))),
    }
}

/// Parses a scene document and validates it by construction.
pub fn parse_scene(text: &str) -> Result<SceneDescription> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("scene: {e}")))?;
    let top = as_object(&doc, "scene document")?;
    for key in top.keys() {
        if !["background", "primitives"].contains(&key.as_str()) {
            return Err(Error::invalid(format!("unexpected key {key} in scene")));
        }
    }
    let background: [f64; 3] = float_array(field(top, "background", "scene")?, "background")?;
    let prims = field(top, "primitives", "scene")?
        .as_array()
        .ok_or_else(|| Error::parse("primitives must be an array".to_string()))?;
    let primitives = prims
        .iter()
        .enumerate()
        .map(|(k, p)| parse_primitive(p, k))
        .collect::<Result<Vec<_>>>()?;
    let desc = SceneDescription {
        primitives,
        background,
    };
    desc.build()?;
    Ok(desc)
}

fn write_floats(out: &mut String, values: &[f64]) {
    out.push('[');
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{v}");
    }
    out.push(']');
}

fn write_texture(out: &mut String, texture: &SurfaceTexture) {
    match texture {
        SurfaceTexture::Checker { period, bright, dark } => {
            let _ = write!(out, "{{\"kind\": \"checker\", \"period\": {period}, \"bright\": ");
            write_floats(out, bright);
            out.push_str(", \"dark\": ");
            write_floats(out, dark);
            out.push('}');
        }
        SurfaceTexture::Noise { period, seed, base, amplitude } => {
            let _ = write!(out, "{{\"kind\": \"noise\", \"period\": {period}, \"seed\": {seed}, \"base\": ");
            write_floats(out, base);
            let _ = write!(out, ", \"amplitude\": {amplitude}}}");
        }
    }
}

/// Serializes with fixed key order and shortest round-trip floats, so
/// parse -> serialize -> parse is the identity.
pub fn serialize_scene(desc: &SceneDescription) -> String {
    let mut out = String::from("{\n  \"background\": ");
    write_floats(&mut out, &desc.background);
    out.push_str(",\n  \"primitives\": [\n");
    for (k, prim) in desc.primitives.iter().enumerate() {
        out.push_str("    ");
        match prim {
            ScenePrimitive::Plane { pose, half_extent, texture } => {
                out.push_str("{\"shape\": \"plane\", \"pose\": ");
                write_floats(&mut out, &pose.params());
                out.push_str(", \"half_extent\": ");
                write_floats(&mut out, &[half_extent.0, half_extent.1]);
                out.push_str(", \"texture\": ");
                write_texture(&mut out, texture);
                out.push('}');
            }
            ScenePrimitive::Sphere { center, radius, texture } => {
                out.push_str("{\"shape\": \"sphere\", \"center\": ");
                write_floats(&mut out, &[center.x, center.y, center.z]);
                let _ = write!(out, ", \"radius\": {radius}, \"texture\": ");
                write_texture(&mut out, texture);
                out.push('}');
            }
        }
        out.push_str(if k + 1 == desc.primitives.len() { "\n" } else { ",\n" });
    }
    out.push_str("  ]\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "background": [0.125, 0.25, 0.375],
        "primitives": [
            {"shape": "plane", "pose": [0.01, -0.02, 0.03, 0.5, -0.25, 5.0],
             "half_extent": [60.0, 40.0],
             "texture": {"kind": "noise", "period": 0.8, "seed": 9,
                          "base": [0.55, 0.5, 0.45], "amplitude": 0.3}},
            {"shape": "sphere", "center": [0.0, 0.0, 5.0], "radius": 1.0,
             "texture": {"kind": "checker", "period": 0.5,
                          "bright": [0.9, 0.9, 0.9], "dark": [0.1, 0.1, 0.1]}}
        ]
    }"#;

    #[test]
    fn scene_parses_and_roundtrips() {
        let desc = parse_scene(DOC).unwrap();
        assert_eq!(desc.primitives.len(), 2);
        assert_eq!(desc.background, [0.125, 0.25, 0.375]);
        let json = serialize_scene(&desc);
        let again = parse_scene(&json).unwrap();
        assert_eq!(desc, again, "parse -> serialize -> parse must be identity");
    }

    #[test]
    fn parsed_scene_renders() {
        let desc = parse_scene(DOC).unwrap();
        let scene = desc.build().unwrap();
        assert!(scene
            .cast(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 1.0))
            .is_some());
    }

    #[test]
    fn empty_primitive_list_is_rejected() {
        let err = parse_scene(r#"{"background": [0, 0, 0], "primitives": []}"#).unwrap_err();
        assert!(matches!(err, Error::EmptyInput { .. }));
    }

    #[test]
    fn bad_texture_kind_is_named() {
        let doc = r#"{
            "background": [0, 0, 0],
            "primitives": [{"shape": "sphere", "center": [0, 0, 5], "radius": 1,
                             "texture": {"kind": "marble", "period": 1.0}}]
        }"#;
        let err = parse_scene(doc).unwrap_err();
        match err {
            Error::InvalidParameter { what } => assert!(what.contains("marble"), "{what}"),
            other => panic!("expected InvalidParameter, got {other}"),
        }
    }

    #[test]
    fn missing_field_names_the_primitive() {
        let doc = r#"{
            "background": [0, 0, 0],
            "primitives": [{"shape": "sphere", "radius": 1,
                             "texture": {"kind": "checker", "period": 1.0,
                                          "bright": [1,1,1], "dark": [0,0,0]}}]
        }"#;
        let err = parse_scene(doc).unwrap_err();
        match err {
            Error::InvalidParameter { what } => {
                assert!(what.contains("center") && what.contains("primitive 0"), "{what}")
            }
            other => panic!("expected InvalidParameter, got {other}"),
        }
    }
}
