//! Built-in invariant suites behind `camgeom selftest`.
//!
//! Each check prints one `ok` or `FAIL` line; any failure makes the command
//! exit nonzero. The suites build every lens family in code so they run
//! without input files.

use camgeom::{
    finite_diff_check, parse_calibration, render, serialize_calibration, total_loss_with_grad,
    BrownConradyParams, CameraModel, DepthMap, DistanceKind, Error, FisheyeKind, FisheyeModel,
    LossWeights, PinholeIntrinsics, Result, ScenePrimitive, Se3Transform, SequenceSample,
    SurfaceTexture, SyntheticScene,
};
use nalgebra::Vector3;

struct Report {
    failures: usize,
}

impl Report {
    fn new() -> Self {
        Report { failures: 0 }
    }

    fn check(&mut self, name: &str, outcome: std::result::Result<(), String>) {
        match outcome {
            Ok(()) => println!("ok {name}"),
            Err(detail) => {
                println!("FAIL {name}: {detail}");
                self.failures += 1;
            }
        }
    }

    fn finish(self) -> Result<()> {
        if self.failures == 0 {
            println!("all checks passed");
            Ok(())
        } else {
            Err(Error::invalid(format!("{} checks failed", self.failures)))
        }
    }
}

fn model_suite() -> Vec<(&'static str, CameraModel)> {
    let pin = PinholeIntrinsics::new(984.2439, 980.8141, 690.0, 233.1966, 1392, 512)
        .expect("pinhole intrinsics");
    let bc = BrownConradyParams::new(
        -0.3728755,
        0.2037299,
        -0.07233722,
        0.002219027,
        0.001383707,
        pin,
    )
    .expect("distortion params");
    let fisheye = |kind, theta_max: Option<f64>| {
        CameraModel::fisheye(
            FisheyeModel::new(kind, 319.5, 239.5, 640, 480, theta_max).expect("fisheye model"),
            DistanceKind::EuclideanDistance,
        )
    };
    vec![
        (
            "brown_conrady",
            CameraModel::brown_conrady(bc, DistanceKind::PlanarDepth),
        ),
        (
            "polynomial",
            CameraModel::fisheye(
                FisheyeModel::new(
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
                .expect("fisheye model"),
                DistanceKind::EuclideanDistance,
            ),
        ),
        ("ucm", fisheye(FisheyeKind::Ucm { f: 350.0, xi: 0.8 }, None)),
        (
            "eucm",
            fisheye(
                FisheyeKind::Eucm {
                    f: 340.0,
                    alpha: 0.55,
                    beta: 1.1,
                },
                None,
            ),
        ),
        (
            "rectilinear",
            fisheye(FisheyeKind::Rectilinear { f: 420.0 }, None),
        ),
        (
            "stereographic",
            fisheye(FisheyeKind::Stereographic { f: 300.0 }, None),
        ),
        (
            "double_sphere",
            fisheye(
                FisheyeKind::DoubleSphere {
                    f: 320.0,
                    xi: -0.2,
                    alpha: 0.55,
                },
                None,
            ),
        ),
    ]
}

/// Camera-frame test points spread over depth and off-axis angle.
fn test_points() -> Vec<Vector3<f64>> {
    let mut pts = Vec::new();
    for &z in &[0.8, 2.5, 11.0] {
        for &x in &[-0.9, -0.2, 0.0, 0.35, 1.1] {
            for &y in &[-0.6, 0.1, 0.7] {
                pts.push(Vector3::new(x, y, z));
            }
        }
    }
    pts
}

pub fn gradients() -> Result<()> {
    let mut report = Report::new();
    for (name, cam) in model_suite() {
        report.check(
            &format!("jacobian {name}"),
            jacobian_check(&cam).map_err(|e| e.to_string()),
        );
    }
    report.check(
        "loss gradients",
        loss_gradient_check().map_err(|e| e.to_string()),
    );
    report.finish()
}

pub fn roundtrip() -> Result<()> {
    let mut report = Report::new();
    for (name, cam) in model_suite() {
        report.check(
            &format!("project roundtrip {name}"),
            projection_roundtrip(&cam).map_err(|e| e.to_string()),
        );
        report.check(&format!("calibration roundtrip {name}"), {
            let text = serialize_calibration(&cam);
            match parse_calibration(&text) {
                Ok(back) if serialize_calibration(&back) == text => Ok(()),
                Ok(_) => Err("serialized form changed after one round trip".to_string()),
                Err(e) => Err(e.to_string()),
            }
        });
    }
    report.finish()
}

/// Analytic projection Jacobian against central differences. The projection
/// is smooth in the point, so a 1e-6 step leaves ~1e-9 truncation error.
fn jacobian_check(cam: &CameraModel) -> Result<()> {
    let h = 1e-6;
    let mut checked = 0usize;
    for p in test_points() {
        let Ok(jac) = cam.jacobian_project(&p) else {
            continue;
        };
        if cam.project(&p).is_err() {
            continue;
        }
        for axis in 0..3 {
            let mut dp = Vector3::zeros();
            dp[axis] = h;
            let (up, vp) = cam.project(&(p + dp))?;
            let (um, vm) = cam.project(&(p - dp))?;
            let fd = [(up - um) / (2.0 * h), (vp - vm) / (2.0 * h)];
            for row in 0..2 {
                let a = jac[(row, axis)];
                let diff = (fd[row] - a).abs();
                let scale = a.abs().max(fd[row].abs()).max(1.0);
                if diff / scale > 1e-5 {
                    return Err(Error::invalid(format!(
                        "point {p:?} axis {axis} row {row}: analytic {a}, fd {}",
                        fd[row]
                    )));
                }
            }
        }
        checked += 1;
    }
    if checked < 10 {
        return Err(Error::invalid(format!(
            "only {checked} test points landed in the projection domain"
        )));
    }
    Ok(())
}

/// Unproject each pixel to a ray, push it back through the projection, and
/// demand the pixel back to a millionth of a pixel.
fn projection_roundtrip(cam: &CameraModel) -> Result<()> {
    let lut = cam.default_lut()?;
    let (w, h) = (cam.width() as f64, cam.height() as f64);
    let mut checked = 0usize;
    for jj in 1..8 {
        for ii in 1..8 {
            let p = (w * ii as f64 / 8.0, h * jj as f64 / 8.0);
            let Ok(ray) = cam.base_ray(p, lut.as_ref()) else {
                continue;
            };
            if ray.z <= 0.0 {
                continue;
            }
            let (u, v) = cam.project(&ray)?;
            let err = (u - p.0).hypot(v - p.1);
            if err > 1e-6 {
                return Err(Error::invalid(format!(
                    "pixel {p:?} came back {err:.3e} px away"
                )));
            }
            checked += 1;
        }
    }
    if checked < 20 {
        return Err(Error::invalid(format!(
            "only {checked} grid pixels landed in the projection domain"
        )));
    }
    Ok(())
}

/// Total-loss gradients against finite differences on a small rendered
/// sample, evaluated at a generic (non-optimal) depth raster.
fn loss_gradient_check() -> Result<()> {
    let pin = PinholeIntrinsics::new(60.0, 60.0, 31.5, 23.5, 64, 48)?;
    let bc = BrownConradyParams::new(0.0, 0.0, 0.0, 0.0, 0.0, pin)?;
    let cam = CameraModel::brown_conrady(bc, DistanceKind::PlanarDepth);
    let scene = SyntheticScene::new(
        vec![ScenePrimitive::Plane {
            pose: Se3Transform::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 5.0)),
            half_extent: (40.0, 40.0),
            texture: SurfaceTexture::Noise {
                period: 1.5,
                seed: 11,
                base: [0.55, 0.5, 0.45],
                amplitude: 0.3,
            },
        }],
        [0.2, 0.2, 0.2],
    )?;
    let cam_at = |x: f64| {
        Se3Transform::new(Vector3::zeros(), Vector3::new(x, 0.0, 0.0))
    };
    let frames: Vec<_> = [-0.11, 0.0, 0.12]
        .iter()
        .map(|&x| render(&scene, &cam, &cam_at(x)).map(|r| r.image))
        .collect::<Result<_>>()?;
    let wavy = |base: f64, phase: f64| {
        let data = (0..64 * 48)
            .map(|k| {
                let (j, i) = (k / 64, k % 64);
                base + 0.3 * (0.7 * i as f64 + 0.4 * j as f64 + phase).sin()
            })
            .collect();
        DepthMap::from_data(64, 48, DistanceKind::PlanarDepth, data)
    };
    let depths = [wavy(4.7, 0.2)?, wavy(5.2, 1.3)?, wavy(4.9, 2.1)?];
    let poses = [
        Se3Transform::new(Vector3::new(0.003, -0.004, 0.002), Vector3::new(0.11, 0.003, -0.002)),
        Se3Transform::new(Vector3::new(-0.002, 0.003, -0.003), Vector3::new(-0.12, -0.002, 0.004)),
    ];
    let weights = LossWeights::default();
    let sample = SequenceSample {
        frames: [&frames[0], &frames[1], &frames[2]],
        depths: [
            std::slice::from_ref(&depths[0]),
            std::slice::from_ref(&depths[1]),
            std::slice::from_ref(&depths[2]),
        ],
        poses: [&poses[0], &poses[1]],
    };
    let (_, grads) = total_loss_with_grad(&sample, &cam, &weights)?;

    let eval_depth = |data: &[f64]| -> Result<f64> {
        let d = DepthMap::from_data(64, 48, DistanceKind::PlanarDepth, data.to_vec())?;
        let s = SequenceSample {
            frames: [&frames[0], &frames[1], &frames[2]],
            depths: [
                std::slice::from_ref(&depths[0]),
                std::slice::from_ref(&d),
                std::slice::from_ref(&depths[2]),
            ],
            poses: [&poses[0], &poses[1]],
        };
        Ok(total_loss_with_grad(&s, &cam, &weights)?.0.total)
    };
    let worst = finite_diff_check(eval_depth, &depths[1].data, &grads.d_depth[1][0], 1e-5)?;
    if worst > 1e-3 {
        return Err(Error::invalid(format!(
            "depth gradient disagrees with finite differences by {worst:.3e}"
        )));
    }

    let pose_params: Vec<f64> = poses[0]
        .params()
        .iter()
        .chain(poses[1].params().iter())
        .copied()
        .collect();
    let eval_pose = |p: &[f64]| -> Result<f64> {
        let a = Se3Transform::from_params(&p[0..6].try_into().expect("six values"));
        let b = Se3Transform::from_params(&p[6..12].try_into().expect("six values"));
        let s = SequenceSample {
            frames: [&frames[0], &frames[1], &frames[2]],
            depths: [
                std::slice::from_ref(&depths[0]),
                std::slice::from_ref(&depths[1]),
                std::slice::from_ref(&depths[2]),
            ],
            poses: [&a, &b],
        };
        Ok(total_loss_with_grad(&s, &cam, &weights)?.0.total)
    };
    // The tiny step keeps the difference bracket away from bilinear cell
    // edges, where warped intensities have slope kinks.
    let worst = finite_diff_check(eval_pose, &pose_params, &grads.d_pose, 1e-7)?;
    if worst > 1e-3 {
        return Err(Error::invalid(format!(
            "pose gradient disagrees with finite differences by {worst:.3e}"
        )));
    }
    Ok(())
}
