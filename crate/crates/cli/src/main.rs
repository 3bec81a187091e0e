//! Command line front end for the camera geometry toolkit.
//!
//! Every command reads plain files (JSON calibrations, PFM rasters, PNG
//! images, CSV tables), writes plain files, and prints key=value summaries
//! to stdout. Errors go to stderr and exit with status 1. Outputs are
//! byte-deterministic: the same inputs always produce identical files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use camgeom::io::{
    breakdown_report, fmt_sig, metrics_csv, parse_calibration, parse_odometry_csv,
    parse_pixels_csv, parse_points_csv, parse_pose6, parse_scene, parse_weights_csv, pose6_csv,
    read_image_png, read_pfm, rectification_report_text, serialize_calibration, trace_csv,
    write_depth_pfm, write_image_png, write_remap_pfm, PfmData,
};
use camgeom::{
    depth_metrics, depth_metrics_cropped, fov_loss, integrate_odometry, pinhole_for_hfov,
    recover_depth, recover_pose, rectification_maps, render, scale_pose, synthesize_view,
    total_loss, CameraModel, DepthMap, DistanceKind, Error, ImageBuffer, LensModel,
    LossWeights, OptimizationConfig, PinholeIntrinsics, Result, Se3Transform, SequenceSample,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod selftest;

#[derive(Parser)]
#[command(name = "camgeom", version, about = "Camera geometry and view synthesis toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate and summarize a calibration file.
    Calib(CalibArgs),
    /// Project 3D camera-frame points to pixels.
    Project(ProjectArgs),
    /// Back-project pixels to rays or 3D points.
    Unproject(UnprojectArgs),
    /// Write the source-pixel lookup grid for rectifying to a pinhole view.
    RectifyMaps(RectifyArgs),
    /// Report the field-of-view cost of rectifying to a pinhole view.
    FovReport(FovArgs),
    /// Synthesize the target view from a source image and target depth.
    Warp(WarpArgs),
    /// Score a three-frame sample with the self-supervised loss.
    Loss(LossArgs),
    /// Recover a depth map by gradient descent on the photometric loss.
    RecoverDepth(RecoverDepthArgs),
    /// Refine a relative pose by gradient descent on the photometric loss.
    RefinePose(RefinePoseArgs),
    /// Scale a unit-norm pose translation to match odometry displacement.
    AlignScale(AlignScaleArgs),
    /// Compare a predicted depth map against ground truth.
    Evaluate(EvaluateArgs),
    /// Render a synthetic scene through a calibrated camera.
    Render(RenderArgs),
    /// Run built-in invariant suites; exits nonzero on any violation.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct CalibArgs {
    #[command(subcommand)]
    cmd: CalibCmd,
}

#[derive(Subcommand)]
enum CalibCmd {
    /// Parse a calibration file and print a summary.
    Validate { file: PathBuf },
}

#[derive(Args)]
struct ProjectArgs {
    /// Calibration JSON file.
    #[arg(long)]
    calib: PathBuf,
    /// CSV of camera-frame points, one x,y,z row per point.
    #[arg(long)]
    points: PathBuf,
    /// Output CSV (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct UnprojectArgs {
    #[arg(long)]
    calib: PathBuf,
    /// CSV of pixels, one u,v row per pixel.
    #[arg(long)]
    pixels: PathBuf,
    /// Back-project to points at this range instead of unit rays. The
    /// calibration's distance_kind decides what the range means.
    #[arg(long)]
    range: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RectifyArgs {
    #[arg(long)]
    calib: PathBuf,
    /// Horizontal field of view of the virtual pinhole, in degrees.
    #[arg(long, conflicts_with = "target_f")]
    target_fov: Option<f64>,
    /// Focal length of the virtual pinhole, in pixels.
    #[arg(long)]
    target_f: Option<f64>,
    /// Output remap PFM (three channels: source x, source y, validity).
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct FovArgs {
    #[arg(long)]
    calib: PathBuf,
    #[arg(long, conflicts_with = "target_f")]
    target_fov: Option<f64>,
    #[arg(long)]
    target_f: Option<f64>,
    /// Expected raw sensor size as WxH; rejected if the calibration differs.
    #[arg(long)]
    raw_size: Option<String>,
    /// Seed for the ray-casting oracle's scene.
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct WarpArgs {
    #[arg(long)]
    calib: PathBuf,
    /// Source image PNG sampled by the warp.
    #[arg(long)]
    source: PathBuf,
    /// Target-frame depth PFM.
    #[arg(long)]
    depth: PathBuf,
    /// Pose mapping target-frame points into the source frame, as six CSV
    /// values w1,w2,w3,t1,t2,t3 (axis-angle then translation in meters).
    #[arg(long)]
    pose: String,
    /// Output PNG for the synthesized view.
    #[arg(short, long)]
    output: PathBuf,
    /// Optional PNG for the validity mask (255 = valid).
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Args)]
struct LossArgs {
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Previous frame image.
    #[arg(long)]
    prev: PathBuf,
    /// Next frame image.
    #[arg(long)]
    next: PathBuf,
    #[arg(long)]
    depth_target: PathBuf,
    #[arg(long)]
    depth_prev: PathBuf,
    #[arg(long)]
    depth_next: PathBuf,
    /// Pose mapping target-frame points into the previous frame.
    #[arg(long)]
    pose_prev: String,
    /// Pose mapping target-frame points into the next frame.
    #[arg(long)]
    pose_next: String,
    /// Loss weights as ssim,smoothness,consistency,clip_percentile,num_scales.
    #[arg(long)]
    weights: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverDepthArgs {
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    prev: PathBuf,
    #[arg(long)]
    next: PathBuf,
    #[arg(long)]
    pose_prev: String,
    #[arg(long)]
    pose_next: String,
    /// Constant initial depth in meters.
    #[arg(long)]
    init: f64,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 1000.0)]
    step: f64,
    /// Stop when the relative loss decrease falls to this value.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long)]
    weights: Option<String>,
    /// Output depth PFM.
    #[arg(short, long)]
    output: PathBuf,
    /// Optional CSV with the per-iteration loss trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct RefinePoseArgs {
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    source: PathBuf,
    /// Target-frame depth PFM.
    #[arg(long)]
    depth: PathBuf,
    /// Initial pose guess (identity when omitted).
    #[arg(long)]
    init: Option<String>,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long)]
    weights: Option<String>,
    /// Output CSV with the refined pose (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct AlignScaleArgs {
    /// CSV of timestamp_s,speed_mps odometry samples.
    #[arg(long)]
    odometry: PathBuf,
    /// Pose whose translation is rescaled, as six CSV values.
    #[arg(long)]
    pose: String,
    /// Interval start timestamp in seconds.
    #[arg(long)]
    from: f64,
    /// Interval end timestamp in seconds.
    #[arg(long)]
    to: f64,
    /// Output CSV with the rescaled pose (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted depth PFM.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth depth PFM; pixels with value 0 are skipped.
    #[arg(long)]
    gt: PathBuf,
    /// Depth cap in meters.
    #[arg(long, default_value_t = 80.0)]
    cap: f64,
    /// Rescale predictions by the ratio of medians before scoring.
    #[arg(long)]
    median_scale: bool,
    #[arg(long, default_value_t = 1e-3)]
    min_depth: f64,
    /// Evaluation window as i0,j0,w,h (full raster when omitted).
    #[arg(long)]
    crop: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Scene description JSON.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    /// Camera-to-world pose (identity when omitted).
    #[arg(long)]
    pose: Option<String>,
    /// Output PNG.
    #[arg(short, long)]
    output: PathBuf,
    /// Optional ground-truth depth PFM.
    #[arg(long)]
    depth: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Bits::Eight)]
    bits: Bits,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bits {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

#[derive(Args)]
struct SelftestArgs {
    #[command(subcommand)]
    suite: SelftestSuite,
}

#[derive(Subcommand)]
enum SelftestSuite {
    /// Analytic Jacobians and loss gradients against finite differences.
    Gradients,
    /// Projection and unprojection round trips for every camera model.
    Roundtrip,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Calib(a) => match a.cmd {
            CalibCmd::Validate { file } => calib_validate(&file),
        },
        Cmd::Project(a) => cmd_project(a),
        Cmd::Unproject(a) => cmd_unproject(a),
        Cmd::RectifyMaps(a) => cmd_rectify_maps(a),
        Cmd::FovReport(a) => cmd_fov_report(a),
        Cmd::Warp(a) => cmd_warp(a),
        Cmd::Loss(a) => cmd_loss(a),
        Cmd::RecoverDepth(a) => cmd_recover_depth(a),
        Cmd::RefinePose(a) => cmd_refine_pose(a),
        Cmd::AlignScale(a) => cmd_align_scale(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Render(a) => cmd_render(a),
        Cmd::Selftest(a) => match a.suite {
            SelftestSuite::Gradients => selftest::gradients(),
            SelftestSuite::Roundtrip => selftest::roundtrip(),
        },
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::invalid(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_calib(path: &Path) -> Result<CameraModel> {
    parse_calibration(&read_text(path)?)
}

fn pose_arg(text: &str) -> Result<Se3Transform> {
    parse_pose6(text)
}

fn weights_arg(text: Option<&str>) -> Result<LossWeights> {
    match text {
        Some(t) => parse_weights_csv(t),
        None => Ok(LossWeights::default()),
    }
}

fn parse_size(text: &str) -> Result<(usize, usize)> {
    let (w, h) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::parse(format!("size {text} is not WxH")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::parse(format!("size component {s}")))
    };
    Ok((parse(w)?, parse(h)?))
}

fn principal_point(cam: &CameraModel) -> (f64, f64) {
    match &cam.lens {
        LensModel::BrownConrady(m) => (m.intrinsics.cx, m.intrinsics.cy),
        LensModel::Fisheye(m) => (m.cx, m.cy),
    }
}

/// The virtual pinhole selected by --target-fov or --target-f. A focal
/// length keeps the source principal point; a field of view centers it.
fn target_pinhole(
    cam: &CameraModel,
    target_fov: Option<f64>,
    target_f: Option<f64>,
) -> Result<PinholeIntrinsics> {
    let (w, h) = (cam.width(), cam.height());
    match (target_fov, target_f) {
        (Some(deg), None) => pinhole_for_hfov(deg, w, h),
        (None, Some(f)) => {
            let (cx, cy) = principal_point(cam);
            PinholeIntrinsics::new(f, f, cx, cy, w, h)
        }
        _ => Err(Error::invalid(
            "exactly one of --target-fov and --target-f is required".to_string(),
        )),
    }
}

fn read_depth_raster(path: &Path, kind: DistanceKind) -> Result<DepthMap> {
    camgeom::io::read_depth_pfm(path, kind)
}

fn calib_validate(file: &Path) -> Result<()> {
    let cam = load_calib(file)?;
    let (model, theta_max) = match &cam.lens {
        LensModel::BrownConrady(_) => ("brown_conrady".to_string(), None),
        LensModel::Fisheye(m) => {
            let name = match m.kind {
                camgeom::FisheyeKind::Polynomial { .. } => "polynomial",
                camgeom::FisheyeKind::Ucm { .. } => "ucm",
                camgeom::FisheyeKind::Eucm { .. } => "eucm",
                camgeom::FisheyeKind::Rectilinear { .. } => "rectilinear",
                camgeom::FisheyeKind::Stereographic { .. } => "stereographic",
                camgeom::FisheyeKind::DoubleSphere { .. } => "double_sphere",
            };
            (name.to_string(), Some(m.theta_max))
        }
    };
    let kind = match cam.distance_kind {
        DistanceKind::PlanarDepth => "planar_depth",
        DistanceKind::EuclideanDistance => "euclidean_distance",
    };
    let mut out = format!(
        "model={model}\nwidth={}\nheight={}\ndistance_kind={kind}\n",
        cam.width(),
        cam.height()
    );
    if let Some(t) = theta_max {
        out.push_str(&format!("theta_max_deg={}\n", fmt_sig(t.to_degrees())));
    }
    // Round-trip through the serializer to prove the file is canonical.
    let canonical = serialize_calibration(&cam);
    let reparsed = parse_calibration(&canonical)?;
    let again = serialize_calibration(&reparsed);
    if canonical != again {
        return Err(Error::invalid("calibration does not round-trip".to_string()));
    }
    out.push_str("roundtrip=ok\n");
    emit(None, &out)
}

fn cmd_project(a: ProjectArgs) -> Result<()> {
    let cam = load_calib(&a.calib)?;
    let points = parse_points_csv(&read_text(&a.points)?)?;
    let mut out = String::from("u,v,valid\n");
    for p in &points {
        match cam.project(p) {
            Ok((u, v)) => {
                out.push_str(&format!("{},{},1\n", fmt_sig(u), fmt_sig(v)));
            }
            Err(_) => out.push_str("nan,nan,0\n"),
        }
    }
    emit(a.output.as_deref(), &out)
}

fn cmd_unproject(a: UnprojectArgs) -> Result<()> {
    let cam = load_calib(&a.calib)?;
    let pixels = parse_pixels_csv(&read_text(&a.pixels)?)?;
    let lut = cam.default_lut()?;
    let mut out = String::from("x,y,z,valid\n");
    for &p in &pixels {
        let r = match a.range {
            Some(range) => cam.unproject(p, range, cam.distance_kind, lut.as_ref()),
            None => cam.base_ray(p, lut.as_ref()),
        };
        match r {
            Ok(v) => out.push_str(&format!(
                "{},{},{},1\n",
                fmt_sig(v.x),
                fmt_sig(v.y),
                fmt_sig(v.z)
            )),
            Err(_) => out.push_str("nan,nan,nan,0\n"),
        }
    }
    emit(a.output.as_deref(), &out)
}

fn cmd_rectify_maps(a: RectifyArgs) -> Result<()> {
    let cam = load_calib(&a.calib)?;
    let dst = target_pinhole(&cam, a.target_fov, a.target_f)?;
    let (map, mask) = rectification_maps(&cam, &dst);
    write_remap_pfm(&a.output, &map, &mask)?;
    let valid = mask.data.iter().filter(|&&v| v).count();
    println!(
        "rect_width={}\nrect_height={}\nvalid_fraction={}",
        map.width,
        map.height,
        fmt_sig(valid as f64 / (map.width * map.height) as f64)
    );
    Ok(())
}

fn cmd_fov_report(a: FovArgs) -> Result<()> {
    let cam = load_calib(&a.calib)?;
    if let Some(size) = &a.raw_size {
        let (w, h) = parse_size(size)?;
        if (w, h) != (cam.width(), cam.height()) {
            return Err(Error::mismatch(format!(
                "--raw-size {w}x{h} but calibration is {}x{}",
                cam.width(),
                cam.height()
            )));
        }
    }
    let dst = target_pinhole(&cam, a.target_fov, a.target_f)?;
    let report = fov_loss(&cam, &dst, a.seed)?;
    emit(a.output.as_deref(), &rectification_report_text(&report))
}

fn cmd_warp(a: WarpArgs) -> Result<()> {
    let cam = load_calib(&a.calib)?;
    let source = read_image_png(&a.source)?;
    let depth = read_depth_raster(&a.depth, cam.distance_kind)?;
    let pose = pose_arg(&a.pose)?;
    let (synth, mask) = synthesize_view(&source, &depth, &pose, &cam, &cam)?;
    write_image_png(&a.output, &synth, 8)?;
    if let Some(mask_path) = &a.mask {
        let data = mask.data.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        let img = ImageBuffer::from_data(mask.width, mask.height, 1, data)?;
        write_image_png(mask_path, &img, 8)?;
    }
    Ok(())
}

fn cmd_loss(a: LossArgs) -> Result<()> {
    let cam = load_calib(&a.calib)?;
    let weights = weights_arg(a.weights.as_deref())?;
    if weights.num_scales != 1 {
        return Err(Error::invalid(
            "the loss command scores full-resolution depth only (num_scales must be 1)"
                .to_string(),
        ));
    }
    let frames = [
        read_image_png(&a.prev)?,
        read_image_png(&a.target)?,
        read_image_png(&a.next)?,
    ];
    let depths = [
        read_depth_raster(&a.depth_prev, cam.distance_kind)?,
        read_depth_raster(&a.depth_target, cam.distance_kind)?,
        read_depth_raster(&a.depth_next, cam.distance_kind)?,
    ];
    let poses = [pose_arg(&a.pose_prev)?, pose_arg(&a.pose_next)?];
    let sample = SequenceSample {
        frames: [&frames[0], &frames[1], &frames[2]],
        depths: [
            std::slice::from_ref(&depths[0]),
            std::slice::from_ref(&depths[1]),
            std::slice::from_ref(&depths[2]),
        ],
        poses: [&poses[0], &poses[1]],
    };
    let breakdown = total_loss(&sample, &cam, &weights)?;
    emit(a.output.as_deref(), &breakdown_report(&breakdown))
}

fn cmd_recover_depth(a: RecoverDepthArgs) -> Result<()> {
    let cam = load_calib(&a.calib)?;
    let weights = weights_arg(a.weights.as_deref())?;
    let cfg = OptimizationConfig::new(a.iters, a.step, a.tol, weights)?;
    let target = read_image_png(&a.target)?;
    let prev = read_image_png(&a.prev)?;
    let next = read_image_png(&a.next)?;
    let poses = [pose_arg(&a.pose_prev)?, pose_arg(&a.pose_next)?];
    let init = DepthMap::constant(cam.width(), cam.height(), cam.distance_kind, a.init)?;
    let (depth, trace) = recover_depth(
        &target,
        [&prev, &next],
        [&poses[0], &poses[1]],
        &init,
        &cam,
        &cfg,
    )?;
    write_depth_pfm(&a.output, &depth)?;
    if let Some(trace_path) = &a.trace {
        emit(Some(trace_path), &trace_csv(&trace))?;
    }
    let last = trace.rows.last().expect("trace has at least the initial row");
    println!("iterations={}\nfinal_loss={}", last.iter, fmt_sig(last.total));
    Ok(())
}

fn cmd_refine_pose(a: RefinePoseArgs) -> Result<()> {
    let cam = load_calib(&a.calib)?;
    let weights = weights_arg(a.weights.as_deref())?;
    let cfg = OptimizationConfig::new(a.iters, a.step, a.tol, weights)?;
    let target = read_image_png(&a.target)?;
    let source = read_image_png(&a.source)?;
    let depth = read_depth_raster(&a.depth, cam.distance_kind)?;
    let init = match &a.init {
        Some(text) => pose_arg(text)?,
        None => Se3Transform::identity(),
    };
    let (pose, trace) = recover_pose(&target, &source, &depth, &init, &cam, &cfg)?;
    if let Some(trace_path) = &a.trace {
        emit(Some(trace_path), &trace_csv(&trace))?;
    }
    emit(a.output.as_deref(), &format!("{}\n", pose6_csv(&pose)))
}

fn cmd_align_scale(a: AlignScaleArgs) -> Result<()> {
    let samples = parse_odometry_csv(&read_text(&a.odometry)?)?;
    let pose = pose_arg(&a.pose)?;
    let displacement = integrate_odometry(&samples, a.from, a.to)?;
    let scaled = scale_pose(&pose, displacement)?;
    let input_norm = pose.translation.norm();
    println!(
        "displacement_m={}\nscale_factor={}",
        fmt_sig(displacement),
        fmt_sig(displacement / input_norm)
    );
    emit(a.output.as_deref(), &format!("{}\n", pose6_csv(&scaled)))
}

fn one_channel(p: &PfmData, what: &str) -> Result<Vec<f64>> {
    if p.channels != 1 {
        return Err(Error::invalid(format!(
            "{what} must be a single-channel PFM, found {} channels",
            p.channels
        )));
    }
    Ok(p.data.iter().map(|&v| v as f64).collect())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let pred_pfm = read_pfm(&a.pred)?;
    let gt_pfm = read_pfm(&a.gt)?;
    if (pred_pfm.width, pred_pfm.height) != (gt_pfm.width, gt_pfm.height) {
        return Err(Error::mismatch(format!(
            "pred {}x{} vs gt {}x{}",
            pred_pfm.width, pred_pfm.height, gt_pfm.width, gt_pfm.height
        )));
    }
    let pred = one_channel(&pred_pfm, "--pred")?;
    let gt = one_channel(&gt_pfm, "--gt")?;
    let m = match &a.crop {
        Some(text) => {
            let parts: Vec<&str> = text.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::parse(format!("crop {text} is not i0,j0,w,h")));
            }
            let nums: Vec<usize> = parts
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(format!("crop component {s}")))
                })
                .collect::<Result<_>>()?;
            depth_metrics_cropped(
                &pred,
                &gt,
                pred_pfm.width,
                (nums[0], nums[1], nums[2], nums[3]),
                a.cap,
                a.median_scale,
                a.min_depth,
            )?
        }
        None => depth_metrics(&pred, &gt, a.cap, a.median_scale, a.min_depth)?,
    };
    emit(a.output.as_deref(), &metrics_csv(&m))
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let cam = load_calib(&a.calib)?;
    let desc = parse_scene(&read_text(&a.scene)?)?;
    let scene = desc.build()?;
    let pose = match &a.pose {
        Some(text) => pose_arg(text)?,
        None => Se3Transform::identity(),
    };
    let out = render(&scene, &cam, &pose)?;
    let bits = match a.bits {
        Bits::Eight => 8,
        Bits::Sixteen => 16,
    };
    write_image_png(&a.output, &out.image, bits)?;
    if let Some(depth_path) = &a.depth {
        // Pixels no primitive covers carry the renderer's miss placeholder;
        // mask them with the hit raster before trusting them.
        write_depth_pfm(depth_path, &out.depth)?;
    }
    let hits = out.hit.data.iter().filter(|&&v| v).count();
    println!(
        "hit_fraction={}",
        fmt_sig(hits as f64 / (out.hit.width * out.hit.height) as f64)
    );
    Ok(())
}
