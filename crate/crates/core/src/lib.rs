//! Camera geometry and self-supervised depth tooling for raw (unrectified) images.
//!
//! The crate models seven projection functions (pinhole with Brown-Conrady
//! distortion plus six radially symmetric fisheye models), differentiable view
//! synthesis between calibrated views, the loss stack used for self-supervised
//! distance estimation (photometric SSIM+L1, per-pixel minimum over sources,
//! percentile clipping, static-pixel masking, edge-aware smoothness and
//! cross-sequence depth consistency), a ray-casting scene oracle with
//! rectification/field-of-view analysis, a gradient-descent depth/pose
//! recovery loop, and the standard depth evaluation metrics.
//!
//! All floating point work is f64. Image-like data lives in row-major grids
//! indexed as (row j, column i); pixel coordinates are (i, j) = (column, row)
//! to match the projection convention `i = fx * x' + cx`, `j = fy * y' + cy`.

pub mod camera;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod scene;
pub mod warp;

pub use camera::{
    build_inverse_lut, BrownConradyParams, CameraModel, DistanceKind, FisheyeKind, FisheyeModel,
    InverseLut, LensModel, PinholeIntrinsics,
};
pub use error::{Error, Result};
pub use geometry::{
    displacement_from_odometry, integrate_odometry, scale_pose, OdometrySample, Se3Transform,
};
pub use grid::{CoordinateMap, DepthMap, EgoMask, ImageBuffer, PointCloud};
pub use io::{parse_calibration, serialize_calibration};
pub use loss::{
    cross_sequence_consistency, depth_consistency_pair, depth_objective, depth_objective_grad,
    min_reconstruction, percentile_clip, photometric_error, pose_objective, pose_objective_grad,
    sigmoid_to_depth, sigmoid_to_depth_grad, smoothness_loss, ssim_map, static_pixel_mask,
    total_loss, total_loss_with_grad, DepthObjective, LossBreakdown, LossGradients, LossWeights,
    ScaleLoss, SequenceSample, SigmoidDepthKind, SigmoidDepthParams,
};
pub use metrics::{depth_metrics, depth_metrics_cropped, DepthMetrics};
pub use optim::{
    finite_diff_check, recover_depth, recover_pose, LossTrace, OptimizationConfig, TraceRow,
};
pub use scene::{
    fov_loss, pinhole_for_hfov, rectification_maps, render, resampling_distortion,
    RectificationReport, RenderOutput, SceneHit, ScenePrimitive, SurfaceTexture, SyntheticScene,
};
pub use warp::synthesize_view;
