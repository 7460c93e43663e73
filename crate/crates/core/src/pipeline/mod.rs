//! Per-clip orchestration: retarget → IK → render → blend → labels.
//!
//! Within a clip, IK runs frame by frame because each solution seeds the
//! next. Rendering, blending and PNG encoding of solved frames then run in
//! parallel. Clips are independent and run on a bounded thread pool. All
//! outputs are written through [`io::write_atomic`].

mod bundle;
mod config;
pub mod io;
mod manifest;

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

pub use bundle::{
    validate_bundle, BundleRecords, ClipBundle, Finding, FindingKind, ValidationReport, ANNOTATION_FILE, CAMERA_FILE,
    DEPTH_DIR, FRAMES_DIR, HANDS_FILE, MASKS_DIR,
};
pub use config::{IkConfig, PipelineConfig, RenderConfig, RobotConfig};
pub use manifest::{ClipEntry, ClipStatus, DatasetManifest, Exclusion, ExclusionReason, RunMode, TOOL_VERSION};

use crate::composite::{blend_with_bias, CompositeError, SceneFrame};
use crate::geometry::{CameraIntrinsics, Se3};
use crate::kinematics::{
    forward_kinematics, load_urdf, solve_ik, IkSolution, JointConfig, KinematicModel, KinematicsError, MeshResolver,
};
use crate::labels::{label_clip, LabelError, TrajectoryFrame};
use crate::render::{rasterize, Light, RgbdRender, RobotMeshes};
use crate::retarget::{retarget_pose, HandKeypoints};
use io::IoError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const COMPOSITES_DIR: &str = "composites";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("cannot load robot: {0}")]
    UrdfLoadFailure(String),
    #[error("bundle {} failed validation with {} finding(s)", .0.bundle.display(), .0.findings.len())]
    BundleInvalid(Box<ValidationReport>),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Robot model, tessellated visuals and placement, shared by all clips.
pub struct Robot {
    pub model: KinematicModel,
    meshes: RobotMeshes,
    pub world_from_root: Se3,
    /// Seed for the first frame of a clip and fallback seed after failures.
    pub home: JointConfig,
}

impl Robot {
    pub fn load(config: &PipelineConfig) -> Result<Self, PipelineError> {
        let fail =
            |e: &dyn std::fmt::Display| PipelineError::UrdfLoadFailure(format!("{}: {e}", config.urdf.display()));
        let model = load_urdf(&config.urdf)
            .and_then(|m| m.with_end_effector(&config.end_effector))
            .map_err(|e| fail(&e))?;
        let resolver = MeshResolver::new(config.mesh_roots.clone().into_iter().collect()).with_env_fallback();
        let meshes = RobotMeshes::load(&model, &resolver, config.robot.color).map_err(|e| fail(&e))?;

        let mut home = JointConfig::midpoint(&model);
        for (name, value) in &config.robot.joint_values {
            let slot = model.dof_slot(name).ok_or_else(|| {
                PipelineError::ConfigInvalid(format!("robot.joint_values: no movable joint `{name}`"))
            })?;
            home.set(slot, *value);
        }
        if !home.within_limits(&model) {
            return Err(PipelineError::ConfigInvalid(
                "robot.joint_values outside joint limits".into(),
            ));
        }
        Ok(Self {
            model,
            meshes,
            world_from_root: config.robot.base_pose,
            home,
        })
    }

    /// Builds a robot from an already parsed model (visuals resolved with `resolver`).
    pub fn from_model(
        model: KinematicModel,
        resolver: &MeshResolver,
        color: [f64; 3],
        world_from_root: Se3,
    ) -> Result<Self, PipelineError> {
        let meshes =
            RobotMeshes::load(&model, resolver, color).map_err(|e| PipelineError::UrdfLoadFailure(e.to_string()))?;
        let home = JointConfig::midpoint(&model);
        Ok(Self {
            model,
            meshes,
            world_from_root,
            home,
        })
    }

    pub fn render(
        &self,
        q: &JointConfig,
        camera_from_root: &Se3,
        intrinsics: CameraIntrinsics,
        light: Light,
        near_plane: f64,
    ) -> Result<RgbdRender, PipelineError> {
        let poses = forward_kinematics(&self.model, q)?;
        let mut scene = self.meshes.scene(&poses, camera_from_root, intrinsics, light);
        scene.near = near_plane;
        Ok(rasterize(&scene))
    }
}

struct SolvedFrame {
    index: u64,
    config: JointConfig,
    camera_from_root: Se3,
    intrinsics: CameraIntrinsics,
    trajectory: TrajectoryFrame,
}

fn solve_with_fallback(
    robot: &Robot,
    target: &Se3,
    seed: &JointConfig,
    config: &PipelineConfig,
) -> Result<IkSolution, PipelineError> {
    let params = config.ik.params();
    let first = solve_ik(&robot.model, target, seed, &params)?;
    if first.residual_pos <= config.ik.max_residual_pos || seed == &robot.home {
        return Ok(first);
    }
    let retry = solve_ik(&robot.model, target, &robot.home, &params)?;
    Ok(if retry.residual_pos < first.residual_pos {
        retry
    } else {
        first
    })
}

fn clip_dir(config: &PipelineConfig, bundle: &ClipBundle) -> PathBuf {
    config.output_dir.join(bundle.name())
}

/// Runs one clip end to end and returns its manifest entry.
///
/// Fails with [`PipelineError::BundleInvalid`] when validation finds
/// problems inside the span. Per-frame problems (degenerate hands,
/// unreachable poses) exclude the frame instead of failing the clip.
pub fn process_clip(
    bundle: &ClipBundle,
    robot: &Robot,
    config: &PipelineConfig,
    mode: RunMode,
) -> Result<ClipEntry, PipelineError> {
    let (report, records) = bundle::validate_with_records(bundle);
    if !report.ok() {
        return Err(PipelineError::BundleInvalid(Box::new(report)));
    }
    let span = report.span.clone().expect("valid bundles have a span");
    let present: BTreeSet<u64> = report.frames.iter().copied().collect();
    let root_from_world = robot.world_from_root.inverse();

    let mut excluded = Vec::new();
    let mut solved = Vec::new();
    let mut seed = robot.home.clone();
    for frame in span.frames() {
        let hand = &records.hands[&(frame, span.dominant_hand)];
        let camera = &records.cameras[&frame];

        let pose = HandKeypoints::from_slice(&hand.keypoints, hand.side).and_then(|kp| retarget_pose(&kp));
        let gripper = match pose {
            Ok(g) => g.pose,
            Err(e) => {
                excluded.push(Exclusion {
                    frame,
                    reason: ExclusionReason::DegenerateHand,
                    detail: Some(e.to_string()),
                });
                continue;
            }
        };

        let target = root_from_world.compose(&camera.world_from_camera).compose(&gripper);
        let sol = solve_with_fallback(robot, &target, &seed, config)?;
        if sol.residual_pos > config.ik.max_residual_pos {
            excluded.push(Exclusion {
                frame,
                reason: ExclusionReason::IkUnreachable,
                detail: Some(format!(
                    "residual {:.4} m, {:.4} rad",
                    sol.residual_pos, sol.residual_rot
                )),
            });
            continue;
        }
        seed = sol.config.clone();
        solved.push(SolvedFrame {
            index: frame,
            config: sol.config,
            camera_from_root: camera.world_from_camera.inverse().compose(&robot.world_from_root),
            intrinsics: camera.intrinsics,
            trajectory: TrajectoryFrame {
                index: frame,
                gripper_pose_cam: gripper,
                world_from_camera: camera.world_from_camera,
                timestamp: camera.timestamp,
            },
        });
    }

    let out_dir = clip_dir(config, bundle);
    let mut composites_written = 0;
    if mode == RunMode::Composite {
        let written: Result<Vec<()>, PipelineError> = solved
            .par_iter()
            .map(|f| composite_frame(bundle, robot, config, f, &out_dir))
            .collect();
        composites_written = written?.len() as u64;
    }

    let trajectory: Vec<TrajectoryFrame> = solved.iter().map(|f| f.trajectory).collect();
    let labels = label_clip(&trajectory, &span.action, &config.lookahead_policy())?;
    io::write_atomic(&out_dir.join(LABELS_FILE), io::to_jsonl(&labels).as_bytes())?;

    let labelled: HashSet<u64> = labels.iter().map(|l| l.frame_index).collect();
    let k = config.lookahead_policy().lookahead(&span.action)?;
    for f in &solved {
        if !labelled.contains(&f.index) {
            excluded.push(Exclusion {
                frame: f.index,
                reason: ExclusionReason::LookaheadUnavailable,
                detail: None,
            });
        }
    }
    excluded.sort_by_key(|e| e.frame);

    let mut warnings = Vec::new();
    if labels.is_empty() && span.len() <= k as u64 {
        warnings.push(format!(
            "span of {} frames is not longer than look-ahead {k}",
            span.len()
        ));
    }

    Ok(ClipEntry {
        clip: bundle.name(),
        status: ClipStatus::Ok,
        error: None,
        video_id: Some(span.video_id.clone()),
        action: Some(span.action.clone()),
        span: Some([span.start_frame, span.end_frame]),
        total_frames: present.len() as u64,
        out_of_span: present.iter().filter(|f| !span.contains(**f)).count() as u64,
        composites_written,
        labels_emitted: labels.len() as u64,
        excluded,
        findings: Vec::new(),
        warnings,
        config_digest: config.digest.clone(),
        tool_version: TOOL_VERSION.to_string(),
    })
}

fn composite_frame(
    bundle: &ClipBundle,
    robot: &Robot,
    config: &PipelineConfig,
    frame: &SolvedFrame,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    let render = robot.render(
        &frame.config,
        &frame.camera_from_root,
        frame.intrinsics,
        config.light,
        config.render.near_plane,
    )?;
    let rgb = io::load_png_rgb(&bundle.frame_path(frame.index))?;
    let depth = io::load_pfm(&bundle.depth_path(frame.index))?;
    let scene = SceneFrame::new(rgb, depth)?;
    let out = blend_with_bias(&scene, &render, config.depth_bias as f32)?;
    let path = out_dir
        .join(COMPOSITES_DIR)
        .join(io::frame_file_name(frame.index, "png"));
    io::write_atomic(&path, &io::encode_png(&out.rgb))?;
    Ok(())
}

/// Entry for a clip that could not be processed; every present in-span frame
/// is excluded so the counts still reconcile.
fn failed_entry(bundle: &ClipBundle, config: &PipelineConfig, err: &PipelineError) -> ClipEntry {
    let report = match err {
        PipelineError::BundleInvalid(r) => (**r).clone(),
        _ => validate_bundle(bundle),
    };
    let reason = if report.ok() {
        ExclusionReason::ClipError
    } else {
        ExclusionReason::MissingInput
    };
    let in_span = |f: u64| report.span.as_ref().is_none_or(|s| s.contains(f));
    let excluded: Vec<Exclusion> = report
        .frames
        .iter()
        .filter(|f| in_span(**f))
        .map(|&frame| Exclusion {
            frame,
            reason,
            detail: None,
        })
        .collect();
    ClipEntry {
        clip: bundle.name(),
        status: ClipStatus::Failed,
        error: Some(err.to_string()),
        video_id: report.span.as_ref().map(|s| s.video_id.clone()),
        action: report.span.as_ref().map(|s| s.action.clone()),
        span: report.span.as_ref().map(|s| [s.start_frame, s.end_frame]),
        total_frames: report.frames.len() as u64,
        out_of_span: (report.frames.len() - excluded.len()) as u64,
        composites_written: 0,
        labels_emitted: 0,
        excluded,
        findings: report.findings,
        warnings: Vec::new(),
        config_digest: config.digest.clone(),
        tool_version: TOOL_VERSION.to_string(),
    }
}

/// Processes every clip and writes `manifest.json` into the output directory.
///
/// A failing clip is recorded in the manifest and does not stop the others.
pub fn run(config: &PipelineConfig, bundles: &[ClipBundle], mode: RunMode) -> Result<DatasetManifest, PipelineError> {
    config.validate()?;
    let mut names = HashSet::new();
    for b in bundles {
        if !names.insert(b.name()) {
            return Err(PipelineError::ConfigInvalid(format!(
                "two clips share the name `{}`",
                b.name()
            )));
        }
    }
    let robot = Robot::load(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;

    let clips: Vec<ClipEntry> = pool.install(|| {
        bundles
            .par_iter()
            .map(|b| match process_clip(b, &robot, config, mode) {
                Ok(entry) => entry,
                Err(e) => {
                    log::warn!("clip {} failed: {e}", b.name());
                    failed_entry(b, config, &e)
                }
            })
            .collect()
    });

    let manifest = DatasetManifest { mode, clips };
    io::write_atomic(&config.output_dir.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    Ok(manifest)
}
