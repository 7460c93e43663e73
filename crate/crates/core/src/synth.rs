//! Synthetic clip bundles for tests, benchmarks and demos.
//!
//! The robot is a planar two-link arm (links of 0.5 m, both joints about z)
//! drawn with box visuals. A camera 2 m above the arm plane looks straight
//! down. Hand keypoints are built around forward-kinematics poses of the arm,
//! so every retargeted gripper pose is exactly reachable.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, Vector3};

use crate::clips::{write_annotations, SubAction, TherbligAnnotation};
use crate::geometry::{CameraIntrinsics, Rotation3, Se3};
use crate::kinematics::{end_effector_pose, parse_urdf, JointConfig, KinematicModel};
use crate::pipeline::io::{self, CameraRecord, HandRecord, IoError};
use crate::pipeline::{ClipBundle, ANNOTATION_FILE, CAMERA_FILE, HANDS_FILE};
use crate::render::DepthMap;
use crate::retarget::{HandSide, KEYPOINT_COUNT};

pub const PLANAR_URDF: &str = r#"<?xml version="1.0"?>
<robot name="planar">
  <material name="grey"><color rgba="0.6 0.6 0.6 1"/></material>
  <material name="orange"><color rgba="0.9 0.5 0.1 1"/></material>
  <link name="base">
    <visual><geometry><box size="0.12 0.12 0.06"/></geometry><material name="grey"/></visual>
  </link>
  <link name="upper">
    <visual>
      <origin xyz="0.25 0 0"/>
      <geometry><box size="0.5 0.06 0.06"/></geometry>
      <material name="orange"/>
    </visual>
  </link>
  <link name="lower">
    <visual>
      <origin xyz="0.25 0 0"/>
      <geometry><box size="0.5 0.05 0.05"/></geometry>
      <material name="orange"/>
    </visual>
  </link>
  <link name="tool">
    <visual><geometry><sphere radius="0.04"/></geometry><material name="grey"/></visual>
  </link>
  <joint name="shoulder" type="revolute">
    <parent link="base"/><child link="upper"/>
    <axis xyz="0 0 1"/>
    <limit lower="-3.14159" upper="3.14159" effort="10" velocity="1"/>
  </joint>
  <joint name="elbow" type="revolute">
    <parent link="upper"/><child link="lower"/>
    <origin xyz="0.5 0 0"/>
    <axis xyz="0 0 1"/>
    <limit lower="-3.14159" upper="3.14159" effort="10" velocity="1"/>
  </joint>
  <joint name="tip" type="fixed">
    <parent link="lower"/><child link="tool"/>
    <origin xyz="0.5 0 0"/>
  </joint>
</robot>
"#;

pub const URDF_FILE: &str = "planar.urdf";
pub const CONFIG_FILE: &str = "embodiswap.toml";

/// Scene depth behind the arm, meters.
pub const FLOOR_DEPTH: f32 = 2.1;
/// Depth of the occluding patch, nearer than the arm's top faces.
pub const OCCLUDER_DEPTH: f32 = 1.9;
/// Pixel rectangle `[x0, x1) × [y0, y1)` of the occluder.
pub const OCCLUDER: [u32; 4] = [52, 64, 32, 44];

pub fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(80.0, 80.0, 48.0, 36.0, 96, 72).expect("valid intrinsics")
}

/// Camera at (0.5, 0.5, 2) looking down -z with image y along world -y.
pub fn world_from_camera() -> Se3 {
    let r = Rotation3::from_matrix(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))).expect("rotation");
    Se3::new(r, Vector3::new(0.5, 0.5, 2.0))
}

pub fn planar_model() -> KinematicModel {
    parse_urdf(PLANAR_URDF).expect("fixture URDF parses")
}

/// Right-hand keypoints whose retargeted gripper frame is the identity.
///
/// Thumb base at -x, finger bases in a row at +x, palm in the z = 0 plane
/// with the normal along +z, palm center at the origin.
pub fn canonical_keypoints() -> [Vector3<f64>; KEYPOINT_COUNT] {
    let mut kp = [Vector3::zeros(); KEYPOINT_COUNT];
    kp[0] = Vector3::new(-0.07, 0.0, 0.0);
    kp[1] = Vector3::new(-0.08, 0.0, 0.0);
    for j in 1..4 {
        kp[1 + j] = kp[1] + Vector3::new(-0.01, -0.015, 0.0) * j as f64;
    }
    for (n, &base) in [5usize, 9, 13, 17].iter().enumerate() {
        kp[base] = Vector3::new(0.02, -0.03 + 0.02 * n as f64, 0.0);
        for j in 1..4 {
            kp[base + j] = kp[base] + Vector3::new(0.02 * j as f64, 0.0, 0.0);
        }
    }
    kp
}

/// Keypoints that retarget to `gripper_pose_cam`.
pub fn keypoints_for(gripper_pose_cam: &Se3) -> Vec<[f64; 3]> {
    canonical_keypoints()
        .iter()
        .map(|p| {
            let q = gripper_pose_cam.transform_point(p);
            [q.x, q.y, q.z]
        })
        .collect()
}

/// Description of one synthetic clip.
#[derive(Debug, Clone)]
pub struct SynthClip {
    pub video_id: String,
    pub action: String,
    /// Shoulder and elbow angles per frame; frames are numbered from 0.
    pub joint_values: Vec<[f64; 2]>,
    /// Frame whose keypoints collapse onto a single point.
    pub degenerate_frame: Option<u64>,
}

impl Default for SynthClip {
    fn default() -> Self {
        Self {
            video_id: "synth".into(),
            action: "open".into(),
            joint_values: vec![[0.2, 0.7], [0.3, 0.6], [0.4, 0.45]],
            degenerate_frame: None,
        }
    }
}

fn scene_rgb(w: u32, h: u32, frame: u64) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let check = ((x / 8 + y / 8) % 2) as u8 * 40;
        Rgb([(x * 255 / w) as u8, (y * 255 / h) as u8, 90 + check + frame as u8])
    })
}

fn scene_depth(w: u32, h: u32) -> DepthMap {
    let mut d = DepthMap::filled(w, h, FLOOR_DEPTH);
    let [x0, x1, y0, y1] = OCCLUDER;
    for y in y0..y1 {
        for x in x0..x1 {
            d.set(x, y, OCCLUDER_DEPTH);
        }
    }
    d
}

/// Writes the robot description into `dir` and returns the URDF path.
pub fn write_robot(dir: &Path) -> Result<PathBuf, IoError> {
    let path = dir.join(URDF_FILE);
    io::write_atomic(&path, PLANAR_URDF.as_bytes())?;
    Ok(path)
}

/// Writes a pipeline config using the planar robot, look-ahead 1 for `open`.
/// `extra` is appended verbatim.
pub fn write_config(dir: &Path, urdf: &Path, output_dir: &Path, extra: &str) -> Result<PathBuf, IoError> {
    let text = format!(
        "urdf = {:?}\nend_effector = \"tool\"\noutput_dir = {:?}\n{extra}\n[lookahead]\nopen = 1\n",
        urdf.display().to_string(),
        output_dir.display().to_string(),
    );
    let path = dir.join(CONFIG_FILE);
    io::write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Writes a complete bundle for `clip` into `dir`.
pub fn write_clip(dir: &Path, clip: &SynthClip) -> Result<ClipBundle, IoError> {
    let bundle = ClipBundle::new(dir);
    let model = planar_model();
    let k = intrinsics();
    let w_c = world_from_camera();
    let camera_from_world = w_c.inverse();
    let n = clip.joint_values.len() as u64;

    let annotation = TherbligAnnotation {
        video_id: clip.video_id.clone(),
        action: clip.action.clone(),
        dominant_hand: HandSide::Right,
        sub_actions: vec![SubAction {
            name: clip.action.clone(),
            start_frame: 0,
            end_frame: n,
            used: true,
        }],
    };
    io::write_atomic(&dir.join(ANNOTATION_FILE), write_annotations(&[annotation]).as_bytes())?;

    let mut hands = Vec::new();
    let mut cameras = Vec::new();
    for (frame, q) in (0u64..).zip(&clip.joint_values) {
        let config = JointConfig::new(&model, q.to_vec()).expect("two joints");
        let ee = end_effector_pose(&model, &config).expect("fk");
        let gripper_cam = camera_from_world.compose(&ee);
        let mut keypoints = keypoints_for(&gripper_cam);
        if clip.degenerate_frame == Some(frame) {
            let p = keypoints[0];
            keypoints.iter_mut().for_each(|k| *k = p);
        }
        hands.push(HandRecord {
            frame,
            side: HandSide::Right,
            keypoints,
        });
        cameras.push(CameraRecord {
            frame,
            timestamp: frame as f64 / 30.0,
            intrinsics: k,
            world_from_camera: w_c,
        });
        io::write_atomic(
            &bundle.frame_path(frame),
            &io::encode_png(&scene_rgb(k.width, k.height, frame)),
        )?;
        io::write_atomic(
            &bundle.depth_path(frame),
            &io::write_pfm(&scene_depth(k.width, k.height)),
        )?;
    }
    io::write_atomic(&dir.join(HANDS_FILE), io::to_jsonl(&hands).as_bytes())?;
    io::write_atomic(&dir.join(CAMERA_FILE), io::to_jsonl(&cameras).as_bytes())?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::retarget::{retarget_pose, HandKeypoints};

    #[test]
    fn canonical_hand_retargets_to_identity() {
        let kp = HandKeypoints::new(canonical_keypoints(), HandSide::Right).unwrap();
        let pose = retarget_pose(&kp).unwrap().pose;
        assert_relative_eq!(*pose.rotation.matrix(), Matrix3::identity(), epsilon = 1e-15);
        assert_relative_eq!(pose.translation, Vector3::zeros(), epsilon = 1e-15);
    }

    #[test]
    fn keypoints_follow_pose() {
        let target = Se3::new(Rotation3::from_rpy(0.3, -0.2, 1.1), Vector3::new(0.1, -0.2, 1.5));
        let kp = HandKeypoints::from_slice(&keypoints_for(&target), HandSide::Right).unwrap();
        let pose = retarget_pose(&kp).unwrap().pose;
        let (dt, dr) = pose.distance(&target);
        assert!(dt < 1e-12 && dr < 1e-12);
    }
}
