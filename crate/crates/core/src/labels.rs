//! Relative end-effector targets.
//!
//! A label pairs frame `t` with frame `t + k` and stores the world-frame
//! gripper motion between them, expressed in the gripper frame at `t`:
//! `T_rel = W(t)⁻¹ · W(t + k)` where `W = world_from_camera · gripper_pose_cam`.
//! Going through the world frame removes camera ego-motion.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AxisAngle, Se3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("frame {frame} + look-ahead {k} is outside the clip")]
    LookaheadOutOfRange { frame: u64, k: u32 },
    #[error("no look-ahead configured for action class `{0}`")]
    UnknownActionClass(String),
    #[error("look-ahead for `{0}` must be at least one frame")]
    ZeroLookahead(String),
    #[error("frame indices must be strictly increasing ({prev} then {next})")]
    NonIncreasingIndex { prev: u64, next: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryFrame {
    pub index: u64,
    pub gripper_pose_cam: Se3,
    pub world_from_camera: Se3,
    /// Seconds.
    pub timestamp: f64,
}

impl TrajectoryFrame {
    pub fn to_world(&self) -> Se3 {
        to_world(self)
    }
}

pub fn to_world(frame: &TrajectoryFrame) -> Se3 {
    frame.world_from_camera.compose(&frame.gripper_pose_cam)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameConvention {
    CurrentGripper,
}

/// Six-number relative pose: translation (m) and rotation vector (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelPoseLabel {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    #[serde(rename = "k")]
    pub lookahead_k: u32,
    #[serde(rename = "t")]
    pub translation: [f64; 3],
    #[serde(rename = "r")]
    pub rotation: [f64; 3],
    #[serde(rename = "convention")]
    pub frame_convention: FrameConvention,
}

impl RelPoseLabel {
    pub fn to_se3(&self) -> Se3 {
        Se3::new(
            AxisAngle(Vector3::from(self.rotation)).to_rotation(),
            Vector3::from(self.translation),
        )
    }
}

/// Look-ahead in frames per action class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LookaheadPolicy(pub BTreeMap<String, u32>);

impl Default for LookaheadPolicy {
    /// Quick actions look 8 frames ahead, slow ones 16.
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for quick in ["open", "close", "cut"] {
            m.insert(quick.to_string(), 8);
        }
        for slow in ["pour", "place"] {
            m.insert(slow.to_string(), 16);
        }
        Self(m)
    }
}

impl LookaheadPolicy {
    pub fn lookahead(&self, action_class: &str) -> Result<u32, LabelError> {
        match self.0.get(action_class) {
            Some(0) => Err(LabelError::ZeroLookahead(action_class.to_string())),
            Some(k) => Ok(*k),
            None => Err(LabelError::UnknownActionClass(action_class.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        match self.0.iter().find(|(_, k)| **k == 0) {
            Some((name, _)) => Err(LabelError::ZeroLookahead(name.clone())),
            None => Ok(()),
        }
    }
}

fn check_order(traj: &[TrajectoryFrame]) -> Result<(), LabelError> {
    for pair in traj.windows(2) {
        if pair[1].index <= pair[0].index {
            return Err(LabelError::NonIncreasingIndex {
                prev: pair[0].index,
                next: pair[1].index,
            });
        }
    }
    Ok(())
}

fn find(traj: &[TrajectoryFrame], index: u64) -> Option<&TrajectoryFrame> {
    traj.binary_search_by_key(&index, |f| f.index).ok().map(|i| &traj[i])
}

fn encode(frame_index: u64, k: u32, rel: &Se3) -> RelPoseLabel {
    RelPoseLabel {
        frame_index,
        lookahead_k: k,
        translation: [rel.translation.x, rel.translation.y, rel.translation.z],
        rotation: rel.rotation.to_axis_angle().to_array(),
        frame_convention: FrameConvention::CurrentGripper,
    }
}

/// Label for the frame with index `t`, looking `k` frames ahead.
///
/// Frames are matched by index, not position; a missing frame at either end
/// yields [`LabelError::LookaheadOutOfRange`].
pub fn make_label(traj: &[TrajectoryFrame], t: u64, k: u32) -> Result<RelPoseLabel, LabelError> {
    let out_of_range = || LabelError::LookaheadOutOfRange { frame: t, k };
    let now = find(traj, t).ok_or_else(out_of_range)?;
    let future = find(traj, t + k as u64).ok_or_else(out_of_range)?;
    Ok(encode(t, k, &now.to_world().relative(&future.to_world())))
}

/// One label for every frame whose look-ahead partner is present.
///
/// Frames dropped upstream (unreachable or degenerate) are simply absent from
/// `traj`; labels that would need them are skipped.
pub fn label_clip(
    traj: &[TrajectoryFrame],
    action_class: &str,
    policy: &LookaheadPolicy,
) -> Result<Vec<RelPoseLabel>, LabelError> {
    let k = policy.lookahead(action_class)?;
    check_order(traj)?;
    Ok(traj
        .iter()
        .filter_map(|f| {
            let future = find(traj, f.index + k as u64)?;
            Some(encode(f.index, k, &f.to_world().relative(&future.to_world())))
        })
        .collect())
}
