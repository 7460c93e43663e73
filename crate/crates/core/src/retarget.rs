//! Hand keypoints to gripper pose.
//!
//! Keypoints follow the 21-joint MANO ordering: `0` wrist, `1..=4` thumb
//! (base to tip), then index `5..=8`, middle `9..=12`, ring `13..=16` and
//! little finger `17..=20`, each listed base to tip. All positions are in
//! the camera frame, in meters.
//!
//! The gripper frame is built from the palm:
//!
//! * origin: mean of the thumb base and the four finger bases,
//! * z: palm normal `(kp5 - kp0) × (kp17 - kp0)`,
//! * x: thumb base towards the centroid of the four finger bases,
//! * y: `z × x` for a right hand, `-(z × x)` for a left hand.
//!
//! `x` and `z` are generally not perpendicular. `z` is kept exact and `x`
//! is re-derived as `y × z`, so the frame is a proper rotation for both
//! hands. The same frame drives two- and three-finger grippers.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Rotation3, Se3};

pub const KEYPOINT_COUNT: usize = 21;

pub const WRIST: usize = 0;
pub const THUMB_BASE: usize = 1;
pub const FINGER_BASES: [usize; 4] = [5, 9, 13, 17];

/// Accepted range for the largest distance between any two keypoints, meters.
pub const MIN_HAND_SPAN: f64 = 0.03;
pub const MAX_HAND_SPAN: f64 = 0.40;

/// Smallest admissible palm-normal magnitude, m².
pub const MIN_PALM_NORMAL: f64 = 1e-8;

/// Largest admissible `|x̂ · ẑ|`.
pub const MAX_AXIS_ALIGNMENT: f64 = 0.999;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetargetError {
    #[error("keypoint {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("expected {KEYPOINT_COUNT} keypoints, got {0}")]
    WrongCount(usize),
    #[error("hand span {0:.4} m outside the plausible range [{MIN_HAND_SPAN}, {MAX_HAND_SPAN}] m")]
    ImplausibleSpan(f64),
    #[error("degenerate hand: {0}")]
    DegenerateHand(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandSide {
    Left,
    Right,
}

impl HandSide {
    /// Sign applied to `z × x` when forming the y axis.
    pub fn sign(self) -> f64 {
        match self {
            HandSide::Right => 1.0,
            HandSide::Left => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            HandSide::Right => HandSide::Left,
            HandSide::Left => HandSide::Right,
        }
    }
}

/// 21 validated keypoints of one hand.
#[derive(Debug, Clone, PartialEq)]
pub struct HandKeypoints {
    points: [Vector3<f64>; KEYPOINT_COUNT],
    side: HandSide,
}

impl HandKeypoints {
    pub fn new(points: [Vector3<f64>; KEYPOINT_COUNT], side: HandSide) -> Result<Self, RetargetError> {
        if let Some(i) = points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(RetargetError::NonFinite(i));
        }
        let span = max_pairwise_distance(&points);
        if !(MIN_HAND_SPAN..=MAX_HAND_SPAN).contains(&span) {
            return Err(RetargetError::ImplausibleSpan(span));
        }
        Ok(Self { points, side })
    }

    pub fn from_slice(points: &[[f64; 3]], side: HandSide) -> Result<Self, RetargetError> {
        if points.len() != KEYPOINT_COUNT {
            return Err(RetargetError::WrongCount(points.len()));
        }
        let mut out = [Vector3::zeros(); KEYPOINT_COUNT];
        for (dst, src) in out.iter_mut().zip(points) {
            *dst = Vector3::from(*src);
        }
        Self::new(out, side)
    }

    pub fn points(&self) -> &[Vector3<f64>; KEYPOINT_COUNT] {
        &self.points
    }

    pub fn side(&self) -> HandSide {
        self.side
    }

    pub fn get(&self, i: usize) -> Vector3<f64> {
        self.points[i]
    }

    /// Applies a rigid transform to every keypoint.
    pub fn transformed(&self, t: &Se3) -> Result<Self, RetargetError> {
        Self::new(self.points.map(|p| t.transform_point(&p)), self.side)
    }

    pub fn span(&self) -> f64 {
        max_pairwise_distance(&self.points)
    }
}

fn max_pairwise_distance(points: &[Vector3<f64>]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((a - b).norm());
        }
    }
    best
}

/// Raw, unnormalized gripper axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperAxes {
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub z: Vector3<f64>,
}

/// Pose of the retargeted gripper in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperPose {
    pub pose: Se3,
}

/// Palm center: mean of the thumb base and the four finger bases.
pub fn gripper_center(kp: &HandKeypoints) -> Vector3<f64> {
    let sum = FINGER_BASES.iter().fold(kp.get(THUMB_BASE), |acc, &i| acc + kp.get(i));
    sum / 5.0
}

pub fn gripper_axes(kp: &HandKeypoints) -> Result<GripperAxes, RetargetError> {
    let wrist = kp.get(WRIST);
    let z = (kp.get(5) - wrist).cross(&(kp.get(17) - wrist));
    if z.norm() < MIN_PALM_NORMAL {
        return Err(RetargetError::DegenerateHand("palm landmarks are collinear"));
    }

    let finger_centroid = FINGER_BASES.iter().fold(Vector3::zeros(), |acc, &i| acc + kp.get(i)) / 4.0;
    let x = finger_centroid - kp.get(THUMB_BASE);
    let x_norm = x.norm();
    if x_norm < MIN_PALM_NORMAL || (x.dot(&z) / (x_norm * z.norm())).abs() > MAX_AXIS_ALIGNMENT {
        return Err(RetargetError::DegenerateHand("thumb axis parallel to palm normal"));
    }

    let y = z.cross(&x) * kp.side().sign();
    Ok(GripperAxes { x, y, z })
}

pub fn retarget_pose(kp: &HandKeypoints) -> Result<GripperPose, RetargetError> {
    let axes = gripper_axes(kp)?;
    let z = axes.z.normalize();
    let x_hat = axes.x.normalize();
    let y = (z.cross(&x_hat) * kp.side().sign()).normalize();
    let x = y.cross(&z);
    let rotation = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[x, y, z]));
    Ok(GripperPose {
        pose: Se3::new(rotation, gripper_center(kp)),
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    /// Fixture with a planar palm in the z = 0 plane.
    pub(crate) fn planar_hand(side: HandSide) -> HandKeypoints {
        let mut pts = [Vector3::new(0.03, 0.03, 0.01); KEYPOINT_COUNT];
        pts[0] = Vector3::zeros();
        pts[1] = Vector3::new(0.02, 0.01, 0.0);
        pts[5] = Vector3::new(0.08, 0.0, 0.0);
        pts[9] = Vector3::new(0.09, 0.02, 0.0);
        pts[13] = Vector3::new(0.07, 0.04, 0.0);
        pts[17] = Vector3::new(0.0, 0.06, 0.0);
        HandKeypoints::new(pts, side).unwrap()
    }

    #[test]
    fn center_of_fixture() {
        let c = gripper_center(&planar_hand(HandSide::Right));
        assert_relative_eq!(c, Vector3::new(0.052, 0.026, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn raw_axes_of_fixture() {
        let right = gripper_axes(&planar_hand(HandSide::Right)).unwrap();
        assert_relative_eq!(right.z, Vector3::new(0.0, 0.0, 0.0048), epsilon = 1e-15);
        assert_relative_eq!(right.x, Vector3::new(0.04, 0.02, 0.0), epsilon = 1e-15);
        let left = gripper_axes(&planar_hand(HandSide::Left)).unwrap();
        assert_relative_eq!(left.y, -right.y, epsilon = 1e-18);
    }

    #[test]
    fn pose_of_fixture() {
        let pose = retarget_pose(&planar_hand(HandSide::Right)).unwrap().pose;
        let r = pose.rotation;
        assert_relative_eq!(r.column(0), Vector3::new(0.894, 0.447, 0.0), epsilon = 1e-3);
        assert_relative_eq!(r.column(1), Vector3::new(-0.447, 0.894, 0.0), epsilon = 1e-3);
        assert_relative_eq!(r.column(2), Vector3::z(), epsilon = 1e-15);
        assert_relative_eq!(pose.translation, Vector3::new(0.052, 0.026, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn left_hand_stays_right_handed() {
        let pose = retarget_pose(&planar_hand(HandSide::Left)).unwrap().pose;
        assert!((pose.rotation.determinant() - 1.0).abs() < 1e-12);
        assert_relative_eq!(
            pose.rotation.column(1),
            Vector3::new(0.447, -0.894, 0.0),
            epsilon = 1e-3
        );
    }

    #[test]
    fn collapsed_hand_is_rejected() {
        let pts = [Vector3::new(0.1, 0.2, 0.5); KEYPOINT_COUNT];
        assert!(matches!(
            HandKeypoints::new(pts, HandSide::Right),
            Err(RetargetError::ImplausibleSpan(_))
        ));
    }

    #[test]
    fn collinear_palm_is_degenerate() {
        let mut pts = *planar_hand(HandSide::Right).points();
        pts[17] = Vector3::new(0.16, 0.0, 0.0);
        let kp = HandKeypoints::new(pts, HandSide::Right).unwrap();
        assert_eq!(
            gripper_axes(&kp),
            Err(RetargetError::DegenerateHand("palm landmarks are collinear"))
        );
    }

    #[test]
    fn thumb_along_normal_is_degenerate() {
        let mut pts = *planar_hand(HandSide::Right).points();
        // finger centroid is (0.06, 0.03, 0); put the thumb base straight below it
        pts[1] = Vector3::new(0.06, 0.03, -0.05);
        let kp = HandKeypoints::new(pts, HandSide::Right).unwrap();
        assert!(matches!(gripper_axes(&kp), Err(RetargetError::DegenerateHand(_))));
    }

    #[test]
    fn rejects_non_finite_and_wrong_count() {
        let mut pts = *planar_hand(HandSide::Right).points();
        pts[3].y = f64::NAN;
        assert_eq!(
            HandKeypoints::new(pts, HandSide::Right),
            Err(RetargetError::NonFinite(3))
        );
        assert_eq!(
            HandKeypoints::from_slice(&[[0.0; 3]; 20], HandSide::Left),
            Err(RetargetError::WrongCount(20))
        );
    }

    #[test]
    fn scaling_about_center_keeps_pose() {
        let kp = planar_hand(HandSide::Right);
        let c = gripper_center(&kp);
        let scaled = HandKeypoints::new(kp.points().map(|p| c + (p - c) * 1.7), HandSide::Right).unwrap();
        let a = retarget_pose(&kp).unwrap().pose;
        let b = retarget_pose(&scaled).unwrap().pose;
        assert!((a.to_matrix() - b.to_matrix()).amax() < 1e-12);
    }
}
