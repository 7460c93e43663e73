//! Depth-aware blending of the actor-erased scene with the robot render.
//!
//! Per pixel, the nearer source wins. Scene depth that is NaN, zero or
//! negative counts as infinitely far, so holes in the depth estimate never
//! hide the robot. On an exact tie the scene wins. There is no feathering
//! at the robot silhouette.

use image::RgbImage;
use thiserror::Error;

use crate::render::{DepthMap, Mask, RgbdRender};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompositeError {
    #[error("dimension mismatch: {what} is {got:?}, expected {expected:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (u32, u32),
        got: (u32, u32),
    },
}

/// Inpainted frame plus its metric depth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFrame {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    /// Actor mask from segmentation, kept for validation only.
    pub body_mask: Option<Mask>,
}

impl SceneFrame {
    pub fn new(rgb: RgbImage, depth: DepthMap) -> Result<Self, CompositeError> {
        let expected = rgb.dimensions();
        let got = (depth.width(), depth.height());
        if expected != got {
            return Err(CompositeError::DimensionMismatch {
                what: "scene depth",
                expected,
                got,
            });
        }
        Ok(Self {
            rgb,
            depth,
            body_mask: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeFrame {
    pub rgb: RgbImage,
    /// Pixels where the robot won the depth test.
    pub robot_mask: Mask,
}

fn effective_scene_depth(d: f32) -> f32 {
    if d.is_nan() || d <= 0.0 {
        f32::INFINITY
    } else {
        d
    }
}

pub fn blend(scene: &SceneFrame, robot: &RgbdRender) -> Result<CompositeFrame, CompositeError> {
    blend_with_bias(scene, robot, 0.0)
}

/// Like [`blend`], with `bias` meters subtracted from robot depth before the
/// comparison so a gripper touching a surface is not lost to z-fighting.
pub fn blend_with_bias(scene: &SceneFrame, robot: &RgbdRender, bias: f32) -> Result<CompositeFrame, CompositeError> {
    let expected = scene.rgb.dimensions();
    let checks = [
        ("scene depth", (scene.depth.width(), scene.depth.height())),
        ("robot rgb", robot.rgb.dimensions()),
        ("robot depth", (robot.depth.width(), robot.depth.height())),
        ("robot coverage", (robot.coverage.width(), robot.coverage.height())),
    ];
    for (what, got) in checks {
        if got != expected {
            return Err(CompositeError::DimensionMismatch { what, expected, got });
        }
    }

    let (w, h) = expected;
    let mut rgb = scene.rgb.clone();
    let mut robot_mask = Mask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if !robot.coverage.get(x, y) {
                continue;
            }
            if robot.depth.get(x, y) - bias < effective_scene_depth(scene.depth.get(x, y)) {
                rgb.put_pixel(x, y, *robot.rgb.get_pixel(x, y));
                robot_mask.set(x, y, true);
            }
        }
    }
    Ok(CompositeFrame { rgb, robot_mask })
}
