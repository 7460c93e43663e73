//! Clip input bundles and their validation.
//!
//! ```text
//! <clip>/
//!   annotation.json     one Therblig annotation (a single JSON Lines record)
//!   hands.jsonl         {"frame", "side", "keypoints": [[x, y, z] × 21]}
//!   camera.jsonl        {"frame", "timestamp", "intrinsics", "world_from_camera": [16]}
//!   frames/NNNNNN.png   actor-erased RGB
//!   depth/NNNNNN.pfm    metric scene depth
//!   masks/NNNNNN.png    optional actor mask
//! ```
//!
//! Only frames inside the annotated span must be complete.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::io::{self, CameraRecord, HandRecord};
use crate::clips::{parse_annotations, slice_clip, ClipSpan, TherbligAnnotation};
use crate::geometry::CameraIntrinsics;
use crate::retarget::HandSide;

pub const ANNOTATION_FILE: &str = "annotation.json";
pub const HANDS_FILE: &str = "hands.jsonl";
pub const CAMERA_FILE: &str = "camera.jsonl";
pub const FRAMES_DIR: &str = "frames";
pub const DEPTH_DIR: &str = "depth";
pub const MASKS_DIR: &str = "masks";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    MissingBundle,
    MissingAnnotation,
    InvalidAnnotation,
    MissingFrame,
    CorruptFrame,
    MissingDepth,
    CorruptDepth,
    MissingHand,
    CorruptHand,
    MissingCamera,
    CorruptCamera,
    CorruptMask,
    DimensionMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<u64>,
    pub kind: FindingKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub bundle: PathBuf,
    pub span: Option<ClipSpan>,
    /// Frame indices present in `frames/`.
    pub frames: Vec<u64>,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Parsed per-frame records of a bundle.
#[derive(Debug, Clone, Default)]
pub struct BundleRecords {
    pub annotation: Option<TherbligAnnotation>,
    pub hands: BTreeMap<(u64, HandSide), HandRecord>,
    pub cameras: BTreeMap<u64, CameraRecord>,
}

/// A clip directory on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipBundle {
    pub dir: PathBuf,
}

impl ClipBundle {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Directory name, used as the clip's output name.
    pub fn name(&self) -> String {
        self.dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "clip".into())
    }

    pub fn frame_path(&self, frame: u64) -> PathBuf {
        self.dir.join(FRAMES_DIR).join(io::frame_file_name(frame, "png"))
    }

    pub fn depth_path(&self, frame: u64) -> PathBuf {
        self.dir.join(DEPTH_DIR).join(io::frame_file_name(frame, "pfm"))
    }

    pub fn mask_path(&self, frame: u64) -> PathBuf {
        self.dir.join(MASKS_DIR).join(io::frame_file_name(frame, "png"))
    }

    fn frame_indices(&self, sub: &str, ext: &str) -> BTreeSet<u64> {
        let Ok(entries) = std::fs::read_dir(self.dir.join(sub)) else {
            return BTreeSet::new();
        };
        entries
            .filter_map(Result::ok)
            .filter_map(|e| io::parse_frame_file_name(&e.file_name().to_string_lossy(), ext))
            .collect()
    }
}

fn finding(frame: Option<u64>, kind: FindingKind, detail: impl Into<String>) -> Finding {
    Finding {
        frame,
        kind,
        detail: detail.into(),
    }
}

fn read_records(bundle: &ClipBundle, findings: &mut Vec<Finding>) -> BundleRecords {
    let mut records = BundleRecords::default();

    match std::fs::read_to_string(bundle.dir.join(ANNOTATION_FILE)) {
        Err(e) => findings.push(finding(None, FindingKind::MissingAnnotation, e.to_string())),
        Ok(text) => match parse_annotations(&text) {
            Ok(mut anns) if anns.len() == 1 => records.annotation = anns.pop(),
            Ok(anns) => findings.push(finding(
                None,
                FindingKind::InvalidAnnotation,
                format!("expected exactly one annotation, found {}", anns.len()),
            )),
            Err(e) => findings.push(finding(None, FindingKind::InvalidAnnotation, e.to_string())),
        },
    }

    // Unparseable lines carry no trustworthy frame index; they are reported
    // without one, and the frames they were meant for surface as missing.
    if let Ok(text) = std::fs::read_to_string(bundle.dir.join(HANDS_FILE)) {
        for (line, rec) in io::parse_jsonl::<HandRecord>(&text) {
            match rec {
                Ok(r) => {
                    records.hands.insert((r.frame, r.side), r);
                }
                Err(e) => findings.push(finding(
                    None,
                    FindingKind::CorruptHand,
                    format!("{HANDS_FILE}:{line}: {e}"),
                )),
            }
        }
    }
    if let Ok(text) = std::fs::read_to_string(bundle.dir.join(CAMERA_FILE)) {
        for (line, rec) in io::parse_jsonl::<CameraRecord>(&text) {
            match rec {
                Ok(r) => {
                    records.cameras.insert(r.frame, r);
                }
                Err(e) => findings.push(finding(
                    None,
                    FindingKind::CorruptCamera,
                    format!("{CAMERA_FILE}:{line}: {e}"),
                )),
            }
        }
    }
    records
}

fn check_frame(
    bundle: &ClipBundle,
    frame: u64,
    side: HandSide,
    records: &BundleRecords,
    frames: &BTreeSet<u64>,
    masks: &BTreeSet<u64>,
    findings: &mut Vec<Finding>,
) {
    let at = Some(frame);
    let intrinsics: Option<CameraIntrinsics> = match records.cameras.get(&frame) {
        None => {
            findings.push(finding(at, FindingKind::MissingCamera, "no camera record"));
            None
        }
        Some(c) => match c.intrinsics.validate() {
            Ok(()) => Some(c.intrinsics),
            Err(e) => {
                findings.push(finding(at, FindingKind::CorruptCamera, e.to_string()));
                None
            }
        },
    };

    match records.hands.get(&(frame, side)) {
        None => findings.push(finding(
            at,
            FindingKind::MissingHand,
            format!("no {side:?} hand record"),
        )),
        Some(h) if h.keypoints.len() != crate::retarget::KEYPOINT_COUNT => findings.push(finding(
            at,
            FindingKind::CorruptHand,
            format!("{} keypoints", h.keypoints.len()),
        )),
        Some(_) => {}
    }

    let expect_dims = |what: &str, dims: (u32, u32), findings: &mut Vec<Finding>| {
        if let Some(k) = intrinsics {
            if dims != (k.width, k.height) {
                findings.push(finding(
                    at,
                    FindingKind::DimensionMismatch,
                    format!(
                        "{what} is {}x{}, intrinsics say {}x{}",
                        dims.0, dims.1, k.width, k.height
                    ),
                ));
            }
        }
    };

    if !frames.contains(&frame) {
        findings.push(finding(at, FindingKind::MissingFrame, "no frame image"));
    } else {
        match io::load_png_rgb(&bundle.frame_path(frame)) {
            Ok(img) => expect_dims("frame", img.dimensions(), findings),
            Err(e) => findings.push(finding(at, FindingKind::CorruptFrame, e.to_string())),
        }
    }

    let depth_path = bundle.depth_path(frame);
    if !depth_path.is_file() {
        findings.push(finding(at, FindingKind::MissingDepth, "no depth map"));
    } else {
        match io::load_pfm(&depth_path) {
            Ok(d) => expect_dims("depth", (d.width(), d.height()), findings),
            Err(e) => findings.push(finding(at, FindingKind::CorruptDepth, e.to_string())),
        }
    }

    if masks.contains(&frame) {
        match io::load_png_rgb(&bundle.mask_path(frame)) {
            Ok(img) => expect_dims("mask", img.dimensions(), findings),
            Err(e) => findings.push(finding(at, FindingKind::CorruptMask, e.to_string())),
        }
    }
}

pub(crate) fn validate_with_records(bundle: &ClipBundle) -> (ValidationReport, BundleRecords) {
    let mut findings = Vec::new();
    if !bundle.dir.is_dir() {
        findings.push(finding(
            None,
            FindingKind::MissingBundle,
            format!("{} is not a directory", bundle.dir.display()),
        ));
        let report = ValidationReport {
            bundle: bundle.dir.clone(),
            span: None,
            frames: Vec::new(),
            findings,
        };
        return (report, BundleRecords::default());
    }

    let records = read_records(bundle, &mut findings);
    let frames = bundle.frame_indices(FRAMES_DIR, "png");
    let masks = bundle.frame_indices(MASKS_DIR, "png");

    let span = match &records.annotation {
        Some(a) => match slice_clip(a) {
            Ok(s) => Some(s),
            Err(e) => {
                findings.push(finding(None, FindingKind::InvalidAnnotation, e.to_string()));
                None
            }
        },
        None => None,
    };

    if let Some(span) = &span {
        for frame in span.frames() {
            check_frame(
                bundle,
                frame,
                span.dominant_hand,
                &records,
                &frames,
                &masks,
                &mut findings,
            );
        }
    }

    let report = ValidationReport {
        bundle: bundle.dir.clone(),
        span,
        frames: frames.into_iter().collect(),
        findings,
    };
    (report, records)
}

/// Checks every artifact the span needs. Never fails; problems are findings.
pub fn validate_bundle(bundle: &ClipBundle) -> ValidationReport {
    validate_with_records(bundle).0
}
