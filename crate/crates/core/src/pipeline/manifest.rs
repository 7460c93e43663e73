use serde::{Deserialize, Serialize};

use super::bundle::Finding;

pub const TOOL_VERSION: &str = concat!("embodiswap ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    IkUnreachable,
    DegenerateHand,
    MissingInput,
    /// Frame is valid but its look-ahead partner is absent.
    LookaheadUnavailable,
    /// The clip failed after validation.
    ClipError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub frame: u64,
    pub reason: ExclusionReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Composite,
    Labels,
}

/// Outcome of one clip.
///
/// Every frame in `frames/` is accounted for exactly once:
/// `labels_emitted + excluded.len() + out_of_span == total_frames`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip: String,
    pub status: ClipStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    /// Half-open `[start, end)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<[u64; 2]>,
    pub total_frames: u64,
    pub out_of_span: u64,
    pub composites_written: u64,
    pub labels_emitted: u64,
    pub excluded: Vec<Exclusion>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub findings: Vec<Finding>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    pub config_digest: String,
    pub tool_version: String,
}

impl ClipEntry {
    pub fn reconciles(&self) -> bool {
        self.labels_emitted + self.excluded.len() as u64 + self.out_of_span == self.total_frames
    }

    pub fn excluded_for(&self, reason: ExclusionReason) -> usize {
        self.excluded.iter().filter(|e| e.reason == reason).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub mode: RunMode,
    pub clips: Vec<ClipEntry>,
}

impl DatasetManifest {
    pub fn reconciles(&self) -> bool {
        self.clips.iter().all(ClipEntry::reconciles)
    }

    pub fn failed(&self) -> impl Iterator<Item = &ClipEntry> {
        self.clips.iter().filter(|c| c.status == ClipStatus::Failed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
