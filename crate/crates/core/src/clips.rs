//! Therblig annotations and the manipulation clip spans cut from them.
//!
//! Annotation documents are JSON Lines, one action instance per line:
//!
//! ```json
//! {"video_id":"P01_01","action":"open","dominant_hand":"right","sub_actions":[{"name":"grasp","start":12,"end":40,"used":true},{"name":"pull","start":40,"end":77,"used":true}]}
//! ```
//!
//! Sub-action spans are half-open frame ranges `[start, end)`, listed in
//! temporal order and mutually exclusive; a span may start where the
//! previous one ends. Sub-action names are opaque strings. A sub-action
//! with `used: false` is extraneous.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retarget::HandSide;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClipError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: sub-action {index} [{start}, {end}) overlaps the previous span ending at {prev_end}")]
    OverlappingSubActions {
        line: usize,
        index: usize,
        start: u64,
        end: u64,
        prev_end: u64,
    },
    #[error("line {line}: sub-action {index} is out of order ({detail})")]
    UnorderedSpans { line: usize, index: usize, detail: String },
    #[error("line {line}: unknown dominant hand `{hand}` (expected `left` or `right`)")]
    UnknownHand { line: usize, hand: String },
    #[error("annotation for `{0}` has no used sub-actions")]
    NoUsedSubActions(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubAction {
    pub name: String,
    #[serde(rename = "start")]
    pub start_frame: u64,
    #[serde(rename = "end")]
    pub end_frame: u64,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TherbligAnnotation {
    pub video_id: String,
    pub action: String,
    pub dominant_hand: HandSide,
    pub sub_actions: Vec<SubAction>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotation {
    video_id: String,
    action: String,
    dominant_hand: String,
    sub_actions: Vec<SubAction>,
}

/// Contiguous frame range `[start_frame, end_frame)` of one manipulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipSpan {
    pub video_id: String,
    pub start_frame: u64,
    pub end_frame: u64,
    pub action: String,
    pub dominant_hand: HandSide,
}

impl ClipSpan {
    pub fn contains(&self, frame: u64) -> bool {
        frame >= self.start_frame && frame < self.end_frame
    }

    pub fn len(&self) -> u64 {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frames(&self) -> std::ops::Range<u64> {
        self.start_frame..self.end_frame
    }
}

fn validate(raw: RawAnnotation, line: usize) -> Result<TherbligAnnotation, ClipError> {
    let dominant_hand = match raw.dominant_hand.as_str() {
        "left" => HandSide::Left,
        "right" => HandSide::Right,
        other => {
            return Err(ClipError::UnknownHand {
                line,
                hand: other.to_string(),
            })
        }
    };
    for (index, s) in raw.sub_actions.iter().enumerate() {
        if s.start_frame >= s.end_frame {
            return Err(ClipError::UnorderedSpans {
                line,
                index,
                detail: format!("start {} is not before end {}", s.start_frame, s.end_frame),
            });
        }
    }
    for (index, pair) in raw.sub_actions.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        if next.start_frame < prev.start_frame {
            return Err(ClipError::UnorderedSpans {
                line,
                index: index + 1,
                detail: format!(
                    "starts at {} before the previous span at {}",
                    next.start_frame, prev.start_frame
                ),
            });
        }
        if next.start_frame < prev.end_frame {
            return Err(ClipError::OverlappingSubActions {
                line,
                index: index + 1,
                start: next.start_frame,
                end: next.end_frame,
                prev_end: prev.end_frame,
            });
        }
    }
    Ok(TherbligAnnotation {
        video_id: raw.video_id,
        action: raw.action,
        dominant_hand,
        sub_actions: raw.sub_actions,
    })
}

/// Parses a JSON Lines annotation document. Blank lines are skipped; errors
/// carry 1-based line numbers.
pub fn parse_annotations(document: &str) -> Result<Vec<TherbligAnnotation>, ClipError> {
    let mut out = Vec::new();
    for (i, text) in document.lines().enumerate() {
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let raw: RawAnnotation = serde_json::from_str(text).map_err(|e| ClipError::Malformed {
            line,
            message: e.to_string(),
        })?;
        out.push(validate(raw, line)?);
    }
    Ok(out)
}

/// Writes annotations back as JSON Lines in canonical field order.
pub fn write_annotations(annotations: &[TherbligAnnotation]) -> String {
    let mut out = String::new();
    for a in annotations {
        out.push_str(&serde_json::to_string(a).expect("annotation serializes"));
        out.push('\n');
    }
    out
}

/// Temporal hull of the used sub-actions.
///
/// Extraneous sub-actions between two used ones stay inside the span so the
/// clip's frames remain contiguous.
pub fn slice_clip(ann: &TherbligAnnotation) -> Result<ClipSpan, ClipError> {
    let mut used = ann.sub_actions.iter().filter(|s| s.used);
    let first = used
        .next()
        .ok_or_else(|| ClipError::NoUsedSubActions(ann.video_id.clone()))?;
    let last = used.next_back().unwrap_or(first);
    Ok(ClipSpan {
        video_id: ann.video_id.clone(),
        start_frame: first.start_frame,
        end_frame: last.end_frame,
        action: ann.action.clone(),
        dominant_hand: ann.dominant_hand,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(spans: &[(u64, u64, bool)]) -> String {
        let subs: Vec<String> = spans
            .iter()
            .enumerate()
            .map(|(i, (s, e, u))| format!(r#"{{"name":"t{i}","start":{s},"end":{e},"used":{u}}}"#))
            .collect();
        format!(
            r#"{{"video_id":"P01_01","action":"open","dominant_hand":"right","sub_actions":[{}]}}"#,
            subs.join(",")
        )
    }

    fn span(spans: &[(u64, u64, bool)]) -> Result<ClipSpan, ClipError> {
        slice_clip(&parse_annotations(&doc(spans)).unwrap()[0])
    }

    #[test]
    fn single_span() {
        let anns = parse_annotations(&doc(&[(10, 50, true)])).unwrap();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].sub_actions.len(), 1);
        assert_eq!(anns[0].dominant_hand, HandSide::Right);
    }

    #[test]
    fn overlap_and_order_errors() {
        assert!(matches!(
            parse_annotations(&doc(&[(10, 50, true), (40, 80, true)])),
            Err(ClipError::OverlappingSubActions { line: 1, index: 1, .. })
        ));
        assert!(matches!(
            parse_annotations(&doc(&[(40, 80, true), (10, 20, true)])),
            Err(ClipError::UnorderedSpans { index: 1, .. })
        ));
        assert!(matches!(
            parse_annotations(&doc(&[(40, 40, true)])),
            Err(ClipError::UnorderedSpans { index: 0, .. })
        ));
    }

    #[test]
    fn unknown_hand_reports_line() {
        let text = format!(
            "{}\n\n{}\n",
            doc(&[(0, 5, true)]),
            doc(&[(0, 5, true)]).replace("right", "both")
        );
        assert_eq!(
            parse_annotations(&text),
            Err(ClipError::UnknownHand {
                line: 3,
                hand: "both".into()
            })
        );
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(
            parse_annotations("{\"video_id\": 3}"),
            Err(ClipError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn usage_flags_survive() {
        let anns = parse_annotations(&doc(&[(0, 5, true), (5, 9, false), (9, 12, true)])).unwrap();
        let used: Vec<bool> = anns[0].sub_actions.iter().map(|s| s.used).collect();
        assert_eq!(used, vec![true, false, true]);
    }

    #[test]
    fn hull_of_used_spans() {
        let s = span(&[(12, 40, true), (40, 77, true)]).unwrap();
        assert_eq!((s.start_frame, s.end_frame), (12, 77));
        let s = span(&[(12, 40, true), (40, 77, false), (77, 90, true)]).unwrap();
        assert_eq!((s.start_frame, s.end_frame), (12, 90));
        assert!(s.contains(50));
        let s = span(&[(0, 12, false), (12, 40, true), (40, 77, false)]).unwrap();
        assert_eq!((s.start_frame, s.end_frame), (12, 40));
        assert_eq!(
            span(&[(0, 4, false), (4, 9, false)]),
            Err(ClipError::NoUsedSubActions("P01_01".into()))
        );
    }

    #[test]
    fn canonical_round_trip() {
        let text = format!("{}\n{}\n", doc(&[(0, 5, true), (5, 9, false)]), doc(&[(3, 4, true)]));
        assert_eq!(write_annotations(&parse_annotations(&text).unwrap()), text);
    }
}
