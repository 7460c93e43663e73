//! File formats of a clip bundle and the atomic-write helper.

use std::io::Write;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Se3};
use crate::render::DepthMap;
use crate::retarget::HandSide;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Fs {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl IoError {
    pub(crate) fn fs(path: &Path, source: std::io::Error) -> Self {
        Self::Fs {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfmError {
    #[error("bad PFM header: {0}")]
    Header(String),
    #[error("color PFM (`PF`) is not supported; depth must be grayscale `Pf`")]
    Color,
    #[error("PFM payload has {got} bytes, expected {expected}")]
    Truncated { expected: usize, got: usize },
}

/// Decodes a grayscale PFM. Rows are stored bottom to top; the sign of the
/// scale field selects the byte order (negative means little-endian).
pub fn read_pfm(bytes: &[u8]) -> Result<DepthMap, PfmError> {
    let mut pos = 0;
    let mut token = |what: &str| -> Result<String, PfmError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PfmError::Header(format!("missing {what}")));
        }
        let text =
            std::str::from_utf8(&bytes[start..pos]).map_err(|_| PfmError::Header(format!("non-ASCII {what}")))?;
        Ok(text.to_string())
    };
    match token("magic")?.as_str() {
        "Pf" => {}
        "PF" => return Err(PfmError::Color),
        other => return Err(PfmError::Header(format!("magic `{other}`"))),
    }
    let width: u32 = token("width")?.parse().map_err(|_| PfmError::Header("width".into()))?;
    let height: u32 = token("height")?
        .parse()
        .map_err(|_| PfmError::Header("height".into()))?;
    let scale: f32 = token("scale")?.parse().map_err(|_| PfmError::Header("scale".into()))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(PfmError::Header(format!("scale {scale}")));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PfmError::Truncated {
            expected: width as usize * height as usize * 4,
            got: 0,
        });
    }
    let payload = &bytes[pos + 1..];
    let expected = width as usize * height as usize * 4;
    if payload.len() != expected {
        return Err(PfmError::Truncated {
            expected,
            got: payload.len(),
        });
    }
    let little = scale < 0.0;
    let mut data = vec![0.0f32; width as usize * height as usize];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row_from_bottom, x) = (i / width as usize, i % width as usize);
        let y = height as usize - 1 - row_from_bottom;
        data[y * width as usize + x] = v;
    }
    Ok(DepthMap::from_vec(width, height, data).expect("size checked"))
}

/// Encodes a little-endian grayscale PFM.
pub fn write_pfm(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = (depth.width() as usize, depth.height() as usize);
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for v in &depth.data()[y * w..(y + 1) * w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load_pfm(path: &Path) -> Result<DepthMap, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::fs(path, e))?;
    read_pfm(&bytes).map_err(|e| IoError::format(path, e.to_string()))
}

pub fn load_png_rgb(path: &Path) -> Result<RgbImage, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::fs(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| IoError::format(path, e.to_string()))?;
    Ok(img.to_rgb8())
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .expect("in-memory PNG encoding does not fail");
    buf.into_inner()
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| IoError::fs(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = std::fs::File::create(&tmp).map_err(|e| IoError::fs(&tmp, e))?;
    f.write_all(bytes).map_err(|e| IoError::fs(&tmp, e))?;
    f.sync_all().map_err(|e| IoError::fs(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| IoError::fs(path, e))
}

/// One line of `hands.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandRecord {
    pub frame: u64,
    pub side: HandSide,
    pub keypoints: Vec<[f64; 3]>,
}

/// One line of `camera.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub frame: u64,
    /// Seconds.
    pub timestamp: f64,
    pub intrinsics: CameraIntrinsics,
    pub world_from_camera: Se3,
}

/// Parses JSON Lines, returning per-line results so one bad record does not
/// hide the rest. Blank lines are skipped.
pub fn parse_jsonl<T: serde::de::DeserializeOwned>(text: &str) -> Vec<(usize, Result<T, String>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, serde_json::from_str(l).map_err(|e| e.to_string())))
        .collect()
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// `NNNNNN.<ext>` for a frame index.
pub fn frame_file_name(frame: u64, ext: &str) -> String {
    format!("{frame:06}.{ext}")
}

/// Frame index encoded in a `NNNNNN.<ext>` file name.
pub fn parse_frame_file_name(name: &str, ext: &str) -> Option<u64> {
    let stem = name.strip_suffix(ext)?.strip_suffix('.')?;
    if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    stem.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DepthMap {
        DepthMap::from_vec(3, 2, vec![1.0, 2.0, f32::NAN, 4.0, 5.5, 6.25]).unwrap()
    }

    #[test]
    fn pfm_round_trip_keeps_row_order() {
        let d = sample();
        let bytes = write_pfm(&d);
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        let back = read_pfm(&bytes).unwrap();
        assert_eq!(back.get(0, 0), 1.0);
        assert_eq!(back.get(2, 1), 6.25);
        assert!(back.get(2, 0).is_nan());
        // the first stored row is the bottom image row
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first, 4.0);
    }

    #[test]
    fn pfm_big_endian() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(read_pfm(&bytes).unwrap().get(0, 0), 2.5);
    }

    #[test]
    fn pfm_errors() {
        let bytes = write_pfm(&sample());
        assert!(matches!(
            read_pfm(&bytes[..bytes.len() - 3]),
            Err(PfmError::Truncated { .. })
        ));
        assert!(matches!(read_pfm(b"P6\n1 1\n255\n"), Err(PfmError::Header(_))));
        assert_eq!(read_pfm(b"PF\n1 1\n-1.0\n"), Err(PfmError::Color));
        assert!(matches!(read_pfm(b"Pf\n1"), Err(PfmError::Header(_))));
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_file_name(7, "png"), "000007.png");
        assert_eq!(parse_frame_file_name("000007.png", "png"), Some(7));
        assert_eq!(parse_frame_file_name("000007.pfm", "png"), None);
        assert_eq!(parse_frame_file_name("x7.png", "png"), None);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.txt");
        write_atomic(&path, b"hello").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"hello");
        let names: Vec<_> = std::fs::read_dir(dir.path().join("a"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }
}
