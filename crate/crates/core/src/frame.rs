//! Per-vertex label assignments and their on-disk encodings.
//!
//! Binary: magic `L4DL`, little-endian `u32` count, then `count` little-endian
//! `i16` labels. Text: one decimal label per line. `load_label_frame`
//! detects the encoding from the first four bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::LabelId;

pub const LABEL_MAGIC: &[u8; 4] = b"L4DL";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFrame {
    pub frame_index: usize,
    pub labels: Vec<LabelId>,
}

impl LabelFrame {
    pub fn new(frame_index: usize, labels: Vec<LabelId>) -> Self {
        LabelFrame { frame_index, labels }
    }

    pub fn uniform(frame_index: usize, n: usize, label: LabelId) -> Self {
        LabelFrame::new(frame_index, vec![label; n])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn has_background(&self) -> bool {
        self.labels.iter().any(|l| l.is_background())
    }

    /// Number of positions where the two frames disagree.
    pub fn count_changes(&self, other: &LabelFrame) -> usize {
        self.labels.iter().zip(&other.labels).filter(|(a, b)| a != b).count()
    }

    /// Fraction of positions equal to `truth`.
    pub fn accuracy(&self, truth: &[LabelId]) -> f64 {
        if truth.is_empty() {
            return 1.0;
        }
        let ok = self.labels.iter().zip(truth).filter(|(a, b)| a == b).count();
        ok as f64 / truth.len() as f64
    }
}

pub fn encode_binary(labels: &[LabelId]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 2 * labels.len());
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for l in labels {
        out.extend_from_slice(&l.0.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Vec<LabelId>> {
    if bytes.len() >= 4 && &bytes[..4] == LABEL_MAGIC {
        if bytes.len() < 8 {
            return Err(Error::parse(path, "truncated label header"));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let body = &bytes[8..];
        if body.len() != 2 * count {
            return Err(Error::parse(
                path,
                format!("header declares {count} labels but body holds {} bytes", body.len()),
            ));
        }
        Ok(body
            .chunks_exact(2)
            .map(|c| LabelId(i16::from_le_bytes([c[0], c[1]])))
            .collect())
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(path, "neither L4DL binary nor UTF-8 text"))?;
        let labels = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.parse::<i16>()
                    .map(LabelId)
                    .map_err(|_| Error::parse(path, format!("line {}: bad label {l:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if labels.is_empty() {
            return Err(Error::parse(path, "label file is empty"));
        }
        Ok(labels)
    }
}

/// Writes the binary encoding atomically (temp file + rename).
pub fn save_label_frame(frame: &LabelFrame, path: &Path) -> Result<()> {
    crate::util::write_atomic(path, &encode_binary(&frame.labels))
}

pub fn save_label_frame_text(frame: &LabelFrame, path: &Path) -> Result<()> {
    let mut text = String::with_capacity(3 * frame.len());
    for l in &frame.labels {
        text.push_str(&l.0.to_string());
        text.push('\n');
    }
    crate::util::write_atomic(path, text.as_bytes())
}

/// Loads a label file, optionally checking it against a vertex count.
pub fn load_label_frame(path: &Path, frame_index: usize, expected_len: Option<usize>) -> Result<LabelFrame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let labels = decode(&bytes, path)?;
    if let Some(n) = expected_len {
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: labels.len(),
            });
        }
    }
    Ok(LabelFrame::new(frame_index, labels))
}
