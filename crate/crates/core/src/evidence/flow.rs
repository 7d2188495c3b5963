use std::path::Path;

use crate::error::{Error, Result};
use crate::label::LabelId;
use crate::raster::LabelImage;

use super::{VoteImage, VoteSource};

const FLO_MAGIC: f32 = 202021.25;

/// Per-pixel displacement (x right, y down) from frame k-1 to frame k.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            data: vec![[0.0; 2]; width * height],
        }
    }

    pub fn uniform(width: usize, height: usize, dx: f32, dy: f32) -> Self {
        FlowField {
            width,
            height,
            data: vec![[dx, dy]; width * height],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.width * self.height {
            return Err(Error::LengthMismatch {
                expected: self.width * self.height,
                found: self.data.len(),
            });
        }
        if self.data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("flow field has non-finite values".into()));
        }
        Ok(())
    }
}

/// Middlebury `.flo`: magic 202021.25 ("PIEH"), i32 width, i32 height, then
/// interleaved little-endian f32 (dx, dy) per pixel.
pub fn read_flo(path: &Path) -> Result<FlowField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes).map_err(|d| Error::parse(path, d))
}

pub fn decode_flo(bytes: &[u8]) -> std::result::Result<FlowField, String> {
    if bytes.len() < 12 {
        return Err("truncated .flo header".into());
    }
    let magic = f32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic != FLO_MAGIC {
        return Err("bad .flo magic".into());
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(format!("bad .flo size {w}x{h}"));
    }
    let (w, h) = (w as usize, h as usize);
    let body = &bytes[12..];
    if body.len() != w * h * 8 {
        return Err(format!("expected {} data bytes, found {}", w * h * 8, body.len()));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..8].try_into().unwrap()),
            ]
        })
        .collect();
    let field = FlowField {
        width: w,
        height: h,
        data,
    };
    field.validate().map_err(|e| e.to_string())?;
    Ok(field)
}

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * flow.data.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for [dx, dy] in &flow.data {
        out.extend_from_slice(&dx.to_le_bytes());
        out.extend_from_slice(&dy.to_le_bytes());
    }
    out
}

pub fn write_flo(path: &Path, flow: &FlowField) -> Result<()> {
    crate::util::write_atomic(path, &encode_flo(flow))
}

/// Forward-warps labels along the flow. Every labeled source pixel deposits
/// its label at `round(p + v)`; each target takes the most frequent deposit
/// (smallest label id on ties). Targets without deposits, and deposits
/// landing outside the image, leave `-1`.
pub fn warp_labels(prev: &LabelImage, flow: &FlowField) -> Result<VoteImage> {
    if prev.width != flow.width || prev.height != flow.height {
        return Err(Error::DimensionMismatch {
            expected_w: prev.width,
            expected_h: prev.height,
            found_w: flow.width,
            found_h: flow.height,
        });
    }
    let (w, h) = (prev.width, prev.height);
    let n_labels = prev.labels.iter().filter_map(|l| l.index()).max().map_or(0, |m| m + 1);
    let mut out = vec![LabelId::BACKGROUND; w * h];
    if n_labels == 0 {
        return Ok(VoteImage::hard(w, h, VoteSource::Opt, out));
    }
    let mut counts = vec![0u32; w * h * n_labels];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let Some(l) = prev.labels[p].index() else {
                continue;
            };
            let [dx, dy] = flow.data[p];
            let tx = (x as f64 + dx as f64).round();
            let ty = (y as f64 + dy as f64).round();
            if tx < 0.0 || ty < 0.0 || tx >= w as f64 || ty >= h as f64 {
                continue;
            }
            let t = ty as usize * w + tx as usize;
            counts[t * n_labels + l] += 1;
        }
    }
    for (t, row) in counts.chunks_exact(n_labels).enumerate() {
        let mut best = 0usize;
        for l in 1..n_labels {
            if row[l] > row[best] {
                best = l;
            }
        }
        if row[best] > 0 {
            out[t] = LabelId::from_index(best);
        }
    }
    Ok(VoteImage::hard(w, h, VoteSource::Opt, out))
}
