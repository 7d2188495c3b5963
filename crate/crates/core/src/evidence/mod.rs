//! Per-pixel label votes from the parser, flow-warped previous labels,
//! segmentation masks and manual corrections.

mod flow;
mod masks;

pub use flow::{decode_flo, encode_flo, read_flo, warp_labels, write_flo, FlowField};
pub use masks::{
    decode_masks_json, encode_masks_json, filter_masks, mask_score, read_masks_json, sam_votes, write_masks_json, Mask,
    MaskFilter, MaskSet, Rle,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io;
use crate::label::{ClassMap, LabelId, LabelRegistry};
use crate::raster::LabelImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoteSource {
    Par,
    Opt,
    Sam,
    Man,
}

impl VoteSource {
    pub fn name(self) -> &'static str {
        match self {
            VoteSource::Par => "par",
            VoteSource::Opt => "opt",
            VoteSource::Sam => "sam",
            VoteSource::Man => "man",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Votes {
    /// One label per pixel; background votes for nothing.
    Hard(Vec<LabelId>),
    /// Row-major `pixel * n_labels + label` scores.
    Soft { n_labels: usize, scores: Vec<f64> },
}

/// Vote function `f(p, l)` of one source over one view.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteImage {
    pub width: usize,
    pub height: usize,
    pub source: VoteSource,
    pub votes: Votes,
}

impl VoteImage {
    pub fn hard(width: usize, height: usize, source: VoteSource, labels: Vec<LabelId>) -> Self {
        debug_assert_eq!(labels.len(), width * height);
        VoteImage {
            width,
            height,
            source,
            votes: Votes::Hard(labels),
        }
    }

    pub fn from_label_image(image: &LabelImage, source: VoteSource) -> Self {
        VoteImage::hard(image.width, image.height, source, image.labels.clone())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn vote(&self, pixel: usize, label: LabelId) -> f64 {
        match &self.votes {
            Votes::Hard(labels) => {
                let l = labels[pixel];
                if !l.is_background() && l == label {
                    1.0
                } else {
                    0.0
                }
            }
            Votes::Soft { n_labels, scores } => match label.index() {
                Some(i) if i < *n_labels => scores[pixel * n_labels + i],
                _ => 0.0,
            },
        }
    }

    /// Hard label at a pixel, `None` for soft images.
    #[inline]
    pub fn hard_label(&self, pixel: usize) -> Option<LabelId> {
        match &self.votes {
            Votes::Hard(labels) => Some(labels[pixel]),
            Votes::Soft { .. } => None,
        }
    }

    /// Adds `weight * f(p, l)` for every label to `out[l]`.
    #[inline]
    pub fn accumulate(&self, pixel: usize, weight: f64, out: &mut [f64]) {
        match &self.votes {
            Votes::Hard(labels) => {
                if let Some(i) = labels[pixel].index() {
                    if i < out.len() {
                        out[i] += weight;
                    }
                }
            }
            Votes::Soft { n_labels, scores } => {
                let row = &scores[pixel * n_labels..(pixel + 1) * n_labels];
                for (o, s) in out.iter_mut().zip(row) {
                    *o += weight * s;
                }
            }
        }
    }

    pub fn check_size(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch {
                expected_w: width,
                expected_h: height,
                found_w: self.width,
                found_h: self.height,
            });
        }
        Ok(())
    }
}

/// Parser label image through a class map.
pub fn load_parser_votes(path: &Path, class_map: &ClassMap) -> Result<VoteImage> {
    let img = image_io::read_index_png(path)?;
    let labels = img
        .indices
        .iter()
        .map(|&i| class_map.get(i as u32))
        .collect::<Result<Vec<_>>>()?;
    Ok(VoteImage::hard(img.width, img.height, VoteSource::Par, labels))
}

/// Annotator corrections for one view: sparse `(x, y, label)` entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RectificationOverlay {
    pub entries: Vec<(i64, i64, LabelId)>,
}

impl RectificationOverlay {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn push(&mut self, x: i64, y: i64, label: LabelId) {
        self.entries.push((x, y, label));
    }

    pub fn validate(&self, width: usize, height: usize, registry: &LabelRegistry) -> Result<()> {
        for &(x, y, l) in &self.entries {
            if x < 0 || y < 0 || x as usize >= width || y as usize >= height {
                return Err(Error::PixelOutOfBounds { x, y, width, height });
            }
            registry.check(l)?;
        }
        Ok(())
    }

    /// Wire/disk format: compact JSON `[[x,y,label],...]`.
    pub fn to_json(&self) -> String {
        let rows: Vec<[i64; 3]> = self.entries.iter().map(|&(x, y, l)| [x, y, l.0 as i64]).collect();
        serde_json::to_string(&rows).expect("serializing integers")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let rows: Vec<[i64; 3]> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut entries = Vec::with_capacity(rows.len());
        for [x, y, l] in rows {
            let l = i16::try_from(l).map_err(|_| format!("label {l} out of range"))?;
            entries.push((x, y, LabelId(l)));
        }
        Ok(RectificationOverlay { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|d| Error::parse(path, d))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::util::write_atomic(path, self.to_json().as_bytes())
    }
}

/// Hard manual votes; untouched pixels vote for nothing. Later entries for
/// the same pixel override earlier ones.
pub fn manual_votes(overlay: &RectificationOverlay, width: usize, height: usize) -> Result<VoteImage> {
    let mut labels = vec![LabelId::BACKGROUND; width * height];
    for &(x, y, l) in &overlay.entries {
        if x < 0 || y < 0 || x as usize >= width || y as usize >= height {
            return Err(Error::PixelOutOfBounds { x, y, width, height });
        }
        labels[y as usize * width + x as usize] = l;
    }
    Ok(VoteImage::hard(width, height, VoteSource::Man, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_votes_are_one_hot_or_empty() {
        let img = VoteImage::hard(2, 1, VoteSource::Par, vec![LabelId(2), LabelId::BACKGROUND]);
        let sum0: f64 = (0..6).map(|l| img.vote(0, LabelId(l))).sum();
        let sum1: f64 = (0..6).map(|l| img.vote(1, LabelId(l))).sum();
        assert_eq!((sum0, sum1), (1.0, 0.0));
        assert_eq!(img.vote(1, LabelId::BACKGROUND), 0.0);
    }

    #[test]
    fn manual_overlay_votes() {
        let empty = manual_votes(&RectificationOverlay::default(), 4, 4).unwrap();
        assert!((0..16).all(|p| (0..6).all(|l| empty.vote(p, LabelId(l)) == 0.0)));

        let mut ov = RectificationOverlay::default();
        ov.push(1, 2, LabelId(5));
        let v = manual_votes(&ov, 4, 4).unwrap();
        for p in 0..16 {
            for l in 0..6 {
                let want = if p == 2 * 4 + 1 && l == 5 { 1.0 } else { 0.0 };
                assert_eq!(v.vote(p, LabelId(l)), want);
            }
        }
        ov.push(4, 0, LabelId(1));
        assert!(manual_votes(&ov, 4, 4).is_err());
        assert!(ov.validate(4, 4, &LabelRegistry::default()).is_err());
    }

    #[test]
    fn overlay_json_round_trip() {
        let mut ov = RectificationOverlay::default();
        ov.push(3, 4, LabelId(5));
        ov.push(0, 0, LabelId::BACKGROUND);
        let text = ov.to_json();
        assert_eq!(text, "[[3,4,5],[0,0,-1]]");
        let back = RectificationOverlay::from_json(&text).unwrap();
        assert_eq!(back, ov);
        assert_eq!(manual_votes(&back, 8, 8).unwrap(), manual_votes(&ov, 8, 8).unwrap());
        assert!(RectificationOverlay::from_json("[[1,2]]").is_err());
        assert!(RectificationOverlay::from_json("{").is_err());
    }

    #[test]
    fn parser_votes_through_lip_map() {
        use crate::label::LIP_CLASSES;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("par.png");
        let class = |n: &str| LIP_CLASSES.iter().position(|c| *c == n).unwrap() as u8;
        let indices = vec![class("left-arm"), class("pants"), class("coat"), class("background")];
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 2, 2);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            enc.write_header().unwrap().write_image_data(&indices).unwrap();
        }
        std::fs::write(&path, bytes).unwrap();
        let votes = load_parser_votes(&path, &ClassMap::lip()).unwrap();
        assert_eq!(
            votes.votes,
            Votes::Hard(vec![LabelId(0), LabelId(4), LabelId(5), LabelId::BACKGROUND])
        );
        let err = load_parser_votes(&path, &ClassMap::identity(6)).unwrap_err();
        assert!(err.to_string().contains("14"), "{err}");
    }
}
