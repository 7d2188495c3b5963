use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterMap;

use super::{VoteImage, VoteSource, Votes};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Mask { width, height, bits }
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn contains(&self, pixel: usize) -> bool {
        self.bits[pixel]
    }

    pub fn pixels(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Uncompressed COCO RLE: run lengths over the column-major flattening,
    /// starting with a (possibly empty) run of zeros.
    pub fn to_rle(&self) -> Rle {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for x in 0..self.width {
            for y in 0..self.height {
                let b = self.bits[y * self.width + x];
                if b != current {
                    counts.push(run);
                    run = 0;
                    current = b;
                }
                run += 1;
            }
        }
        counts.push(run);
        Rle {
            size: [self.height, self.width],
            counts,
        }
    }

    pub fn from_rle(rle: &Rle) -> std::result::Result<Mask, String> {
        let [h, w] = rle.size;
        let total: u64 = rle.counts.iter().map(|&c| c as u64).sum();
        if total != (w * h) as u64 {
            return Err(format!("RLE counts sum to {total}, expected {}", w * h));
        }
        let mut mask = Mask::new(w, h);
        let mut pos = 0usize;
        let mut value = false;
        for &c in &rle.counts {
            for k in pos..pos + c as usize {
                if value {
                    let (x, y) = (k / h, k % h);
                    mask.bits[y * w + x] = true;
                }
            }
            pos += c as usize;
            value = !value;
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    /// `[height, width]`
    pub size: [usize; 2],
    pub counts: Vec<u32>,
}

/// Possibly overlapping binary masks for one view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    pub width: usize,
    pub height: usize,
    pub masks: Vec<Mask>,
}

impl MaskSet {
    pub fn new(width: usize, height: usize, masks: Vec<Mask>) -> Result<Self> {
        for m in &masks {
            if m.width != width || m.height != height {
                return Err(Error::DimensionMismatch {
                    expected_w: width,
                    expected_h: height,
                    found_w: m.width,
                    found_h: m.height,
                });
            }
        }
        Ok(MaskSet { width, height, masks })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

pub fn read_masks_json(path: &Path) -> Result<MaskSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_masks_json(&text).map_err(|d| Error::parse(path, d))
}

pub fn decode_masks_json(text: &str) -> std::result::Result<MaskSet, String> {
    let rles: Vec<Rle> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let masks = rles
        .iter()
        .map(Mask::from_rle)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (w, h) = masks.first().map_or((0, 0), |m| (m.width, m.height));
    MaskSet::new(w, h, masks).map_err(|e| e.to_string())
}

pub fn encode_masks_json(set: &MaskSet) -> String {
    let rles: Vec<Rle> = set.masks.iter().map(Mask::to_rle).collect();
    serde_json::to_string(&rles).expect("serializing RLE")
}

pub fn write_masks_json(path: &Path, set: &MaskSet) -> Result<()> {
    crate::util::write_atomic(path, encode_masks_json(set).as_bytes())
}

/// Rejection thresholds for raw segmentation masks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskFilter {
    /// Maximum fraction of a mask's area that may be background.
    pub max_background: f64,
    /// Maximum fraction of the foreground a single mask may cover.
    pub max_foreground: f64,
    /// Minimum mask area in pixels.
    pub min_area: usize,
}

impl Default for MaskFilter {
    fn default() -> Self {
        MaskFilter {
            max_background: 0.05,
            max_foreground: 0.90,
            min_area: 100,
        }
    }
}

impl MaskFilter {
    /// Defaults with the area threshold scaled from 512x512 to `width x height`.
    pub fn for_resolution(width: usize, height: usize) -> Self {
        let base = MaskFilter::default();
        let scale = (width * height) as f64 / (512.0 * 512.0);
        MaskFilter {
            min_area: ((base.min_area as f64 * scale).round() as usize).max(1),
            ..base
        }
    }

    pub fn keeps(&self, mask: &Mask, coverage: &RasterMap) -> bool {
        let area = mask.area();
        if area == 0 || area < self.min_area {
            return false;
        }
        let fg_total = coverage.covered_count();
        let mut bg = 0usize;
        let mut fg = 0usize;
        for p in mask.pixels() {
            if coverage.is_covered(p) {
                fg += 1;
            } else {
                bg += 1;
            }
        }
        if bg as f64 > self.max_background * area as f64 {
            return false;
        }
        if fg_total > 0 && fg as f64 > self.max_foreground * fg_total as f64 {
            return false;
        }
        true
    }
}

/// Drops masks that spill onto background, cover (almost) the whole body, or
/// are too small.
pub fn filter_masks(raw: &MaskSet, coverage: &RasterMap, filter: &MaskFilter) -> Result<MaskSet> {
    coverage.same_size(raw.width, raw.height)?;
    Ok(MaskSet {
        width: raw.width,
        height: raw.height,
        masks: raw
            .masks
            .iter()
            .filter(|m| filter.keeps(m, coverage))
            .cloned()
            .collect(),
    })
}

/// Agreement of the parser and flow votes with `label` inside a mask,
/// normalized by the mask area: `sum(f_par + w f_opt) / (area (1 + w))`.
pub fn mask_score(
    label: crate::label::LabelId,
    mask: &Mask,
    par: &VoteImage,
    opt: Option<&VoteImage>,
    opt_weight: f64,
) -> Result<f64> {
    if !(opt_weight >= 0.0) {
        return Err(Error::InvalidWeights(format!("lambda_po = {opt_weight}")));
    }
    let area = mask.area();
    if area == 0 {
        return Err(Error::EmptyMask);
    }
    let mut num = 0.0;
    for p in mask.pixels() {
        num += par.vote(p, label);
        if let Some(o) = opt {
            num += opt_weight * o.vote(p, label);
        }
    }
    Ok(num / (area as f64 * (1.0 + opt_weight)))
}

/// Scores of all `n_labels` labels for one mask in a single pass.
fn mask_scores(mask: &Mask, par: &VoteImage, opt: Option<&VoteImage>, opt_weight: f64, n_labels: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n_labels];
    let mut area = 0usize;
    for p in mask.pixels() {
        area += 1;
        par.accumulate(p, 1.0, &mut sums);
        if let Some(o) = opt {
            o.accumulate(p, opt_weight, &mut sums);
        }
    }
    let denom = area as f64 * (1.0 + opt_weight);
    sums.iter_mut().for_each(|s| *s /= denom);
    sums
}

/// Soft vote image: each pixel sums the label scores of every mask containing
/// it; pixels outside all masks score zero.
pub fn sam_votes(
    masks: &MaskSet,
    par: &VoteImage,
    opt: Option<&VoteImage>,
    opt_weight: f64,
    n_labels: usize,
) -> Result<VoteImage> {
    if !(opt_weight >= 0.0) {
        return Err(Error::InvalidWeights(format!("lambda_po = {opt_weight}")));
    }
    par.check_size(masks.width, masks.height)?;
    if let Some(o) = opt {
        o.check_size(masks.width, masks.height)?;
    }
    let mut scores = vec![0.0; masks.width * masks.height * n_labels];
    for mask in &masks.masks {
        if mask.area() == 0 {
            continue;
        }
        let s = mask_scores(mask, par, opt, opt_weight, n_labels);
        for p in mask.pixels() {
            for (dst, v) in scores[p * n_labels..(p + 1) * n_labels].iter_mut().zip(&s) {
                *dst += v;
            }
        }
    }
    Ok(VoteImage {
        width: masks.width,
        height: masks.height,
        source: VoteSource::Sam,
        votes: Votes::Soft { n_labels, scores },
    })
}
