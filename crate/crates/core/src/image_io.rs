//! PNG encoding of label images (8-bit palette, background at index 255) and
//! RGB renders.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::{LabelId, LabelRegistry};
use crate::raster::{LabelImage, RgbImage};

pub const BACKGROUND_INDEX: u8 = 255;

/// Raw 8-bit single-channel image: palette indices or gray values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexImage {
    pub width: usize,
    pub height: usize,
    pub indices: Vec<u8>,
}

pub fn encode_label_png(image: &LabelImage, registry: &LabelRegistry) -> Result<Vec<u8>> {
    let mut palette = Vec::with_capacity(256 * 3);
    for i in 0..256usize {
        let color = if i < registry.len() {
            registry.color(LabelId::from_index(i))
        } else {
            registry.background_color()
        };
        palette.extend_from_slice(&color);
    }
    let mut indices = Vec::with_capacity(image.labels.len());
    for &l in &image.labels {
        let idx = match l.index() {
            None => BACKGROUND_INDEX,
            Some(i) if i < BACKGROUND_INDEX as usize => i as u8,
            Some(_) => return Err(Error::UnknownLabel(l.0 as i32)),
        };
        indices.push(idx);
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(palette);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Invalid(format!("png encode: {e}")))?;
        writer
            .write_image_data(&indices)
            .map_err(|e| Error::Invalid(format!("png encode: {e}")))?;
    }
    Ok(out)
}

pub fn write_label_png(path: &Path, image: &LabelImage, registry: &LabelRegistry) -> Result<()> {
    crate::util::write_atomic(path, &encode_label_png(image, registry)?)
}

/// Reads an 8-bit indexed or grayscale PNG without palette expansion.
pub fn read_index_png(path: &Path) -> Result<IndexImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode_index_png(BufReader::new(file)).map_err(|d| Error::parse(path, d))
}

pub fn decode_index_png<R: std::io::BufRead + std::io::Seek>(reader: R) -> std::result::Result<IndexImage, String> {
    let mut decoder = png::Decoder::new(reader);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight || !matches!(color, png::ColorType::Indexed | png::ColorType::Grayscale) {
        return Err(format!(
            "expected an 8-bit indexed or grayscale PNG, found {color:?}/{depth:?}"
        ));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| "image too large".to_string())?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = info.line_size;
    let mut indices = Vec::with_capacity(w * h);
    for y in 0..h {
        indices.extend_from_slice(&buf[y * stride..y * stride + w]);
    }
    Ok(IndexImage {
        width: w,
        height: h,
        indices,
    })
}

/// Label image from a PNG written by [`write_label_png`].
pub fn read_label_png(path: &Path) -> Result<LabelImage> {
    let img = read_index_png(path)?;
    Ok(LabelImage {
        width: img.width,
        height: img.height,
        labels: img
            .indices
            .iter()
            .map(|&i| {
                if i == BACKGROUND_INDEX {
                    LabelId::BACKGROUND
                } else {
                    LabelId(i as i16)
                }
            })
            .collect(),
    })
}

pub fn encode_rgb_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Invalid(format!("png encode: {e}")))?;
        writer
            .write_image_data(&image.data)
            .map_err(|e| Error::Invalid(format!("png encode: {e}")))?;
    }
    Ok(out)
}

pub fn write_rgb_png(path: &Path, image: &RgbImage) -> Result<()> {
    crate::util::write_atomic(path, &encode_rgb_png(image)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn label_png_round_trip() {
        let reg = LabelRegistry::default();
        let labels = (0..64)
            .map(|i| {
                if i % 7 == 0 {
                    LabelId::BACKGROUND
                } else {
                    LabelId((i % 6) as i16)
                }
            })
            .collect();
        let img = LabelImage {
            width: 8,
            height: 8,
            labels,
        };
        let bytes = encode_label_png(&img, &reg).unwrap();
        let idx = decode_index_png(Cursor::new(bytes)).unwrap();
        assert_eq!(idx.indices[0], BACKGROUND_INDEX);
        assert_eq!(idx.indices[1], 1);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.png");
        write_label_png(&path, &img, &reg).unwrap();
        assert_eq!(read_label_png(&path).unwrap(), img);
    }

    #[test]
    fn rgb_png_rejected_as_label_source() {
        let img = RgbImage {
            width: 2,
            height: 2,
            data: vec![0; 12],
        };
        let bytes = encode_rgb_png(&img).unwrap();
        assert!(decode_index_png(Cursor::new(bytes)).is_err());
    }
}
