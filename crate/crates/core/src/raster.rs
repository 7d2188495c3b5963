//! Z-buffered software rasterization into per-pixel coverage maps, plus
//! label and color rendering from those maps.
//!
//! Pixels are sampled at their centers `(x + 0.5, y + 0.5)`. Barycentric
//! coordinates are screen-space; depth is the exact camera-space depth of the
//! surface point under the pixel center. Faces are not culled by orientation.
//! On equal depth the face with the lower index is kept.

use rayon::prelude::*;

use crate::camera::{ViewCamera, ViewRig};
use crate::error::{Error, Result};
use crate::frame::LabelFrame;
use crate::label::LabelId;
use crate::mesh::TriMesh;

/// Faces with a vertex closer than this to the camera plane are skipped.
const NEAR_PLANE: f64 = 1e-6;

pub const NO_FACE: u32 = u32::MAX;

/// Per-pixel nearest face, barycentric coordinates and depth for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMap {
    width: usize,
    height: usize,
    face: Vec<u32>,
    bary: Vec<[f32; 3]>,
    depth: Vec<f32>,
}

/// One covered pixel of a raster map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub pixel: usize,
    pub face: u32,
    pub bary: [f32; 3],
    pub depth: f32,
}

impl RasterMap {
    pub fn empty(width: usize, height: usize) -> Self {
        RasterMap {
            width,
            height,
            face: vec![NO_FACE; width * height],
            bary: vec![[0.0; 3]; width * height],
            depth: vec![f32::INFINITY; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.face.len()
    }

    pub fn is_empty(&self) -> bool {
        self.face.is_empty()
    }

    #[inline]
    pub fn face_at(&self, pixel: usize) -> Option<u32> {
        let f = self.face[pixel];
        (f != NO_FACE).then_some(f)
    }

    #[inline]
    pub fn is_covered(&self, pixel: usize) -> bool {
        self.face[pixel] != NO_FACE
    }

    pub fn bary_at(&self, pixel: usize) -> Option<[f32; 3]> {
        self.face_at(pixel).map(|_| self.bary[pixel])
    }

    pub fn depth_at(&self, pixel: usize) -> Option<f32> {
        self.face_at(pixel).map(|_| self.depth[pixel])
    }

    pub fn covered_count(&self) -> usize {
        self.face.iter().filter(|&&f| f != NO_FACE).count()
    }

    pub fn coverage(&self) -> impl Iterator<Item = Coverage> + '_ {
        self.face
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != NO_FACE)
            .map(|(pixel, &face)| Coverage {
                pixel,
                face,
                bary: self.bary[pixel],
                depth: self.depth[pixel],
            })
    }

    pub fn coverage_mask(&self) -> Vec<bool> {
        self.face.iter().map(|&f| f != NO_FACE).collect()
    }

    pub fn same_size(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                found_w: width,
                found_h: height,
            });
        }
        Ok(())
    }
}

#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Renders face coverage of `mesh` as seen by `camera`.
pub fn rasterize(mesh: &TriMesh, camera: &ViewCamera) -> RasterMap {
    let (w, h) = (camera.width, camera.height);
    let mut map = RasterMap::empty(w, h);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let projected: Vec<(f64, f64, f64)> = mesh.vertices().iter().map(|&v| camera.project(v)).collect();

    for (fi, f) in mesh.faces().iter().enumerate() {
        let [a, b, c] = [
            projected[f[0] as usize],
            projected[f[1] as usize],
            projected[f[2] as usize],
        ];
        if a.2 <= NEAR_PLANE || b.2 <= NEAR_PLANE || c.2 <= NEAR_PLANE {
            continue;
        }
        let area = edge(a.0, a.1, b.0, b.1, c.0, c.1);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let min_u = a.0.min(b.0).min(c.0);
        let max_u = a.0.max(b.0).max(c.0);
        let min_v = a.1.min(b.1).min(c.1);
        let max_v = a.1.max(b.1).max(c.1);
        let x0 = (min_u - 0.5).ceil().max(0.0);
        let x1 = (max_u - 0.5).floor().min(w as f64 - 1.0);
        let y0 = (min_v - 0.5).ceil().max(0.0);
        let y1 = (max_v - 0.5).floor().min(h as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        let inv_area = 1.0 / area;
        let (inv_za, inv_zb, inv_zc) = (1.0 / a.2, 1.0 / b.2, 1.0 / c.2);
        for y in y0 as usize..=y1 as usize {
            let py = y as f64 + 0.5;
            for x in x0 as usize..=x1 as usize {
                let px = x as f64 + 0.5;
                let w0 = edge(b.0, b.1, c.0, c.1, px, py) * inv_area;
                let w1 = edge(c.0, c.1, a.0, a.1, px, py) * inv_area;
                let w2 = edge(a.0, a.1, b.0, b.1, px, py) * inv_area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let depth = 1.0 / (w0 * inv_za + w1 * inv_zb + w2 * inv_zc);
                let p = y * w + x;
                // depths equal up to rounding count as ties; the earlier face stays
                if depth < zbuf[p] * (1.0 - 1e-12) {
                    zbuf[p] = depth;
                    let s = w0 + w1 + w2;
                    let (b0, b1) = ((w0 / s) as f32, (w1 / s) as f32);
                    let b2 = (1.0 - b0 as f64 - b1 as f64).max(0.0) as f32;
                    map.face[p] = fi as u32;
                    map.bary[p] = [b0, b1, b2];
                    map.depth[p] = depth as f32;
                }
            }
        }
    }
    map
}

/// Rasterizes every camera of the rig in parallel.
pub fn rasterize_rig(mesh: &TriMesh, rig: &ViewRig) -> Vec<RasterMap> {
    rig.cameras.par_iter().map(|cam| rasterize(mesh, cam)).collect()
}

/// Grid of labels with `-1` as background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<LabelId>,
}

impl LabelImage {
    pub fn filled(width: usize, height: usize, label: LabelId) -> Self {
        LabelImage {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> LabelId {
        self.labels[y * self.width + x]
    }
}

/// 8-bit RGB image, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Corner of the face with the largest barycentric weight (first on ties).
#[inline]
pub fn dominant_corner(bary: [f32; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if bary[k] > bary[best] {
            best = k;
        }
    }
    best
}

/// Each covered pixel takes the label of its face's dominant vertex.
pub fn render_labels(map: &RasterMap, mesh: &TriMesh, labels: &LabelFrame) -> Result<LabelImage> {
    if labels.len() != mesh.vertex_count() {
        return Err(Error::LengthMismatch {
            expected: mesh.vertex_count(),
            found: labels.len(),
        });
    }
    let faces = mesh.faces();
    let mut out = LabelImage::filled(map.width, map.height, LabelId::BACKGROUND);
    for c in map.coverage() {
        let f = faces[c.face as usize];
        out.labels[c.pixel] = labels.labels[f[dominant_corner(c.bary)] as usize];
    }
    Ok(out)
}

/// Barycentric interpolation of vertex colors; background is black.
pub fn render_color(map: &RasterMap, mesh: &TriMesh) -> Result<RgbImage> {
    let colors = mesh
        .colors()
        .ok_or_else(|| Error::InvalidMesh("mesh has no vertex colors".into()))?;
    let faces = mesh.faces();
    let mut data = vec![0u8; 3 * map.width * map.height];
    for c in map.coverage() {
        let f = faces[c.face as usize];
        for ch in 0..3 {
            let v: f32 = (0..3).map(|k| c.bary[k] * colors[f[k] as usize][ch]).sum();
            data[3 * c.pixel + ch] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    Ok(RgbImage {
        width: map.width,
        height: map.height,
        data,
    })
}

/// Pixels whose stored face contains `vertex`, with that vertex's
/// barycentric weight at each pixel.
pub fn pixels_of_vertex(map: &RasterMap, mesh: &TriMesh, vertex: usize) -> Vec<(usize, f64)> {
    let faces = mesh.faces();
    let v = vertex as u32;
    map.coverage()
        .filter_map(|c| {
            let f = faces[c.face as usize];
            f.iter().position(|&i| i == v).map(|k| (c.pixel, c.bary[k] as f64))
        })
        .collect()
}
