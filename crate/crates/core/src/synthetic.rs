//! Procedural scenes with known ground truth, used by tests, benchmarks and
//! the fixture generator.

use std::collections::HashMap;

use rand::Rng;

use crate::camera::ViewCamera;
use crate::evidence::{FlowField, Mask, MaskSet};
use crate::frame::LabelFrame;
use crate::geom::{self, Vec3};
use crate::label::LabelId;
use crate::mesh::TriMesh;
use crate::raster::{render_labels, LabelImage, RasterMap};

/// Subdivided icosahedron. Level `s` has `10 * 4^s + 2` vertices and
/// `20 * 4^s` faces. Vertex colors encode the normal direction.
pub fn icosphere(level: u32, radius: f64) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(geom::normalize)
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = geom::normalize(geom::scale(geom::add(verts[a as usize], verts[b as usize]), 0.5));
                verts.push(m);
                (verts.len() - 1) as u32
            })
        };
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let colors = verts
        .iter()
        .map(|v| {
            [
                (0.5 + 0.5 * v[0]) as f32,
                (0.5 + 0.5 * v[1]) as f32,
                (0.5 + 0.5 * v[2]) as f32,
            ]
        })
        .collect();
    let verts = verts.into_iter().map(|v| geom::scale(v, radius)).collect();
    TriMesh::new(verts, faces, Some(colors)).expect("icosphere is a valid mesh")
}

/// Labels vertices by the side of the plane through the origin with normal
/// `axis`: `positive` where `dot(v, axis) >= 0`, else `negative`.
pub fn hemisphere_labels(mesh: &TriMesh, axis: Vec3, positive: LabelId, negative: LabelId) -> Vec<LabelId> {
    mesh.vertices()
        .iter()
        .map(|&v| if geom::dot(v, axis) >= 0.0 { positive } else { negative })
        .collect()
}

/// Renders ground-truth labels and replaces each covered pixel, with
/// probability `noise`, by a uniformly drawn different label.
pub fn noisy_labels<R: Rng>(
    map: &RasterMap,
    mesh: &TriMesh,
    truth: &[LabelId],
    n_labels: usize,
    noise: f64,
    rng: &mut R,
) -> LabelImage {
    let frame = LabelFrame::new(0, truth.to_vec());
    let mut img = render_labels(map, mesh, &frame).expect("truth matches mesh");
    if n_labels < 2 {
        return img;
    }
    for l in img.labels.iter_mut() {
        let Some(cur) = l.index() else { continue };
        if rng.random_bool(noise) {
            let mut other = rng.random_range(0..n_labels - 1);
            if other >= cur {
                other += 1;
            }
            *l = LabelId::from_index(other);
        }
    }
    img
}

/// One mask per label visible in `truth`, built from the rendered labels.
/// Pixels on a label boundary (4-neighborhood) move to the neighboring
/// label's mask with probability `jitter`.
pub fn label_masks<R: Rng>(rendered: &LabelImage, jitter: f64, rng: &mut R) -> MaskSet {
    let (w, h) = (rendered.width, rendered.height);
    let mut assigned = rendered.labels.clone();
    for y in 0..h {
        for x in 0..w {
            let l = rendered.labels[y * w + x];
            if l.is_background() {
                continue;
            }
            let mut neighbors = Vec::new();
            if x > 0 {
                neighbors.push(rendered.labels[y * w + x - 1]);
            }
            if x + 1 < w {
                neighbors.push(rendered.labels[y * w + x + 1]);
            }
            if y > 0 {
                neighbors.push(rendered.labels[(y - 1) * w + x]);
            }
            if y + 1 < h {
                neighbors.push(rendered.labels[(y + 1) * w + x]);
            }
            if let Some(&o) = neighbors.iter().find(|n| !n.is_background() && **n != l) {
                if rng.random_bool(jitter) {
                    assigned[y * w + x] = o;
                }
            }
        }
    }
    let mut present: Vec<LabelId> = assigned.iter().copied().filter(|l| !l.is_background()).collect();
    present.sort();
    present.dedup();
    let masks = present
        .into_iter()
        .map(|l| Mask::from_fn(w, h, |x, y| assigned[y * w + x] == l))
        .collect();
    MaskSet::new(w, h, masks).expect("masks match the image size")
}

/// Flow of every covered pixel of `map` under the rigid motion
/// `x -> rotation * x + translation`, computed by back-projecting the pixel
/// center with its stored depth. When `next` is given, points that end up
/// hidden (depth larger than the next frame's surface by more than 1% plus a
/// pixel's worth) are sent far outside the image so they cast no vote.
pub fn rigid_flow(
    map: &RasterMap,
    camera: &ViewCamera,
    rotation: &[[f64; 3]; 3],
    translation: Vec3,
    next: Option<&RasterMap>,
) -> FlowField {
    let (w, h) = (map.width(), map.height());
    let mut flow = FlowField::zeros(w, h);
    let rt = geom::transpose(&camera.rotation);
    for c in map.coverage() {
        let (x, y) = ((c.pixel % w) as f64, (c.pixel / w) as f64);
        let z = c.depth as f64;
        let pc = [
            (x + 0.5 - camera.principal.0) / camera.focal.0 * z,
            (y + 0.5 - camera.principal.1) / camera.focal.1 * z,
            z,
        ];
        let world = geom::mat_vec(&rt, geom::sub(pc, camera.translation));
        let moved = geom::add(geom::mat_vec(rotation, world), translation);
        let (u, v, depth) = camera.project(moved);
        let mut d = [(u - x - 0.5) as f32, (v - y - 0.5) as f32];
        if let Some(next) = next {
            let tx = (u - 0.5).round();
            let ty = (v - 0.5).round();
            let visible = tx >= 0.0
                && ty >= 0.0
                && (tx as usize) < w
                && (ty as usize) < h
                && next
                    .depth_at(ty as usize * w + tx as usize)
                    .is_some_and(|s| depth <= s as f64 * 1.01 + 2.0 * depth / camera.focal.0);
            if !visible {
                d = [1e6, 1e6];
            }
        }
        flow.data[c.pixel] = d;
    }
    flow
}

/// Vertex-level accuracy against ground truth.
pub fn vertex_accuracy(pred: &[LabelId], truth: &[LabelId]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let ok = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    ok as f64 / truth.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_adjacency;

    #[test]
    fn icosphere_counts() {
        for level in 0..4 {
            let m = icosphere(level, 1.0);
            let f = 20 * 4usize.pow(level);
            assert_eq!(m.face_count(), f);
            assert_eq!(m.vertex_count(), f / 2 + 2);
            let g = build_adjacency(&m);
            assert_eq!(g.edge_count(), 3 * f / 2);
            for v in m.vertices() {
                assert!((geom::norm(*v) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn icosphere_faces_point_outward() {
        let m = icosphere(2, 1.0);
        for i in 0..m.face_count() {
            let [a, b, c] = m.face_vertices(i);
            let n = geom::cross(geom::sub(b, a), geom::sub(c, a));
            let centroid = geom::scale(geom::add(geom::add(a, b), c), 1.0 / 3.0);
            assert!(geom::dot(n, centroid) > 0.0);
        }
    }
}
