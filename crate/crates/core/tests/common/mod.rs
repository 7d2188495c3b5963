//! Independent reference implementations and synthetic scenes shared by the
//! integration tests. Nothing here calls into the code under test for the
//! quantity being checked.

#![allow(dead_code)]

use std::collections::VecDeque;

use labelfuse4d::camera::{RigParams, ViewCamera};
use labelfuse4d::evidence::{Mask, MaskSet, RectificationOverlay, VoteImage, VoteSource};
use labelfuse4d::geom::{self, Vec3};
use labelfuse4d::label::{LabelId, LabelRegistry};
use labelfuse4d::mesh::{AdjacencyGraph, TriMesh};
use labelfuse4d::pipeline::{FrameGeometry, MemoryEvidence, Pipeline};
use labelfuse4d::raster::RasterMap;
use labelfuse4d::synthetic::{icosphere, label_masks, noisy_labels, rigid_flow};
use labelfuse4d::{FusionWeights, LabelFrame};
use rand::Rng;

/// Potts energy computed straight from its definition.
pub fn naive_energy(unary: &[Vec<f64>], edges: &[(u32, u32)], lambda: f64, labels: &[usize]) -> f64 {
    let mut e = 0.0;
    for (v, &l) in labels.iter().enumerate() {
        e += unary[v][l];
    }
    for &(a, b) in edges {
        if labels[a as usize] != labels[b as usize] {
            e += lambda;
        }
    }
    e
}

/// Minimum energy over every labeling (`n_labels ^ n` of them).
pub fn exhaustive_min(unary: &[Vec<f64>], edges: &[(u32, u32)], lambda: f64, n_labels: usize) -> f64 {
    let n = unary.len();
    let total = n_labels.pow(n as u32);
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    for mut code in 0..total {
        for l in labels.iter_mut() {
            *l = code % n_labels;
            code /= n_labels;
        }
        best = best.min(naive_energy(unary, edges, lambda, &labels));
    }
    best
}

/// Random graph on `n` vertices with roughly `density * n*(n-1)/2` edges.
pub fn random_edges<R: Rng>(n: usize, density: f64, rng: &mut R) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) {
                edges.push((a as u32, b as u32));
            }
        }
    }
    edges
}

/// Raw evidence arrays of one view, kept apart from the vote images so the
/// oracle never reads votes through library accessors.
#[derive(Debug, Clone)]
pub struct RawViewVotes {
    pub par: Option<Vec<i16>>,
    pub opt: Option<Vec<i16>>,
    /// `pixels * n_labels` soft scores.
    pub sam: Option<Vec<f64>>,
    pub man: Option<Vec<i16>>,
}

fn hard(label: i16, l: usize) -> f64 {
    if label >= 0 && label as usize == l {
        1.0
    } else {
        0.0
    }
}

/// Unary table by looping views, vertices, pixels and labels.
pub fn unary_oracle(
    mesh: &TriMesh,
    maps: &[RasterMap],
    votes: &[RawViewVotes],
    w: &FusionWeights,
    n_labels: usize,
) -> Vec<Vec<f64>> {
    let n_views = maps.len() as f64;
    let mut out = vec![vec![0.0; n_labels]; mesh.vertex_count()];
    for (map, v) in maps.iter().zip(votes) {
        for (i, row) in out.iter_mut().enumerate() {
            for p in 0..map.len() {
                let Some(face) = map.face_at(p) else { continue };
                let f = mesh.faces()[face as usize];
                let Some(k) = f.iter().position(|&x| x as usize == i) else {
                    continue;
                };
                let u = map.bary_at(p).unwrap()[k] as f64;
                for (l, cell) in row.iter_mut().enumerate() {
                    let mut e = 0.0;
                    if let Some(par) = &v.par {
                        e += u * w.lambda_p * hard(par[p], l);
                    }
                    if let Some(opt) = &v.opt {
                        e += u * w.lambda_o * hard(opt[p], l);
                    }
                    if let Some(sam) = &v.sam {
                        e += w.lambda_s * sam[p * n_labels + l];
                    }
                    if let Some(man) = &v.man {
                        e += w.w_man * hard(man[p], l);
                    }
                    *cell -= e / n_views;
                }
            }
        }
    }
    out
}

/// Mask score by direct summation over the mask's pixels.
pub fn mask_score_oracle(label: usize, mask: &[bool], par: &[i16], opt: Option<&[i16]>, lambda_po: f64) -> f64 {
    let mut num = 0.0;
    let mut area = 0.0;
    for p in 0..mask.len() {
        if !mask[p] {
            continue;
        }
        area += 1.0;
        num += hard(par[p], label);
        if let Some(o) = opt {
            num += lambda_po * hard(o[p], label);
        }
    }
    num / (area * (1.0 + lambda_po))
}

/// Per-pixel mask votes: for every pixel and label, the sum of the scores
/// of the masks containing the pixel.
pub fn sam_oracle(masks: &[Vec<bool>], par: &[i16], opt: Option<&[i16]>, lambda_po: f64, n_labels: usize) -> Vec<f64> {
    let pixels = par.len();
    let mut out = vec![0.0; pixels * n_labels];
    for p in 0..pixels {
        for l in 0..n_labels {
            for m in masks {
                if m[p] && m.iter().any(|&b| b) {
                    out[p * n_labels + l] += mask_score_oracle(l, m, par, opt, lambda_po);
                }
            }
        }
    }
    out
}

pub fn mask_from_bools(w: usize, h: usize, bits: &[bool]) -> Mask {
    Mask::from_fn(w, h, |x, y| bits[y * w + x])
}

pub fn hard_votes(w: usize, h: usize, source: VoteSource, labels: &[i16]) -> VoteImage {
    VoteImage::hard(w, h, source, labels.iter().map(|&l| LabelId(l)).collect())
}

/// Outcome of casting the ray through one pixel center.
pub struct RayHits {
    /// Faces hit strictly inside, nearest first.
    pub nearest: Option<(u32, f64)>,
    /// Faces an exact rasterizer may legitimately report: hits within a small
    /// tolerance of a triangle edge and of the nearest depth.
    pub acceptable: Vec<u32>,
}

/// Möller-Trumbore against every face. The ray direction has unit camera
/// depth, so the hit parameter equals the camera-space depth.
pub fn ray_cast(mesh: &TriMesh, camera: &ViewCamera, x: usize, y: usize) -> RayHits {
    const EPS_B: f64 = 1e-7;
    const EPS_Z: f64 = 1e-9;
    let origin = camera.position();
    let dir = camera.ray_direction(x as f64 + 0.5, y as f64 + 0.5);
    let mut strict: Option<(u32, f64)> = None;
    let mut loose: Vec<(u32, f64)> = Vec::new();
    for fi in 0..mesh.face_count() {
        let [a, b, c] = mesh.face_vertices(fi);
        let e1 = geom::sub(b, a);
        let e2 = geom::sub(c, a);
        let pv = geom::cross(dir, e2);
        let det = geom::dot(e1, pv);
        if det.abs() < 1e-14 {
            continue;
        }
        let inv = 1.0 / det;
        let tv = geom::sub(origin, a);
        let u = geom::dot(tv, pv) * inv;
        let qv = geom::cross(tv, e1);
        let v = geom::dot(dir, qv) * inv;
        let t = geom::dot(e2, qv) * inv;
        let w0 = 1.0 - u - v;
        if t <= 0.0 {
            continue;
        }
        if u >= -EPS_B && v >= -EPS_B && w0 >= -EPS_B {
            loose.push((fi as u32, t));
            if u > EPS_B && v > EPS_B && w0 > EPS_B && strict.is_none_or(|(_, d)| t < d) {
                strict = Some((fi as u32, t));
            }
        }
    }
    let floor = loose.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
    let acceptable = loose
        .iter()
        .filter(|h| h.1 <= floor * (1.0 + EPS_Z) || strict.is_some_and(|(_, d)| h.1 <= d * (1.0 + EPS_Z)))
        .map(|h| h.0)
        .collect();
    RayHits {
        nearest: strict,
        acceptable,
    }
}

/// First `count` vertices of a breadth-first search from `seed`.
pub fn bfs_patch(graph: &AdjacencyGraph, seed: usize, count: usize) -> Vec<usize> {
    let mut seen = vec![false; graph.vertex_count()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([seed]);
    seen[seed] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        if order.len() == count {
            break;
        }
        for &u in graph.neighbors(v) {
            if !seen[u as usize] {
                seen[u as usize] = true;
                queue.push_back(u as usize);
            }
        }
    }
    order
}

/// Icosphere with a two-label split, and a pipeline whose rig is fitted to it.
pub struct SphereScene {
    pub mesh: TriMesh,
    pub truth: Vec<LabelId>,
    pub pipeline: Pipeline,
    pub axis: Vec3,
}

pub const SPLIT_AXIS: Vec3 = [0.31, 0.9, 0.22];

pub fn sphere_scene(level: u32, image_size: usize) -> SphereScene {
    let mesh = icosphere(level, 1.0);
    let axis = geom::normalize(SPLIT_AXIS);
    let truth = labelfuse4d::synthetic::hemisphere_labels(&mesh, axis, LabelId::UPPER, LabelId::LOWER);
    let params = RigParams {
        image_size,
        ..RigParams::default()
    };
    let rig = params.build_for(mesh.recenter().0.bounding_radius()).unwrap();
    let pipeline = Pipeline::new(LabelRegistry::default(), rig, FusionWeights::default()).unwrap();
    SphereScene {
        mesh,
        truth,
        pipeline,
        axis,
    }
}

/// Parser votes with iid pixel noise for every view of `geo`.
pub fn add_parser_evidence<R: Rng>(
    ev: &mut MemoryEvidence,
    geo: &FrameGeometry,
    truth: &[LabelId],
    n_labels: usize,
    noise: f64,
    rng: &mut R,
) {
    for (n, map) in geo.maps.iter().enumerate() {
        let img = noisy_labels(map, &geo.mesh, truth, n_labels, noise, rng);
        ev.parser
            .insert((geo.index, n), VoteImage::from_label_image(&img, VoteSource::Par));
    }
}

/// Masks cut from the clean label rendering, with boundary jitter.
pub fn add_mask_evidence<R: Rng>(
    ev: &mut MemoryEvidence,
    geo: &FrameGeometry,
    truth: &[LabelId],
    jitter: f64,
    rng: &mut R,
) {
    let frame = LabelFrame::new(geo.index, truth.to_vec());
    for (n, img) in geo.render(&frame).unwrap().iter().enumerate() {
        ev.masks.insert((geo.index, n), label_masks(img, jitter, rng));
    }
}

/// Exact flow from `prev` to `next` given the motion of the input meshes
/// `x -> rotation * x`, accounting for both frames' recentering.
pub fn add_rigid_flow(
    ev: &mut MemoryEvidence,
    pipeline: &Pipeline,
    prev: &FrameGeometry,
    next: &FrameGeometry,
    rotation: &[[f64; 3]; 3],
) {
    let t = geom::sub(geom::mat_vec(rotation, prev.offset), next.offset);
    for (n, cam) in pipeline.rig.cameras.iter().enumerate() {
        let flow = rigid_flow(&prev.maps[n], cam, rotation, t, Some(&next.maps[n]));
        ev.flow.insert((next.index, n), flow);
    }
}

/// Empty mask sets so that frames can run with the mask source enabled.
pub fn add_empty_masks(ev: &mut MemoryEvidence, frame: usize, views: usize, size: usize) {
    for n in 0..views {
        ev.masks
            .insert((frame, n), MaskSet::new(size, size, Vec::new()).unwrap());
    }
}

/// Overlay labeling every pixel whose face touches a vertex of `patch`.
pub fn patch_overlay(map: &RasterMap, mesh: &TriMesh, patch: &[usize], label: LabelId) -> RectificationOverlay {
    let mut inside = vec![false; mesh.vertex_count()];
    patch.iter().for_each(|&v| inside[v] = true);
    let mut o = RectificationOverlay::default();
    let w = map.width();
    for p in 0..map.len() {
        if let Some(f) = map.face_at(p) {
            if mesh.faces()[f as usize].iter().any(|&v| inside[v as usize]) {
                o.push((p % w) as i64, (p / w) as i64, label);
            }
        }
    }
    o
}
