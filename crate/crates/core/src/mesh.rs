//! Triangle meshes and their vertex adjacency.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

/// Validated triangle mesh. Coordinates are in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    colors: Option<Vec<[f32; 3]>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>, colors: Option<Vec<[f32; 3]>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidMesh("mesh has no vertices".into()));
        }
        if faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        if let Some((i, v)) = vertices
            .iter()
            .enumerate()
            .find(|(_, v)| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidMesh(format!(
                "vertex {i} has a non-finite coordinate {v:?}"
            )));
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex: {f:?}")));
            }
        }
        if let Some(c) = &colors {
            if c.len() != n {
                return Err(Error::InvalidMesh(format!("{} colors for {n} vertices", c.len())));
            }
            if c.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMesh("non-finite vertex color".into()));
            }
        }
        Ok(TriMesh {
            vertices,
            faces,
            colors,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn colors(&self) -> Option<&[[f32; 3]]> {
        self.colors.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn with_colors(mut self, colors: Vec<[f32; 3]>) -> Result<Self> {
        self.colors = Some(colors);
        TriMesh::new(self.vertices, self.faces, self.colors)
    }

    pub fn face_vertices(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_center(&self) -> Vec3 {
        let (lo, hi) = self.bounds();
        [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])]
    }

    /// Radius of the sphere around the bbox center that encloses the bbox.
    pub fn bounding_radius(&self) -> f64 {
        let (lo, hi) = self.bounds();
        0.5 * geom::norm(geom::sub(hi, lo))
    }

    /// Moves the bbox center to the origin. Adding the returned offset to the
    /// new vertices restores the original coordinates.
    pub fn recenter(&self) -> (TriMesh, Vec3) {
        let offset = self.bbox_center();
        (self.translated(geom::scale(offset, -1.0)), offset)
    }

    pub fn translated(&self, t: Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| geom::add(v, t)).collect(),
            faces: self.faces.clone(),
            colors: self.colors.clone(),
        }
    }

    /// Applies `v -> R v + t` to every vertex.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], t: Vec3) -> TriMesh {
        TriMesh {
            vertices: self
                .vertices
                .iter()
                .map(|&v| geom::add(geom::mat_vec(rotation, v), t))
                .collect(),
            faces: self.faces.clone(),
            colors: self.colors.clone(),
        }
    }

    /// Same topology with new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<TriMesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::LengthMismatch {
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        TriMesh::new(vertices, self.faces.clone(), self.colors.clone())
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.face_vertices(face);
        geom::triangle_area(a, b, c)
    }
}

/// Undirected vertex graph induced by mesh edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    n_vertices: usize,
    /// Sorted unique pairs with `i < j`.
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl AdjacencyGraph {
    pub fn from_edges(n_vertices: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut edges: Vec<(u32, u32)> = pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();

        let mut degree = vec![0usize; n_vertices];
        for &(a, b) in &edges {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = vec![0usize; n_vertices + 1];
        for i in 0..n_vertices {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0u32; offsets[n_vertices]];
        for &(a, b) in &edges {
            neighbors[fill[a as usize]] = b;
            fill[a as usize] += 1;
            neighbors[fill[b as usize]] = a;
            fill[b as usize] += 1;
        }
        for i in 0..n_vertices {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        AdjacencyGraph {
            n_vertices,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n_vertices
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n_vertices && self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }
}

/// One edge per unique unordered vertex pair that shares a face edge.
pub fn build_adjacency(mesh: &TriMesh) -> AdjacencyGraph {
    let pairs = mesh
        .faces()
        .iter()
        .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]);
    AdjacencyGraph::from_edges(mesh.vertex_count(), pairs)
}

/// Connected components of the vertex graph; returns a component id per vertex.
pub fn connected_components(graph: &AdjacencyGraph) -> Vec<usize> {
    let n = graph.vertex_count();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        stack.push(s);
        while let Some(v) = stack.pop() {
            for &u in graph.neighbors(v) {
                if comp[u as usize] == usize::MAX {
                    comp[u as usize] = next;
                    stack.push(u as usize);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Vertices reachable from `seeds` within `hops` edges.
pub fn grow_region(graph: &AdjacencyGraph, seeds: &[usize], hops: usize) -> Vec<usize> {
    let mut seen: HashSet<usize> = seeds.iter().copied().collect();
    let mut frontier: Vec<usize> = seeds.to_vec();
    for _ in 0..hops {
        let mut next = Vec::new();
        for &v in &frontier {
            for &u in graph.neighbors(v) {
                if seen.insert(u as usize) {
                    next.push(u as usize);
                }
            }
        }
        frontier = next;
    }
    let mut out: Vec<usize> = seen.into_iter().collect();
    out.sort_unstable();
    out
}
