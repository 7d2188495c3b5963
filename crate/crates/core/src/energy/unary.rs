use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evidence::VoteImage;
use crate::label::LabelId;
use crate::mesh::TriMesh;
use crate::raster::RasterMap;

use super::FusionWeights;

/// Row-major `n_vertices x n_labels` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryTable {
    n_labels: usize,
    data: Vec<f64>,
}

impl UnaryTable {
    pub fn zeros(n_vertices: usize, n_labels: usize) -> Self {
        UnaryTable {
            n_labels,
            data: vec![0.0; n_vertices * n_labels],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_labels = rows.first().map_or(0, Vec::len);
        if n_labels == 0 {
            return Err(Error::EmptyLabelSet);
        }
        let mut data = Vec::with_capacity(rows.len() * n_labels);
        for r in rows {
            if r.len() != n_labels {
                return Err(Error::LengthMismatch {
                    expected: n_labels,
                    found: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("non-finite unary cost".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(UnaryTable { n_labels, data })
    }

    pub fn from_flat(n_labels: usize, data: Vec<f64>) -> Result<Self> {
        if n_labels == 0 {
            return Err(Error::EmptyLabelSet);
        }
        if !data.len().is_multiple_of(n_labels) {
            return Err(Error::LengthMismatch {
                expected: (data.len() / n_labels + 1) * n_labels,
                found: data.len(),
            });
        }
        Ok(UnaryTable { n_labels, data })
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn n_vertices(&self) -> usize {
        self.data.len().checked_div(self.n_labels).unwrap_or(0)
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.n_labels..(v + 1) * self.n_labels]
    }

    #[inline]
    pub fn row_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.data[v * self.n_labels..(v + 1) * self.n_labels]
    }

    #[inline]
    pub fn get(&self, v: usize, label: usize) -> f64 {
        self.data[v * self.n_labels + label]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> UnaryTable {
        UnaryTable {
            n_labels: self.n_labels,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &UnaryTable) -> Result<()> {
        if other.n_labels != self.n_labels || other.data.len() != self.data.len() {
            return Err(Error::LengthMismatch {
                expected: self.data.len(),
                found: other.data.len(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}

/// Vote images available for one view; absent sources contribute nothing.
#[derive(Debug, Clone, Default)]
pub struct ViewVotes {
    pub par: Option<VoteImage>,
    pub opt: Option<VoteImage>,
    pub sam: Option<VoteImage>,
    pub man: Option<VoteImage>,
}

impl ViewVotes {
    pub fn check(&self, map: &RasterMap) -> Result<()> {
        for v in [&self.par, &self.opt, &self.sam, &self.man].into_iter().flatten() {
            v.check_size(map.width(), map.height())?;
        }
        Ok(())
    }
}

/// Raw unary costs: for every view and every covered pixel of a face
/// incident to vertex `i`, subtracts the weighted votes of that pixel. The
/// parser and flow votes are weighted by the vertex's barycentric coordinate
/// `u` at the pixel, mask votes by 1 and manual votes by `w_man`. The sum
/// over views is divided by the number of views.
pub fn accumulate_unary(
    mesh: &TriMesh,
    maps: &[RasterMap],
    votes: &[ViewVotes],
    weights: &FusionWeights,
    n_labels: usize,
) -> Result<UnaryTable> {
    if maps.len() != votes.len() {
        return Err(Error::LengthMismatch {
            expected: maps.len(),
            found: votes.len(),
        });
    }
    if n_labels == 0 {
        return Err(Error::EmptyLabelSet);
    }
    weights.validate()?;
    for (m, v) in maps.iter().zip(votes) {
        v.check(m)?;
    }
    let n_vertices = mesh.vertex_count();
    let n_views = maps.len();
    let per_view: Vec<UnaryTable> = maps
        .par_iter()
        .zip(votes.par_iter())
        .map(|(map, v)| view_unary(mesh, map, v, weights, n_labels, n_views))
        .collect();
    // fixed view order keeps the sum bit-reproducible
    let mut table = UnaryTable::zeros(n_vertices, n_labels);
    for t in &per_view {
        table.add_assign(t)?;
    }
    Ok(table)
}

/// Contribution of a single view out of `n_views` to the raw unary table.
/// Sizes are not checked here; see [`ViewVotes::check`].
pub fn view_unary(
    mesh: &TriMesh,
    map: &RasterMap,
    votes: &ViewVotes,
    w: &FusionWeights,
    n_labels: usize,
    n_views: usize,
) -> UnaryTable {
    let mut table = UnaryTable::zeros(mesh.vertex_count(), n_labels);
    let faces = mesh.faces();
    let scale = -1.0 / n_views as f64;
    let mut uniform = vec![0.0; n_labels];
    let mut barycentric = vec![0.0; n_labels];
    for c in map.coverage() {
        uniform.iter_mut().for_each(|x| *x = 0.0);
        barycentric.iter_mut().for_each(|x| *x = 0.0);
        if let Some(par) = &votes.par {
            par.accumulate(c.pixel, w.lambda_p, &mut barycentric);
        }
        if let Some(opt) = &votes.opt {
            opt.accumulate(c.pixel, w.lambda_o, &mut barycentric);
        }
        if let Some(sam) = &votes.sam {
            sam.accumulate(c.pixel, w.lambda_s, &mut uniform);
        }
        if let Some(man) = &votes.man {
            man.accumulate(c.pixel, w.w_man, &mut uniform);
        }
        let f = faces[c.face as usize];
        for (&v, &u) in f.iter().zip(&c.bary) {
            let u = u as f64;
            let row = table.row_mut(v as usize);
            for (r, (&b, &m)) in row.iter_mut().zip(barycentric.iter().zip(&uniform)) {
                *r += scale * (u * b + m);
            }
        }
    }
    table
}

/// Per-row min-max scaling to `[0, 1]`; constant rows become all zero.
pub fn normalize_unary(raw: &UnaryTable) -> UnaryTable {
    let mut out = raw.clone();
    for v in 0..out.n_vertices() {
        let row = out.row_mut(v);
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if span > 0.0 {
            row.iter_mut().for_each(|x| *x = (*x - lo) / span);
        } else {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    out
}

/// Cheapest label per vertex (smallest id on ties).
pub fn argmin_labels(table: &UnaryTable) -> Vec<LabelId> {
    (0..table.n_vertices())
        .map(|v| {
            let row = table.row(v);
            let mut best = 0;
            for l in 1..row.len() {
                if row[l] < row[best] {
                    best = l;
                }
            }
            LabelId::from_index(best)
        })
        .collect()
}
