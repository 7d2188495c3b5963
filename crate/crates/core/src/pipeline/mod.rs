//! Per-frame fusion, temporal propagation, manual rectification and garment
//! extraction, plus the checkpointed sequence runner.

mod garments;
mod sequence;
mod source;

pub use garments::{extract_garments, face_label, GarmentMesh};
pub use sequence::{load_state, output_paths, FrameSummary, OutputPaths, RunState, SequenceRunner};
pub use source::{evidence_path, DirEvidence, EvidenceSource, MemoryEvidence};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::camera::ViewRig;
use crate::energy::{
    alpha_expansion, normalize_unary, view_unary, EnergyProblem, ExpansionOptions, FusionWeights, TraceEntry,
    UnaryTable, ViewVotes,
};
use crate::error::{Error, Result};
use crate::evidence::{
    filter_masks, manual_votes, sam_votes, warp_labels, MaskFilter, RectificationOverlay, VoteImage, VoteSource,
};
use crate::frame::LabelFrame;
use crate::geom::Vec3;
use crate::label::{LabelId, LabelRegistry};
use crate::mesh::{build_adjacency, AdjacencyGraph, TriMesh};
use crate::raster::{rasterize_rig, render_labels, LabelImage, RasterMap};

/// Which automatic vote sources take part in frames after the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub par: bool,
    pub opt: bool,
    pub sam: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            par: true,
            opt: true,
            sam: true,
        }
    }
}

impl Toggles {
    pub const PAR_ONLY: Toggles = Toggles {
        par: true,
        opt: false,
        sam: false,
    };

    /// Parses a comma-separated subset of `par`, `opt`, `sam` (or `all`).
    pub fn parse(spec: &str) -> Result<Self> {
        let mut t = Toggles {
            par: false,
            opt: false,
            sam: false,
        };
        for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "par" => t.par = true,
                "opt" => t.opt = true,
                "sam" => t.sam = true,
                "all" => t = Toggles::default(),
                other => return Err(Error::Invalid(format!("unknown source toggle {other:?}"))),
            }
        }
        if !(t.par || t.opt || t.sam) {
            return Err(Error::Invalid("at least one vote source must be enabled".into()));
        }
        Ok(t)
    }
}

/// A frame's mesh centered at the origin, its vertex graph, and its coverage
/// in every rig view.
#[derive(Debug, Clone)]
pub struct FrameGeometry {
    pub index: usize,
    pub mesh: TriMesh,
    /// Added to `mesh` to get back the input coordinates.
    pub offset: Vec3,
    pub adjacency: AdjacencyGraph,
    pub maps: Vec<RasterMap>,
}

impl FrameGeometry {
    pub fn new(index: usize, mesh: &TriMesh, rig: &ViewRig) -> Self {
        let (mesh, offset) = mesh.recenter();
        let adjacency = build_adjacency(&mesh);
        let maps = rasterize_rig(&mesh, rig);
        FrameGeometry {
            index,
            mesh,
            offset,
            adjacency,
            maps,
        }
    }

    pub fn original_mesh(&self) -> TriMesh {
        self.mesh.translated(self.offset)
    }

    pub fn render(&self, labels: &LabelFrame) -> Result<Vec<LabelImage>> {
        self.maps
            .par_iter()
            .map(|m| render_labels(m, &self.mesh, labels))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_index: usize,
    pub round1: LabelFrame,
    /// Present only after a rectification with a non-empty overlay.
    pub round2: Option<LabelFrame>,
    /// Rendered final labels, one image per view.
    pub renders: Vec<LabelImage>,
    pub trace: Vec<TraceEntry>,
    pub trace_round2: Option<Vec<TraceEntry>>,
    pub energy: f64,
    /// Vertices whose final label differs from the optimization seed.
    pub moved: usize,
}

impl FrameResult {
    pub fn labels(&self) -> &LabelFrame {
        self.round2.as_ref().unwrap_or(&self.round1)
    }

    pub fn rectified(&self) -> bool {
        self.round2.is_some()
    }

    /// Result for stored labels, e.g. when resuming. Traces are empty.
    pub fn from_labels(geo: &FrameGeometry, round1: LabelFrame, round2: Option<LabelFrame>) -> Result<Self> {
        let renders = geo.render(round2.as_ref().unwrap_or(&round1))?;
        Ok(FrameResult {
            frame_index: geo.index,
            round1,
            round2,
            renders,
            trace: Vec::new(),
            trace_round2: None,
            energy: f64::NAN,
            moved: 0,
        })
    }
}

/// Raw (un-normalized) unary table of a frame and the seed labeling derived
/// from the flow-warped previous labels (`-1` where no warped label lands).
#[derive(Debug, Clone)]
pub struct FrameUnary {
    pub raw: UnaryTable,
    pub seed: Vec<LabelId>,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub registry: LabelRegistry,
    pub rig: ViewRig,
    pub weights: FusionWeights,
    pub toggles: Toggles,
    pub expansion: ExpansionOptions,
    pub mask_filter: MaskFilter,
}

impl Pipeline {
    pub fn new(registry: LabelRegistry, rig: ViewRig, weights: FusionWeights) -> Result<Self> {
        registry.validate()?;
        weights.validate()?;
        if rig.is_empty() {
            return Err(Error::InvalidRig("rig has no cameras".into()));
        }
        let (w, h) = rig.image_size();
        Ok(Pipeline {
            registry,
            rig,
            weights,
            toggles: Toggles::default(),
            expansion: ExpansionOptions::default(),
            mask_filter: MaskFilter::for_resolution(w, h),
        })
    }

    pub fn with_toggles(mut self, toggles: Toggles) -> Self {
        self.toggles = toggles;
        self
    }

    pub fn n_labels(&self) -> usize {
        self.registry.len()
    }

    pub fn geometry(&self, index: usize, mesh: &TriMesh) -> FrameGeometry {
        FrameGeometry::new(index, mesh, &self.rig)
    }

    /// Manual overlays of every view, validated against image size and
    /// registry. `None` where a view has no overlay file.
    pub fn load_overlays(
        &self,
        frame: usize,
        evidence: &dyn EvidenceSource,
    ) -> Result<Vec<Option<RectificationOverlay>>> {
        let (w, h) = self.rig.image_size();
        (0..self.rig.len())
            .map(|n| {
                let o = evidence.manual(frame, n)?;
                if let Some(o) = &o {
                    o.validate(w, h, &self.registry)?;
                }
                Ok(o)
            })
            .collect()
    }

    /// Raw unary of a frame. Without `prev_renders` (first frame) only parser
    /// votes are used; otherwise the enabled sources of `self.toggles`.
    /// Manual votes are added when `overlays` is given.
    pub fn frame_unary(
        &self,
        geo: &FrameGeometry,
        prev_renders: Option<&[LabelImage]>,
        evidence: &dyn EvidenceSource,
        overlays: Option<&[Option<RectificationOverlay>]>,
    ) -> Result<FrameUnary> {
        let n_views = self.rig.len();
        let n_labels = self.n_labels();
        if geo.maps.len() != n_views {
            return Err(Error::LengthMismatch {
                expected: n_views,
                found: geo.maps.len(),
            });
        }
        if let Some(p) = prev_renders {
            if p.len() != n_views {
                return Err(Error::LengthMismatch {
                    expected: n_views,
                    found: p.len(),
                });
            }
        }
        let k = geo.index;
        let first = prev_renders.is_none();
        let use_par = first || self.toggles.par;
        let use_opt = !first && self.toggles.opt;
        let use_sam = !first && self.toggles.sam;
        let seed_weights = FusionWeights {
            lambda_p: 0.0,
            lambda_o: 1.0,
            lambda_s: 0.0,
            lambda_po: 0.0,
            lambda_b: 0.0,
            w_man: 1.0,
        };

        let per_view: Vec<(UnaryTable, Option<UnaryTable>)> = (0..n_views)
            .into_par_iter()
            .map(|n| -> Result<_> {
                let map = &geo.maps[n];
                let (w, h) = (map.width(), map.height());
                let par = if use_par {
                    let p = evidence.parser(k, n)?;
                    p.check_size(w, h)?;
                    Some(p)
                } else {
                    None
                };
                let opt = if use_opt {
                    let flow = evidence.flow(k, n)?;
                    Some(warp_labels(&prev_renders.expect("not first frame")[n], &flow)?)
                } else {
                    None
                };
                let sam = if use_sam {
                    let raw = evidence.masks(k, n)?;
                    let kept = filter_masks(&raw, map, &self.mask_filter)?;
                    let empty;
                    let par_ref = match &par {
                        Some(p) => p,
                        None => {
                            empty = VoteImage::hard(w, h, VoteSource::Par, vec![LabelId::BACKGROUND; w * h]);
                            &empty
                        }
                    };
                    Some(sam_votes(
                        &kept,
                        par_ref,
                        opt.as_ref(),
                        self.weights.lambda_po,
                        n_labels,
                    )?)
                } else {
                    None
                };
                let man = match overlays.and_then(|o| o.get(n)).and_then(Option::as_ref) {
                    Some(o) if !o.is_empty() => Some(manual_votes(o, w, h)?),
                    _ => None,
                };
                let seed_table = opt.as_ref().map(|o| {
                    let votes = ViewVotes {
                        opt: Some(o.clone()),
                        ..Default::default()
                    };
                    view_unary(&geo.mesh, map, &votes, &seed_weights, n_labels, 1)
                });
                let votes = ViewVotes { par, opt, sam, man };
                votes.check(map)?;
                let table = view_unary(&geo.mesh, map, &votes, &self.weights, n_labels, n_views);
                Ok((table, seed_table))
            })
            .collect::<Result<_>>()?;

        let n_vertices = geo.mesh.vertex_count();
        let mut raw = UnaryTable::zeros(n_vertices, n_labels);
        let mut seed_votes = if use_opt {
            Some(UnaryTable::zeros(n_vertices, n_labels))
        } else {
            None
        };
        for (table, seed_table) in &per_view {
            raw.add_assign(table)?;
            if let (Some(acc), Some(t)) = (seed_votes.as_mut(), seed_table) {
                acc.add_assign(t)?;
            }
        }
        let seed = match seed_votes {
            Some(t) => (0..n_vertices)
                .map(|v| {
                    let row = t.row(v);
                    let mut best = 0;
                    for l in 1..row.len() {
                        if row[l] < row[best] {
                            best = l;
                        }
                    }
                    if row[best] < 0.0 {
                        LabelId::from_index(best)
                    } else {
                        LabelId::BACKGROUND
                    }
                })
                .collect(),
            None => vec![LabelId::BACKGROUND; n_vertices],
        };
        Ok(FrameUnary { raw, seed })
    }

    fn solve(
        &self,
        geo: &FrameGeometry,
        raw: &UnaryTable,
        seed: &[LabelId],
    ) -> Result<(Vec<LabelId>, Vec<TraceEntry>, f64, usize)> {
        let problem = EnergyProblem::new(normalize_unary(raw), geo.adjacency.clone(), self.weights.lambda_b)?;
        let result = alpha_expansion(&problem, seed, &self.expansion)?;
        let filled = crate::energy::argmin_labels(&problem.unary);
        let moved = result
            .labels
            .iter()
            .zip(seed.iter().zip(&filled))
            .filter(|(l, (s, f))| {
                let start = if s.is_background() { **f } else { **s };
                **l != start
            })
            .count();
        debug!(
            frame = geo.index,
            energy = result.energy,
            passes = result.passes,
            moved,
            "frame solved"
        );
        Ok((result.labels, result.trace, result.energy, moved))
    }

    /// First frame: parser votes only (no flow or masks), followed by a
    /// second round when the frame has a non-empty manual overlay.
    pub fn init_first_frame(&self, geo: &FrameGeometry, evidence: &dyn EvidenceSource) -> Result<FrameResult> {
        let unary = self.frame_unary(geo, None, evidence, None)?;
        let result = self.finish_round1(geo, &unary)?;
        let overlays = self.load_overlays(geo.index, evidence)?;
        self.rectify_with(geo, result, None, evidence, &overlays)
    }

    /// Frame `k >= 2`: all enabled sources, seeded with the flow-warped
    /// labels of the previous frame. Round 1 only.
    pub fn process_frame(
        &self,
        geo: &FrameGeometry,
        prev: &FrameResult,
        evidence: &dyn EvidenceSource,
    ) -> Result<FrameResult> {
        let unary = self.frame_unary(geo, Some(&prev.renders), evidence, None)?;
        self.finish_round1(geo, &unary)
    }

    fn finish_round1(&self, geo: &FrameGeometry, unary: &FrameUnary) -> Result<FrameResult> {
        let (labels, trace, energy, moved) = self.solve(geo, &unary.raw, &unary.seed)?;
        let round1 = LabelFrame::new(geo.index, labels);
        let renders = geo.render(&round1)?;
        info!(frame = geo.index, energy, moved, "round 1 done");
        Ok(FrameResult {
            frame_index: geo.index,
            round1,
            round2: None,
            renders,
            trace,
            trace_round2: None,
            energy,
            moved,
        })
    }

    /// Second round with the frame's manual overlays from `evidence`.
    /// `prev` is the previous frame's result (`None` for the first frame).
    pub fn rectify_frame(
        &self,
        geo: &FrameGeometry,
        result: FrameResult,
        prev: Option<&FrameResult>,
        evidence: &dyn EvidenceSource,
    ) -> Result<FrameResult> {
        let overlays = self.load_overlays(geo.index, evidence)?;
        self.rectify_with(geo, result, prev.map(|p| p.renders.as_slice()), evidence, &overlays)
    }

    /// Second round with explicit overlays. All-empty overlays leave the
    /// result untouched.
    pub fn rectify_with(
        &self,
        geo: &FrameGeometry,
        mut result: FrameResult,
        prev_renders: Option<&[LabelImage]>,
        evidence: &dyn EvidenceSource,
        overlays: &[Option<RectificationOverlay>],
    ) -> Result<FrameResult> {
        let has_manual = overlays.iter().flatten().any(|o| !o.is_empty());
        if !has_manual {
            return Ok(result);
        }
        let (w, h) = self.rig.image_size();
        for o in overlays.iter().flatten() {
            o.validate(w, h, &self.registry)?;
        }
        let unary = self.frame_unary(geo, prev_renders, evidence, Some(overlays))?;
        let (labels, trace, energy, moved) = self.solve(geo, &unary.raw, &result.round1.labels)?;
        let round2 = LabelFrame::new(geo.index, labels);
        result.renders = geo.render(&round2)?;
        info!(
            frame = geo.index,
            energy,
            changed = round2.count_changes(&result.round1),
            "round 2 done"
        );
        result.round2 = Some(round2);
        result.trace_round2 = Some(trace);
        result.energy = energy;
        result.moved = moved;
        Ok(result)
    }
}

/// Runs a whole sequence in memory: the first frame from parser votes,
/// later frames with every enabled source, each followed by a second round
/// when manual overlays exist.
pub fn run_sequence(
    pipeline: &Pipeline,
    meshes: &[TriMesh],
    evidence: &dyn EvidenceSource,
) -> Result<Vec<FrameResult>> {
    let mut out: Vec<FrameResult> = Vec::with_capacity(meshes.len());
    for (i, mesh) in meshes.iter().enumerate() {
        let geo = pipeline.geometry(i + 1, mesh);
        let result = match out.last() {
            None => pipeline.init_first_frame(&geo, evidence)?,
            Some(prev) => {
                let r = pipeline.process_frame(&geo, prev, evidence)?;
                pipeline.rectify_frame(&geo, r, Some(prev), evidence)?
            }
        };
        out.push(result);
    }
    Ok(out)
}
