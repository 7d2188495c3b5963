use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::energy::{write_trace_csv, FusionWeights, TraceEntry};
use crate::error::{Error, Result};
use crate::frame::{load_label_frame, save_label_frame, LabelFrame};
use crate::image_io::{write_label_png, write_rgb_png};
use crate::manifest::SequenceManifest;
use crate::mesh_io::{load_mesh, save_ply};
use crate::raster::{render_color, LabelImage};

use super::{extract_garments, EvidenceSource, FrameGeometry, FrameResult, Pipeline, Toggles};

/// Resume cursor stored as `state.json` in the output root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    /// Last frame whose outputs are complete.
    pub completed: usize,
    pub frames: usize,
    pub rig_radius: f64,
    pub toggles: Toggles,
    pub weights: FusionWeights,
}

/// Layout of the output tree. Round-2 artifacts sit beside round-1 ones
/// with an `.r2` infix (garments in an `r2/` subdirectory).
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub root: PathBuf,
}

pub fn output_paths(root: impl Into<PathBuf>) -> OutputPaths {
    OutputPaths { root: root.into() }
}

fn infix(round2: bool) -> &'static str {
    if round2 {
        ".r2"
    } else {
        ""
    }
}

impl OutputPaths {
    pub fn labels(&self, frame: usize, round2: bool) -> PathBuf {
        self.root.join("labels").join(format!("{frame}{}.l4dl", infix(round2)))
    }

    pub fn render_label(&self, frame: usize, view: usize, round2: bool) -> PathBuf {
        self.root
            .join("renders")
            .join(frame.to_string())
            .join(format!("{view}_label{}.png", infix(round2)))
    }

    pub fn render_rgb(&self, frame: usize, view: usize) -> PathBuf {
        self.root
            .join("renders")
            .join(frame.to_string())
            .join(format!("{view}_rgb.png"))
    }

    pub fn garments(&self, frame: usize, round2: bool) -> PathBuf {
        let dir = self.root.join("garments").join(frame.to_string());
        if round2 {
            dir.join("r2")
        } else {
            dir
        }
    }

    pub fn trace(&self, frame: usize, round2: bool) -> PathBuf {
        self.root.join("trace").join(format!("{frame}{}.csv", infix(round2)))
    }

    pub fn state(&self) -> PathBuf {
        self.root.join("state.json")
    }

    /// Final label image of a view: round 2 when present.
    pub fn final_render_label(&self, frame: usize, view: usize) -> PathBuf {
        let r2 = self.render_label(frame, view, true);
        if r2.is_file() {
            r2
        } else {
            self.render_label(frame, view, false)
        }
    }
}

pub fn load_state(out: &OutputPaths) -> Result<Option<RunState>> {
    let path = out.state();
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::parse(&path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub frame: usize,
    pub vertices: usize,
    /// Absent when the labels were loaded rather than optimized.
    pub energy: Option<f64>,
    pub moved: usize,
    pub rectified: bool,
}

impl FrameSummary {
    fn of(result: &FrameResult) -> Self {
        FrameSummary {
            frame: result.frame_index,
            vertices: result.labels().len(),
            energy: result.energy.is_finite().then_some(result.energy),
            moved: result.moved,
            rectified: result.rectified(),
        }
    }
}

/// Runs a manifest's frames in order and persists every frame's outputs
/// before moving on.
pub struct SequenceRunner<'a> {
    pub manifest: &'a SequenceManifest,
    pub evidence: &'a dyn EvidenceSource,
    pub pipeline: Pipeline,
    pub out: OutputPaths,
}

impl<'a> SequenceRunner<'a> {
    /// The rig radius is fitted to the first frame (after centering) unless
    /// the manifest fixes it, and reused for the whole sequence.
    pub fn new(
        manifest: &'a SequenceManifest,
        evidence: &'a dyn EvidenceSource,
        weights: FusionWeights,
        toggles: Toggles,
        out_root: &Path,
    ) -> Result<Self> {
        let first = manifest
            .frame(1)
            .ok_or_else(|| Error::Manifest("no frames listed".into()))?;
        let mesh = load_mesh(&first.mesh)?;
        let (centered, _) = mesh.recenter();
        let rig = manifest.rig.build_for(centered.bounding_radius())?;
        let pipeline = Pipeline::new(manifest.registry.clone(), rig, weights)?.with_toggles(toggles);
        Ok(SequenceRunner {
            manifest,
            evidence,
            pipeline,
            out: output_paths(out_root),
        })
    }

    pub fn geometry(&self, frame: usize) -> Result<FrameGeometry> {
        let entry = self
            .manifest
            .frame(frame)
            .ok_or_else(|| Error::Manifest(format!("frame {frame} is not in the manifest")))?;
        let mesh = load_mesh(&entry.mesh)?;
        Ok(self.pipeline.geometry(frame, &mesh))
    }

    pub fn state(&self) -> Result<Option<RunState>> {
        load_state(&self.out)
    }

    /// Processes all frames, or with `resume` only those after the last
    /// completed one.
    pub fn run(&self, resume: bool) -> Result<Vec<FrameSummary>> {
        let mut start = 1;
        let mut prev = None;
        if resume {
            if let Some(state) = self.state()? {
                if state.weights != self.pipeline.weights || state.toggles != self.pipeline.toggles {
                    warn!("resuming with weights or toggles that differ from the interrupted run");
                }
                let done = state.completed.min(self.manifest.len());
                if done > 0 {
                    let geo = self.geometry(done)?;
                    prev = Some(self.load_result(&geo)?);
                    start = done + 1;
                    info!(completed = done, "resuming");
                }
            }
        }
        self.run_from(start, prev)
    }

    fn run_from(&self, start: usize, mut prev: Option<FrameResult>) -> Result<Vec<FrameSummary>> {
        let mut summaries = Vec::new();
        for k in start..=self.manifest.len() {
            let geo = self.geometry(k)?;
            let result = match &prev {
                None => self.pipeline.init_first_frame(&geo, self.evidence)?,
                Some(p) => {
                    let r = self.pipeline.process_frame(&geo, p, self.evidence)?;
                    self.pipeline.rectify_frame(&geo, r, Some(p), self.evidence)?
                }
            };
            self.write_frame(&geo, &result)?;
            self.write_state(k)?;
            summaries.push(FrameSummary::of(&result));
            prev = Some(result);
        }
        Ok(summaries)
    }

    fn write_state(&self, completed: usize) -> Result<()> {
        let prior = self.state()?.map_or(0, |s| s.completed);
        let state = RunState {
            completed: completed.max(prior),
            frames: self.manifest.len(),
            rig_radius: self.pipeline.rig.radius,
            toggles: self.pipeline.toggles,
            weights: self.pipeline.weights,
        };
        let text = serde_json::to_string_pretty(&state).map_err(|e| Error::Invalid(e.to_string()))?;
        crate::util::write_atomic(&self.out.state(), text.as_bytes())
    }

    /// Stored labels of a processed frame (round 2 when present).
    pub fn load_result(&self, geo: &FrameGeometry) -> Result<FrameResult> {
        let k = geo.index;
        let n = geo.mesh.vertex_count();
        let r1_path = self.out.labels(k, false);
        if !r1_path.is_file() {
            return Err(Error::Invalid(format!("frame {k} has not been processed yet")));
        }
        let round1 = load_label_frame(&r1_path, k, Some(n))?;
        let r2_path = self.out.labels(k, true);
        let round2 = if r2_path.is_file() {
            Some(load_label_frame(&r2_path, k, Some(n))?)
        } else {
            None
        };
        FrameResult::from_labels(geo, round1, round2)
    }

    /// Second round for frame `k` from its current manual overlays. With
    /// `propagate`, frames after `k` are recomputed from the new labels.
    pub fn rectify(&self, k: usize, propagate: bool) -> Result<Vec<FrameSummary>> {
        let geo = self.geometry(k)?;
        let stored = self.load_result(&geo)?;
        let round1 = FrameResult::from_labels(&geo, stored.round1, None)?;
        let prev = if k > 1 {
            let pg = self.geometry(k - 1)?;
            Some(self.load_result(&pg)?)
        } else {
            None
        };
        let result = self
            .pipeline
            .rectify_frame(&geo, round1, prev.as_ref(), self.evidence)?;
        self.write_round2(&geo, &result)?;
        let mut summaries = vec![FrameSummary::of(&result)];
        if propagate && k < self.manifest.len() {
            summaries.extend(self.run_from(k + 1, Some(result))?);
        }
        Ok(summaries)
    }

    fn write_frame(&self, geo: &FrameGeometry, result: &FrameResult) -> Result<()> {
        let k = geo.index;
        save_label_frame(&result.round1, &self.out.labels(k, false))?;
        write_trace_csv(&self.out.trace(k, false), &result.trace)?;
        let renders = if result.rectified() {
            geo.render(&result.round1)?
        } else {
            result.renders.clone()
        };
        self.write_renders(k, &renders, false)?;
        if geo.mesh.colors().is_some() {
            geo.maps
                .par_iter()
                .enumerate()
                .try_for_each(|(n, map)| write_rgb_png(&self.out.render_rgb(k, n), &render_color(map, &geo.mesh)?))?;
        }
        self.write_garments(geo, &result.round1, false)?;
        self.write_round2(geo, result)
    }

    fn write_round2(&self, geo: &FrameGeometry, result: &FrameResult) -> Result<()> {
        let k = geo.index;
        match &result.round2 {
            Some(r2) => {
                save_label_frame(r2, &self.out.labels(k, true))?;
                let empty: Vec<TraceEntry> = Vec::new();
                write_trace_csv(&self.out.trace(k, true), result.trace_round2.as_ref().unwrap_or(&empty))?;
                self.write_renders(k, &result.renders, true)?;
                self.write_garments(geo, r2, true)
            }
            None => self.remove_round2(k),
        }
    }

    fn remove_round2(&self, k: usize) -> Result<()> {
        let mut stale = vec![self.out.labels(k, true), self.out.trace(k, true)];
        stale.extend((0..self.pipeline.rig.len()).map(|n| self.out.render_label(k, n, true)));
        for p in stale {
            if p.is_file() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        let dir = self.out.garments(k, true);
        if dir.is_dir() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(())
    }

    fn write_renders(&self, k: usize, renders: &[LabelImage], round2: bool) -> Result<()> {
        let registry = &self.pipeline.registry;
        renders
            .par_iter()
            .enumerate()
            .try_for_each(|(n, img)| write_label_png(&self.out.render_label(k, n, round2), img, registry))
    }

    fn write_garments(&self, geo: &FrameGeometry, labels: &LabelFrame, round2: bool) -> Result<()> {
        let dir = self.out.garments(geo.index, round2);
        if dir.is_dir() {
            for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                let p = entry.map_err(|e| Error::io(&dir, e))?.path();
                if p.extension().is_some_and(|e| e == "ply") {
                    fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
                }
            }
        }
        let mesh = geo.original_mesh();
        for g in extract_garments(&mesh, &labels.labels)? {
            let name = self
                .pipeline
                .registry
                .name(g.label)
                .map(str::to_string)
                .unwrap_or_else(|| format!("label{}", g.label.0));
            save_ply(&dir.join(format!("{name}.ply")), &g.mesh, false)?;
        }
        Ok(())
    }
}
