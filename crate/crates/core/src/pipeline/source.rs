use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::evidence::{
    load_parser_votes, read_flo, read_masks_json, FlowField, MaskSet, RectificationOverlay, VoteImage,
};
use crate::label::ClassMap;
use crate::manifest::SequenceManifest;

/// Per-frame, per-view evidence. Missing required evidence is an error;
/// a missing manual overlay is not.
pub trait EvidenceSource: Send + Sync {
    fn parser(&self, frame: usize, view: usize) -> Result<VoteImage>;
    fn flow(&self, frame: usize, view: usize) -> Result<FlowField>;
    fn masks(&self, frame: usize, view: usize) -> Result<MaskSet>;
    fn manual(&self, frame: usize, view: usize) -> Result<Option<RectificationOverlay>>;
}

/// Relative location of an evidence file below an evidence root.
pub fn evidence_path(kind: &str, frame: usize, view: usize) -> PathBuf {
    let ext = match kind {
        "par" => "png",
        "flow" => "flo",
        _ => "json",
    };
    PathBuf::from(kind)
        .join(frame.to_string())
        .join(format!("{view}.{ext}"))
}

/// Files below one evidence root per frame: `par/{k}/{n}.png`,
/// `flow/{k}/{n}.flo`, `masks/{k}/{n}.json`, `manual/{k}/{n}.json`.
#[derive(Debug, Clone)]
pub struct DirEvidence {
    default_root: PathBuf,
    roots: BTreeMap<usize, PathBuf>,
    class_map: ClassMap,
}

impl DirEvidence {
    pub fn new(root: impl Into<PathBuf>, class_map: ClassMap) -> Self {
        DirEvidence {
            default_root: root.into(),
            roots: BTreeMap::new(),
            class_map,
        }
    }

    pub fn from_manifest(manifest: &SequenceManifest) -> Self {
        DirEvidence {
            default_root: manifest.evidence_root.clone(),
            roots: manifest.frames.iter().map(|f| (f.index, f.evidence.clone())).collect(),
            class_map: manifest.class_map.clone(),
        }
    }

    pub fn root(&self, frame: usize) -> &Path {
        self.roots.get(&frame).unwrap_or(&self.default_root)
    }

    pub fn path(&self, kind: &str, frame: usize, view: usize) -> PathBuf {
        self.root(frame).join(evidence_path(kind, frame, view))
    }

    fn existing(&self, kind: &'static str, frame: usize, view: usize) -> Result<PathBuf> {
        let path = self.path(kind, frame, view);
        if path.is_file() {
            Ok(path)
        } else {
            Err(Error::MissingEvidence {
                frame,
                view,
                source_kind: kind,
                path,
            })
        }
    }
}

impl EvidenceSource for DirEvidence {
    fn parser(&self, frame: usize, view: usize) -> Result<VoteImage> {
        load_parser_votes(&self.existing("par", frame, view)?, &self.class_map)
    }

    fn flow(&self, frame: usize, view: usize) -> Result<FlowField> {
        read_flo(&self.existing("flow", frame, view)?)
    }

    fn masks(&self, frame: usize, view: usize) -> Result<MaskSet> {
        read_masks_json(&self.existing("masks", frame, view)?)
    }

    fn manual(&self, frame: usize, view: usize) -> Result<Option<RectificationOverlay>> {
        let path = self.path("manual", frame, view);
        if !path.is_file() {
            return Ok(None);
        }
        RectificationOverlay::load(&path).map(Some)
    }
}

/// In-memory evidence keyed by `(frame, view)`.
#[derive(Debug, Default)]
pub struct MemoryEvidence {
    pub parser: HashMap<(usize, usize), VoteImage>,
    pub flow: HashMap<(usize, usize), FlowField>,
    pub masks: HashMap<(usize, usize), MaskSet>,
    pub manual: RwLock<HashMap<(usize, usize), RectificationOverlay>>,
}

impl MemoryEvidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_manual(&self, frame: usize, view: usize, overlay: RectificationOverlay) {
        self.manual
            .write()
            .expect("manual overlay lock")
            .insert((frame, view), overlay);
    }

    pub fn clear_manual(&self) {
        self.manual.write().expect("manual overlay lock").clear();
    }
}

fn missing(kind: &'static str, frame: usize, view: usize) -> Error {
    Error::MissingEvidence {
        frame,
        view,
        source_kind: kind,
        path: evidence_path(kind, frame, view),
    }
}

impl EvidenceSource for MemoryEvidence {
    fn parser(&self, frame: usize, view: usize) -> Result<VoteImage> {
        self.parser
            .get(&(frame, view))
            .cloned()
            .ok_or_else(|| missing("par", frame, view))
    }

    fn flow(&self, frame: usize, view: usize) -> Result<FlowField> {
        self.flow
            .get(&(frame, view))
            .cloned()
            .ok_or_else(|| missing("flow", frame, view))
    }

    fn masks(&self, frame: usize, view: usize) -> Result<MaskSet> {
        self.masks
            .get(&(frame, view))
            .cloned()
            .ok_or_else(|| missing("masks", frame, view))
    }

    fn manual(&self, frame: usize, view: usize) -> Result<Option<RectificationOverlay>> {
        Ok(self
            .manual
            .read()
            .expect("manual overlay lock")
            .get(&(frame, view))
            .cloned())
    }
}
