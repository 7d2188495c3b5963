//! Sequence manifest: frames, evidence location, label registry and rig
//! parameters. Relative paths resolve against the manifest's directory.
//!
//! ```json
//! {
//!   "labels": [{"id": 0, "name": "skin", "color": [255, 128, 0]}],
//!   "rig": {"image_size": 512, "elevation_deg": 35.0},
//!   "class_map": "lip",
//!   "evidence": "evidence",
//!   "output": "out",
//!   "frames": [{"index": 1, "mesh": "meshes/0001.ply"}]
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::RigParams;
use crate::energy::FusionWeights;
use crate::error::{Error, Result};
use crate::label::{ClassMap, LabelEntry, LabelRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub mesh: PathBuf,
    /// Evidence root for this frame when it differs from the sequence's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<PathBuf>,
}

/// The manifest document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<LabelEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_color: Option<[u8; 3]>,
    #[serde(default)]
    pub rig: RigParams,
    /// `"identity"` (default), `"lip"`, or a path to a class-map JSON file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_map: Option<String>,
    #[serde(default = "default_evidence")]
    pub evidence: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<FusionWeights>,
    pub frames: Vec<FrameRecord>,
}

fn default_evidence() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEntry {
    pub index: usize,
    pub mesh: PathBuf,
    pub evidence: PathBuf,
}

/// A loaded manifest with every path resolved and checked.
#[derive(Debug, Clone)]
pub struct SequenceManifest {
    pub path: PathBuf,
    pub base_dir: PathBuf,
    pub registry: LabelRegistry,
    pub class_map: ClassMap,
    pub rig: RigParams,
    pub weights: FusionWeights,
    pub evidence_root: PathBuf,
    pub output_root: PathBuf,
    pub frames: Vec<FrameEntry>,
    pub file: ManifestFile,
}

impl SequenceManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ManifestFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::resolve(file, path.to_path_buf(), base)
    }

    pub fn resolve(file: ManifestFile, path: PathBuf, base_dir: PathBuf) -> Result<Self> {
        let join = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let registry = match &file.labels {
            Some(entries) => LabelRegistry::new(entries.clone())?,
            None => LabelRegistry::default(),
        };
        let registry = match file.background_color {
            Some(c) => registry.with_background_color(c),
            None => registry,
        };
        let class_map = match file.class_map.as_deref() {
            None | Some("identity") => ClassMap::identity(registry.len()),
            Some("lip") => ClassMap::lip(),
            Some(p) => {
                let p = join(Path::new(p));
                if !p.is_file() {
                    return Err(Error::Manifest(format!("class map {} does not exist", p.display())));
                }
                ClassMap::load(&p)?
            }
        };
        let weights = file.weights.unwrap_or_default();
        weights.validate()?;

        if file.frames.is_empty() {
            return Err(Error::Manifest("no frames listed".into()));
        }
        let evidence_root = join(&file.evidence);
        if !evidence_root.is_dir() {
            return Err(Error::Manifest(format!(
                "evidence directory {} does not exist",
                evidence_root.display()
            )));
        }
        let mut frames = Vec::with_capacity(file.frames.len());
        for (i, rec) in file.frames.iter().enumerate() {
            if rec.index != i + 1 {
                return Err(Error::Manifest(format!(
                    "frame indices must be consecutive from 1; entry {} has index {}",
                    i + 1,
                    rec.index
                )));
            }
            let mesh = join(&rec.mesh);
            if !mesh.is_file() {
                return Err(Error::Manifest(format!(
                    "frame {}: mesh {} does not exist",
                    rec.index,
                    mesh.display()
                )));
            }
            let evidence = rec
                .evidence
                .as_deref()
                .map(join)
                .unwrap_or_else(|| evidence_root.clone());
            if !evidence.is_dir() {
                return Err(Error::Manifest(format!(
                    "frame {}: evidence directory {} does not exist",
                    rec.index,
                    evidence.display()
                )));
            }
            frames.push(FrameEntry {
                index: rec.index,
                mesh,
                evidence,
            });
        }
        let output_root = join(file.output.as_deref().unwrap_or(Path::new("out")));
        Ok(SequenceManifest {
            path,
            base_dir,
            registry,
            class_map,
            rig: file.rig,
            weights,
            evidence_root,
            output_root,
            frames,
            file,
        })
    }

    pub fn frame(&self, index: usize) -> Option<&FrameEntry> {
        index.checked_sub(1).and_then(|i| self.frames.get(i))
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn write_manifest(path: &Path, file: &ManifestFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file).map_err(|e| Error::Manifest(e.to_string()))?;
    crate::util::write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(frames: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("ev")).unwrap();
        std::fs::write(dir.path().join("a.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            format!(r#"{{"evidence": "ev", "class_map": "lip", "frames": {frames}}}"#),
        )
        .unwrap();
        (dir, path)
    }

    #[test]
    fn loads_and_resolves() {
        let (dir, path) = setup(r#"[{"index": 1, "mesh": "a.obj"}, {"index": 2, "mesh": "a.obj"}]"#);
        let m = SequenceManifest::load(&path).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.frames[1].mesh, dir.path().join("a.obj"));
        assert_eq!(m.frames[0].evidence, dir.path().join("ev"));
        assert_eq!(m.registry.len(), 6);
        assert_eq!(m.rig.image_size, 512);
        assert_eq!(m.output_root, dir.path().join("out"));
        assert!(m.frame(3).is_none());
    }

    #[test]
    fn rejects_gaps_and_missing_paths() {
        let (_d, path) = setup(r#"[{"index": 1, "mesh": "a.obj"}, {"index": 3, "mesh": "a.obj"}]"#);
        assert!(matches!(SequenceManifest::load(&path), Err(Error::Manifest(_))));
        let (_d, path) = setup(r#"[{"index": 1, "mesh": "missing.ply"}]"#);
        let err = SequenceManifest::load(&path).unwrap_err().to_string();
        assert!(err.contains("missing.ply"), "{err}");
        let (_d, path) = setup("[]");
        assert!(SequenceManifest::load(&path).is_err());
    }
}
