//! Writes a complete synthetic sequence to disk: meshes, parser images,
//! flow fields, masks, ground truth and a manifest.
//!
//! The subject is a vertex-colored icosphere split into an upper and a lower
//! half, rotating about the vertical axis by a fixed angle per frame.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::camera::RigParams;
use crate::error::Result;
use crate::evidence::{write_flo, write_masks_json};
use crate::frame::{save_label_frame, LabelFrame};
use crate::geom::{self, Vec3};
use crate::image_io::write_label_png;
use crate::label::{LabelId, LabelRegistry};
use crate::manifest::{write_manifest, FrameRecord, ManifestFile};
use crate::mesh_io::{load_mesh, save_ply};
use crate::pipeline::{evidence_path, FrameGeometry};
use crate::synthetic::{hemisphere_labels, icosphere, label_masks, noisy_labels, rigid_flow};

/// Direction separating the two labeled halves.
pub const SPLIT_AXIS: Vec3 = [0.31, 0.9, 0.22];

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOptions {
    pub frames: usize,
    pub level: u32,
    pub image_size: usize,
    /// Probability that a parser pixel is replaced by a wrong label.
    pub noise: f64,
    /// Boundary jitter of the synthetic masks.
    pub jitter: f64,
    pub rotation_deg: f64,
    pub seed: u64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions {
            frames: 5,
            level: 3,
            image_size: 128,
            noise: 0.1,
            jitter: 0.05,
            rotation_deg: 6.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub root: PathBuf,
    pub manifest: PathBuf,
    /// Ground-truth vertex labels, identical for every frame.
    pub truth: Vec<LabelId>,
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| crate::error::Error::io(path, e))
}

/// Generates the fixture below `root` (created if needed). Identical options
/// produce identical files.
pub fn write_fixture(root: &Path, opts: &FixtureOptions) -> Result<Fixture> {
    let registry = LabelRegistry::default();
    let base = icosphere(opts.level, 1.0);
    let truth = hemisphere_labels(&base, geom::normalize(SPLIT_AXIS), LabelId::UPPER, LabelId::LOWER);
    let rot = geom::rotation_y(opts.rotation_deg.to_radians());

    ensure_dir(&root.join("meshes"))?;
    ensure_dir(&root.join("evidence"))?;
    let mut records = Vec::with_capacity(opts.frames);
    let mut mesh = base.clone();
    for k in 1..=opts.frames {
        if k > 1 {
            mesh = mesh.transformed(&rot, [0.0; 3]);
        }
        let rel = PathBuf::from("meshes").join(format!("{k:04}.ply"));
        save_ply(&root.join(&rel), &mesh, false)?;
        records.push(FrameRecord {
            index: k,
            mesh: rel,
            evidence: None,
        });
    }

    let rig_params = RigParams {
        image_size: opts.image_size,
        ..RigParams::default()
    };
    // geometry comes from the files as written so that it matches what a run sees
    let meshes = records
        .iter()
        .map(|r| load_mesh(&root.join(&r.mesh)))
        .collect::<Result<Vec<_>>>()?;
    let rig = rig_params.build_for(meshes[0].recenter().0.bounding_radius())?;
    let geos: Vec<FrameGeometry> = meshes
        .iter()
        .enumerate()
        .map(|(i, m)| FrameGeometry::new(i + 1, m, &rig))
        .collect();

    let ev = root.join("evidence");
    let n_labels = registry.len();
    geos.par_iter().enumerate().try_for_each(|(i, geo)| -> Result<()> {
        let k = geo.index;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(1000).wrapping_add(k as u64));
        let clean = geo.render(&LabelFrame::new(k, truth.clone()))?;
        for (n, map) in geo.maps.iter().enumerate() {
            let par = noisy_labels(map, &geo.mesh, &truth, n_labels, opts.noise, &mut rng);
            write_label_png(&ev.join(evidence_path("par", k, n)), &par, &registry)?;
            let masks = label_masks(&clean[n], opts.jitter, &mut rng);
            write_masks_json(&ev.join(evidence_path("masks", k, n)), &masks)?;
            if i > 0 {
                let prev = &geos[i - 1];
                let t = geom::sub(geom::mat_vec(&rot, prev.offset), geo.offset);
                let flow = rigid_flow(&prev.maps[n], &rig.cameras[n], &rot, t, Some(map));
                write_flo(&ev.join(evidence_path("flow", k, n)), &flow)?;
            }
        }
        Ok(())
    })?;

    save_label_frame(&LabelFrame::new(0, truth.clone()), &root.join("truth.l4dl"))?;
    let manifest = root.join("manifest.json");
    let file = ManifestFile {
        labels: Some(registry.entries().to_vec()),
        background_color: None,
        rig: rig_params,
        class_map: Some("identity".into()),
        evidence: PathBuf::from("evidence"),
        output: Some(PathBuf::from("out")),
        weights: None,
        frames: records,
    };
    write_manifest(&manifest, &file)?;
    Ok(Fixture {
        root: root.to_path_buf(),
        manifest,
        truth,
    })
}
