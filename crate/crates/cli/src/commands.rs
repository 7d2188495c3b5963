use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use labelfuse4d::energy::FusionWeights;
use labelfuse4d::fixture::{write_fixture, FixtureOptions};
use labelfuse4d::frame::load_label_frame;
use labelfuse4d::geom::Vec3;
use labelfuse4d::image_io::write_rgb_png;
use labelfuse4d::mesh_io::save_ply;
use labelfuse4d::metrics::{
    chamfer_squared, parsing_metrics, sample_surface, scale_points, simulation_loss, stretching_energy, vertex_chamfer,
    EdgeLengths, ParsingReport,
};
use labelfuse4d::pipeline::{extract_garments, output_paths, FrameSummary, OutputPaths};
use labelfuse4d::raster::render_color;
use labelfuse4d::{
    load_mesh, rasterize, write_atomic, DirEvidence, LabelRegistry, SequenceManifest, SequenceRunner, Toggles, TriMesh,
};
use rayon::prelude::*;
use serde::Serialize;
use tracing::{info, warn};

use crate::args::{
    EvalArgs, EvalKind, ExtractArgs, FixtureArgs, JobArgs, PointSource, RectifyArgs, RenderArgs, RunArgs,
};
use crate::exit::ExitKind;

/// Everything a pipeline command needs, resolved from the arguments and
/// the manifest.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub manifest: SequenceManifest,
    pub weights: FusionWeights,
    pub toggles: Toggles,
    pub out: PathBuf,
}

pub fn load_manifest(path: &Path) -> Result<SequenceManifest> {
    SequenceManifest::load(path)
        .with_context(|| format!("loading {}", path.display()))
        .context(ExitKind::Manifest)
}

/// Applies `key=value` overrides on top of `base`.
pub fn parse_weights(base: FusionWeights, overrides: &[String]) -> Result<FusionWeights> {
    let mut w = base;
    for item in overrides.iter().filter(|s| !s.trim().is_empty()) {
        let Some((key, value)) = item.split_once('=') else {
            return Err(anyhow::anyhow!("weight override {item:?} is not key=value").context(ExitKind::Usage));
        };
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("weight {key} has a non-numeric value {value:?}"))
            .context(ExitKind::Usage)?;
        w.set(key, value).context(ExitKind::Usage)?;
    }
    Ok(w)
}

impl JobArgs {
    pub fn load(&self) -> Result<JobConfig> {
        let manifest = load_manifest(&self.manifest)?;
        let weights = parse_weights(manifest.weights, &self.weights)?;
        let toggles = match &self.toggle {
            Some(t) => Toggles::parse(t).context(ExitKind::Usage)?,
            None => Toggles::default(),
        };
        let out = self.out.clone().unwrap_or_else(|| manifest.output_root.clone());
        Ok(JobConfig {
            manifest,
            weights,
            toggles,
            out,
        })
    }
}

/// Parses `0-11`, `3` or `0,2,5-7` into a sorted, deduplicated list.
pub fn parse_index_list(spec: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || anyhow::anyhow!("invalid index range {part:?}").context(ExitKind::Usage);
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(anyhow::anyhow!("empty index list").context(ExitKind::Usage));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn select(spec: Option<&str>, available: &[usize], what: &str) -> Result<Vec<usize>> {
    let Some(spec) = spec else {
        return Ok(available.to_vec());
    };
    let chosen = parse_index_list(spec)?;
    if let Some(bad) = chosen.iter().find(|i| !available.contains(i)) {
        return Err(anyhow::anyhow!("{what} {bad} does not exist").context(ExitKind::Usage));
    }
    Ok(chosen)
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let evidence = DirEvidence::from_manifest(&manifest);
    let out_root = args.out.clone().unwrap_or_else(|| manifest.output_root.clone());
    let runner = SequenceRunner::new(&manifest, &evidence, manifest.weights, Toggles::default(), &out_root)?;
    let rig = &runner.pipeline.rig;
    let (w, h) = rig.image_size();
    println!(
        "rig: {} views, {w}x{h} px, radius {:.4}, focal {:.1} px",
        rig.len(),
        rig.radius,
        rig.cameras[0].focal.0
    );

    let all_frames: Vec<usize> = manifest.frames.iter().map(|f| f.index).collect();
    let frames = select(args.frames.as_deref(), &all_frames, "frame")?;
    let views = select(args.views.as_deref(), &(0..rig.len()).collect::<Vec<_>>(), "view")?;
    let mut written = 0;
    for k in frames {
        let entry = manifest.frame(k).expect("selected from the manifest");
        let (mesh, _) = load_mesh(&entry.mesh)?.recenter();
        if mesh.colors().is_none() {
            warn!(frame = k, "mesh has no vertex colors; nothing to render");
            continue;
        }
        views.par_iter().try_for_each(|&n| -> labelfuse4d::Result<()> {
            let map = rasterize(&mesh, &rig.cameras[n]);
            write_rgb_png(&runner.out.render_rgb(k, n), &render_color(&map, &mesh)?)
        })?;
        written += views.len();
        info!(frame = k, views = views.len(), "rendered");
    }
    println!(
        "wrote {written} images below {}",
        runner.out.root.join("renders").display()
    );
    Ok(())
}

pub fn print_summary(out: &mut impl Write, rows: &[FrameSummary]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:>6} {:>9} {:>14} {:>7} {:>9}",
        "frame", "vertices", "energy", "moved", "rectified"
    )?;
    for r in rows {
        let energy = r.energy.map_or_else(|| "-".to_string(), |e| format!("{e:.4}"));
        writeln!(
            out,
            "{:>6} {:>9} {:>14} {:>7} {:>9}",
            r.frame,
            r.vertices,
            energy,
            r.moved,
            if r.rectified { "yes" } else { "no" }
        )?;
    }
    Ok(())
}

pub fn run(args: &RunArgs) -> Result<Vec<FrameSummary>> {
    let cfg = args.job.load()?;
    let evidence = DirEvidence::from_manifest(&cfg.manifest);
    let runner = SequenceRunner::new(&cfg.manifest, &evidence, cfg.weights, cfg.toggles, &cfg.out)?;
    let rows = runner.run(args.resume)?;
    if rows.is_empty() {
        println!("all {} frames already complete", cfg.manifest.len());
    }
    print_summary(&mut std::io::stdout().lock(), &rows)?;
    Ok(rows)
}

pub fn rectify(args: &RectifyArgs) -> Result<Vec<FrameSummary>> {
    let cfg = args.job.load()?;
    if cfg.manifest.frame(args.frame).is_none() {
        return Err(anyhow::anyhow!("frame {} is not in the manifest", args.frame).context(ExitKind::Usage));
    }
    let evidence = DirEvidence::from_manifest(&cfg.manifest);
    let runner = SequenceRunner::new(&cfg.manifest, &evidence, cfg.weights, cfg.toggles, &cfg.out)?;
    let rows = runner.rectify(args.frame, args.propagate)?;
    print_summary(&mut std::io::stdout().lock(), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    #[serde(rename = "d_CD")]
    pub d_cd: f64,
    #[serde(rename = "E_str", skip_serializing_if = "Option::is_none")]
    pub e_str: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
}

fn read_labels(path: &Path) -> Result<Vec<labelfuse4d::LabelId>> {
    Ok(load_label_frame(path, 0, None)?.labels)
}

/// Whitespace-separated `x y z` rows; `#` starts a comment.
pub fn read_xyz(path: &Path) -> Result<Vec<Vec3>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}:{}: not a number", path.display(), i + 1))?;
        if v.len() != 3 {
            bail!(
                "{}:{}: expected 3 coordinates, found {}",
                path.display(),
                i + 1,
                v.len()
            );
        }
        points.push([v[0], v[1], v[2]]);
    }
    Ok(points)
}

fn read_points(path: &Path, source: PointSource, samples: usize, seed: u64) -> Result<Vec<Vec3>> {
    if path.extension().is_some_and(|e| e == "xyz") {
        return read_xyz(path);
    }
    let mesh = load_mesh(path)?;
    Ok(match source {
        PointSource::Vertices => mesh.vertices().to_vec(),
        PointSource::Surface => sample_surface(&mesh, samples, seed)?,
    })
}

fn scaled_mesh(mesh: TriMesh, scale: f64) -> Result<TriMesh> {
    if scale == 1.0 {
        return Ok(mesh);
    }
    let vertices = scale_points(mesh.vertices(), scale);
    Ok(TriMesh::new(vertices, mesh.faces().to_vec(), None)?)
}

pub fn eval_labels(pred: &Path, gt: &Path) -> Result<ParsingReport> {
    Ok(parsing_metrics(&read_labels(pred)?, &read_labels(gt)?)?)
}

pub fn eval_chamfer(args: &EvalArgs, pred: &Path) -> Result<GeometryReport> {
    let x = read_points(pred, args.points, args.samples, args.seed)?;
    let y = read_points(&args.gt, args.points, args.samples, args.seed)?;
    let d = chamfer_squared(&scale_points(&x, args.scale), &scale_points(&y, args.scale))?;
    Ok(GeometryReport {
        d_cd: d,
        e_str: None,
        loss: None,
    })
}

pub fn eval_sim(args: &EvalArgs, pred: &Path) -> Result<GeometryReport> {
    let template = args.template.as_deref().context("--template is required for sim")?;
    let sim = scaled_mesh(load_mesh(pred)?, args.scale)?;
    let gt = scaled_mesh(load_mesh(&args.gt)?, args.scale)?;
    let template = scaled_mesh(load_mesh(template)?, args.scale)?;
    let e_str = stretching_energy(&EdgeLengths::from_meshes(&template, &sim)?)?;
    Ok(GeometryReport {
        d_cd: vertex_chamfer(&sim, &gt)?,
        e_str: Some(e_str),
        loss: Some(simulation_loss(&sim, &gt, &template, args.w)?),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    if !args.manifest.is_empty() {
        return eval_batch(args);
    }
    let pred = args.pred.as_deref().context("--pred is required")?;
    let json = match args.kind {
        EvalKind::Labels => serde_json::to_string_pretty(&eval_labels(pred, &args.gt)?)?,
        EvalKind::Chamfer => serde_json::to_string_pretty(&eval_chamfer(args, pred)?)?,
        EvalKind::Sim => serde_json::to_string_pretty(&eval_sim(args, pred)?)?,
    };
    emit(args.out.as_deref(), &(json + "\n"))
}

fn final_labels(out: &OutputPaths, k: usize) -> PathBuf {
    let r2 = out.labels(k, true);
    if r2.is_file() {
        r2
    } else {
        out.labels(k, false)
    }
}

/// One CSV row per frame of every manifest, scoring the final labels.
fn eval_batch(args: &EvalArgs) -> Result<()> {
    if args.kind != EvalKind::Labels {
        return Err(anyhow::anyhow!("batch mode only supports --kind labels").context(ExitKind::Usage));
    }
    let mut csv = String::from("manifest,frame,mAcc,mIoU,pixelAcc\n");
    for path in &args.manifest {
        let manifest = load_manifest(path)?;
        let out = output_paths(manifest.output_root.clone());
        for f in &manifest.frames {
            let gt = if args.gt.is_dir() {
                args.gt.join(format!("{}.l4dl", f.index))
            } else {
                args.gt.clone()
            };
            let r = eval_labels(&final_labels(&out, f.index), &gt)
                .with_context(|| format!("frame {} of {}", f.index, path.display()))?;
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                path.display(),
                f.index,
                r.m_acc,
                r.m_iou,
                r.pixel_acc
            ));
        }
    }
    emit(args.out.as_deref(), &csv)
}

pub fn extract(args: &ExtractArgs) -> Result<()> {
    let registry = match &args.manifest {
        Some(p) => load_manifest(p)?.registry,
        None => LabelRegistry::default(),
    };
    let mesh = load_mesh(&args.mesh)?;
    let labels = load_label_frame(&args.labels, 0, Some(mesh.vertex_count()))?;
    for g in extract_garments(&mesh, &labels.labels)? {
        let name = registry
            .name(g.label)
            .map(str::to_string)
            .unwrap_or_else(|| format!("label{}", g.label.0));
        let path = args.out.join(format!("{name}.ply"));
        save_ply(&path, &g.mesh, false)?;
        println!(
            "{name}: {} vertices, {} faces -> {}",
            g.mesh.vertex_count(),
            g.mesh.face_count(),
            path.display()
        );
    }
    Ok(())
}

pub fn fixture(args: &FixtureArgs) -> Result<()> {
    let opts = FixtureOptions {
        frames: args.frames,
        level: args.level,
        image_size: args.image_size,
        noise: args.noise,
        seed: args.seed,
        ..FixtureOptions::default()
    };
    let fx = write_fixture(&args.out, &opts)?;
    println!("{}", fx.manifest.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_lists() {
        assert_eq!(parse_index_list("0-3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_index_list("5, 1,2-3,2").unwrap(), vec![1, 2, 3, 5]);
        for bad in ["", "3-1", "a", "1-", "-2"] {
            assert!(parse_index_list(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn weight_overrides() {
        let w = parse_weights(FusionWeights::default(), &["b=0.25".into(), "lambda_p=2".into()]).unwrap();
        assert_eq!((w.lambda_b, w.lambda_p, w.w_man), (0.25, 2.0, 10.0));
        for bad in ["b", "b=x", "q=1", "man=0"] {
            let err = parse_weights(FusionWeights::default(), &[bad.into()]).unwrap_err();
            assert_eq!(crate::exit::classify(&err), ExitKind::Usage, "{bad}");
        }
    }
}
