mod common;

use std::fs;
use std::path::Path;

use common::*;
use labelfuse4d::evidence::{RectificationOverlay, VoteImage, VoteSource};
use labelfuse4d::fixture::{write_fixture, FixtureOptions};
use labelfuse4d::frame::load_label_frame;
use labelfuse4d::image_io::read_label_png;
use labelfuse4d::label::LabelId;
use labelfuse4d::mesh_io::load_mesh;
use labelfuse4d::pipeline::{
    extract_garments, face_label, load_state, output_paths, run_sequence, DirEvidence, EvidenceSource, MemoryEvidence,
    SequenceRunner, Toggles,
};
use labelfuse4d::synthetic::vertex_accuracy;
use labelfuse4d::{Error, FusionWeights, LabelFrame, SequenceManifest};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_fixture(dir: &Path, frames: usize) -> SequenceManifest {
    let opts = FixtureOptions {
        frames,
        ..FixtureOptions::default()
    };
    let fx = write_fixture(dir, &opts).unwrap();
    SequenceManifest::load(&fx.manifest).unwrap()
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn fixture_run_writes_the_output_tree() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path(), 3);
    let ev = DirEvidence::from_manifest(&manifest);
    let out = dir.path().join("out");
    let runner = SequenceRunner::new(&manifest, &ev, FusionWeights::default(), Toggles::default(), &out).unwrap();
    let summary = runner.run(false).unwrap();
    assert_eq!(summary.len(), 3);

    let paths = output_paths(&out);
    let truth = load_label_frame(&dir.path().join("truth.l4dl"), 0, None).unwrap();
    for k in 1..=3 {
        let labels = load_label_frame(&paths.labels(k, false), k, None).unwrap();
        assert!(vertex_accuracy(&labels.labels, &truth.labels) >= 0.99, "frame {k}");
        assert!(paths.trace(k, false).is_file());
        for n in 0..24 {
            assert!(paths.render_label(k, n, false).is_file());
            assert!(paths.render_rgb(k, n).is_file());
            assert!(!paths.render_label(k, n, true).exists());
        }
        for name in ["upper", "lower"] {
            assert!(paths.garments(k, false).join(format!("{name}.ply")).is_file());
        }
    }
    let state = load_state(&paths).unwrap().unwrap();
    assert_eq!(state.completed, 3);
    assert_eq!(state.frames, 3);

    let trace = fs::read_to_string(paths.trace(1, false)).unwrap();
    assert!(trace.starts_with("move,label,energy\n"));

    // stored renders match a fresh rendering of the stored labels
    let geo = runner.geometry(2).unwrap();
    let labels = load_label_frame(&paths.labels(2, false), 2, None).unwrap();
    let fresh = geo.render(&labels).unwrap();
    for (n, img) in fresh.iter().enumerate() {
        assert_eq!(&read_label_png(&paths.render_label(2, n, false)).unwrap(), img);
    }

    // garments come back in input coordinates and partition the faces
    let mesh = load_mesh(&manifest.frames[1].mesh).unwrap();
    let garments = extract_garments(&mesh, &labels.labels).unwrap();
    let total: usize = garments.iter().map(|g| g.mesh.face_count()).sum();
    assert_eq!(total, mesh.face_count());
    let upper = load_mesh(&paths.garments(2, false).join("upper.ply")).unwrap();
    let g = garments.iter().find(|g| g.label == LabelId::UPPER).unwrap();
    assert_eq!(upper.face_count(), g.mesh.face_count());
    for (a, b) in upper.vertices().iter().zip(g.mesh.vertices()) {
        for c in 0..3 {
            assert!((a[c] - b[c]).abs() < 1e-6);
        }
    }
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path(), 4);
    let ev = DirEvidence::from_manifest(&manifest);

    let full = dir.path().join("full");
    SequenceRunner::new(&manifest, &ev, FusionWeights::default(), Toggles::default(), &full)
        .unwrap()
        .run(false)
        .unwrap();

    // simulate a run killed after frame 2 by stopping at a two-frame manifest
    let part = dir.path().join("part");
    let mut short = manifest.clone();
    short.frames.truncate(2);
    SequenceRunner::new(&short, &ev, FusionWeights::default(), Toggles::default(), &part)
        .unwrap()
        .run(false)
        .unwrap();
    assert_eq!(load_state(&output_paths(&part)).unwrap().unwrap().completed, 2);
    let resumed = SequenceRunner::new(&manifest, &ev, FusionWeights::default(), Toggles::default(), &part)
        .unwrap()
        .run(true)
        .unwrap();
    assert_eq!(resumed.iter().map(|s| s.frame).collect::<Vec<_>>(), vec![3, 4]);

    let a = read_tree(&full);
    let b = read_tree(&part);
    let names = |t: &[(String, Vec<u8>)]| t.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
    assert_eq!(names(&a), names(&b));
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        if name == "state.json" {
            continue;
        }
        assert!(x == y, "{name} differs after resume");
    }
}

#[test]
fn par_only_never_touches_flow_or_masks() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path(), 2);
    fs::remove_dir_all(dir.path().join("evidence/flow")).unwrap();
    fs::remove_dir_all(dir.path().join("evidence/masks")).unwrap();
    let ev = DirEvidence::from_manifest(&manifest);
    let out = dir.path().join("out");
    let runner = SequenceRunner::new(&manifest, &ev, FusionWeights::default(), Toggles::PAR_ONLY, &out).unwrap();
    assert_eq!(runner.run(false).unwrap().len(), 2);

    let runner = SequenceRunner::new(&manifest, &ev, FusionWeights::default(), Toggles::default(), &out).unwrap();
    match runner.run(false) {
        Err(Error::MissingEvidence {
            frame,
            source_kind,
            path,
            ..
        }) => {
            assert_eq!(frame, 2);
            assert_eq!(source_kind, "flow");
            assert!(path.ends_with("flow/2/0.flo") || path.to_string_lossy().contains("flow/2/"));
        }
        other => panic!("expected missing flow, got {other:?}"),
    }
}

#[test]
fn rectify_writes_round_two_beside_round_one() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_fixture(dir.path(), 3);
    let ev = DirEvidence::from_manifest(&manifest);
    let out = dir.path().join("out");
    let runner = SequenceRunner::new(&manifest, &ev, FusionWeights::default(), Toggles::default(), &out).unwrap();
    runner.run(false).unwrap();
    let paths = output_paths(&out);
    let r1_before = fs::read(paths.labels(2, false)).unwrap();
    let frame3_before = fs::read(paths.labels(3, false)).unwrap();

    // no overlay: nothing new
    let s = runner.rectify(2, false).unwrap();
    assert!(!s[0].rectified);
    assert!(!paths.labels(2, true).exists());

    // relabel the foreground of three neighboring views as "outer"
    let geo = runner.geometry(2).unwrap();
    for n in 0..3 {
        let mut overlay = RectificationOverlay::default();
        let w = geo.maps[n].width();
        for p in 0..geo.maps[n].len() {
            if geo.maps[n].is_covered(p) {
                overlay.push((p % w) as i64, (p / w) as i64, LabelId::OUTER);
            }
        }
        overlay.save(&ev.path("manual", 2, n)).unwrap();
    }
    let s = runner.rectify(2, false).unwrap();
    assert_eq!(s.len(), 1);
    assert!(s[0].rectified);
    let r2 = load_label_frame(&paths.labels(2, true), 2, None).unwrap();
    assert!(r2.labels.contains(&LabelId::OUTER));
    assert_eq!(fs::read(paths.labels(2, false)).unwrap(), r1_before);
    assert!(paths.garments(2, true).join("outer.ply").is_file());
    assert!(paths.render_label(2, 0, true).is_file());
    assert_eq!(fs::read(paths.labels(3, false)).unwrap(), frame3_before);

    // propagation recomputes the later frames from the corrected labels
    let s = runner.rectify(2, true).unwrap();
    assert_eq!(s.iter().map(|x| x.frame).collect::<Vec<_>>(), vec![2, 3]);
    let f3 = load_label_frame(&paths.labels(3, false), 3, None).unwrap();
    let prev = runner.load_result(&geo).unwrap();
    assert!(prev.rectified());
    let geo3 = runner.geometry(3).unwrap();
    let expected = runner.pipeline.process_frame(&geo3, &prev, &ev).unwrap();
    assert_eq!(&f3, expected.labels());

    // removing the overlay and rectifying again drops the round-2 files
    fs::remove_dir_all(dir.path().join("evidence/manual")).unwrap();
    runner.rectify(2, false).unwrap();
    assert!(!paths.labels(2, true).exists());
    assert!(!paths.render_label(2, 0, true).exists());
    assert!(!paths.garments(2, true).exists());
}

#[test]
fn runs_are_deterministic() {
    let scene = sphere_scene(3, 96);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let geo = scene.pipeline.geometry(1, &scene.mesh);
    let mut ev = MemoryEvidence::new();
    add_parser_evidence(&mut ev, &geo, &scene.truth, 6, 0.2, &mut rng);
    let a = run_sequence(&scene.pipeline, std::slice::from_ref(&scene.mesh), &ev).unwrap();
    let b = run_sequence(&scene.pipeline, std::slice::from_ref(&scene.mesh), &ev).unwrap();
    assert_eq!(a[0].labels(), b[0].labels());
    assert_eq!(a[0].trace, b[0].trace);
}

#[test]
fn one_noisy_view_is_outvoted() {
    let scene = sphere_scene(3, 96);
    let geo = scene.pipeline.geometry(1, &scene.mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ev = MemoryEvidence::new();
    add_parser_evidence(&mut ev, &geo, &scene.truth, 6, 0.0, &mut rng);
    let (w, h) = scene.pipeline.rig.image_size();
    let garbage: Vec<LabelId> = (0..w * h).map(|p| LabelId((p % 6) as i16)).collect();
    ev.parser
        .insert((1, 3), VoteImage::hard(w, h, VoteSource::Par, garbage));
    let r = scene.pipeline.init_first_frame(&geo, &ev).unwrap();
    assert_eq!(r.labels().labels, scene.truth);
}

#[test]
fn manual_overlay_on_first_frame_flips_a_region() {
    let scene = sphere_scene(3, 96);
    let p = &scene.pipeline;
    let geo = p.geometry(1, &scene.mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ev = MemoryEvidence::new();
    let mut ev = ev;
    add_parser_evidence(&mut ev, &geo, &scene.truth, 6, 0.0, &mut rng);
    let plain = p.init_first_frame(&geo, &ev).unwrap();
    assert!(!plain.rectified());

    let adjacency = labelfuse4d::build_adjacency(&geo.mesh);
    let patch = bfs_patch(&adjacency, 0, 30);
    for n in 0..p.rig.len() {
        let o = patch_overlay(&geo.maps[n], &geo.mesh, &patch, LabelId::OUTER);
        if !o.is_empty() {
            ev.set_manual(1, n, o);
        }
    }
    let fixed = p.init_first_frame(&geo, &ev).unwrap();
    assert!(fixed.rectified());
    assert_eq!(fixed.round1, plain.round1);
    for &v in &patch {
        assert_eq!(fixed.labels().labels[v], LabelId::OUTER);
    }
    let empty = vec![Some(RectificationOverlay::default()); p.rig.len()];
    let same = p.rectify_with(&geo, plain.clone(), None, &ev, &empty).unwrap();
    assert_eq!(same.labels(), plain.labels());
    assert!(same.round2.is_none());
}

#[test]
fn ablation_order_on_a_noisy_sequence() {
    let scene = sphere_scene(3, 128);
    let p = &scene.pipeline;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rot = labelfuse4d::geom::rotation_y(5f64.to_radians());
    let meshes = [scene.mesh.clone(), scene.mesh.transformed(&rot, [0.0; 3])];
    let g1 = p.geometry(1, &meshes[0]);
    let g2 = p.geometry(2, &meshes[1]);
    let mut ev = MemoryEvidence::new();
    add_parser_evidence(&mut ev, &g1, &scene.truth, 6, 0.1, &mut rng);
    add_parser_evidence(&mut ev, &g2, &scene.truth, 6, 0.45, &mut rng);
    add_mask_evidence(&mut ev, &g2, &scene.truth, 0.05, &mut rng);
    add_rigid_flow(&mut ev, p, &g1, &g2, &rot);
    let first = p.init_first_frame(&g1, &ev).unwrap();
    let acc = |t: Toggles| {
        let r = p.clone().with_toggles(t).process_frame(&g2, &first, &ev).unwrap();
        vertex_accuracy(&r.labels().labels, &scene.truth)
    };
    let par = acc(Toggles::PAR_ONLY);
    let par_opt = acc(Toggles {
        par: true,
        opt: true,
        sam: false,
    });
    let all = acc(Toggles::default());
    assert!(par <= par_opt && par_opt <= all, "{par} {par_opt} {all}");
}

#[test]
fn overlay_out_of_bounds_is_rejected() {
    let scene = sphere_scene(2, 64);
    let geo = scene.pipeline.geometry(1, &scene.mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut ev = MemoryEvidence::new();
    add_parser_evidence(&mut ev, &geo, &scene.truth, 6, 0.0, &mut rng);
    let mut o = RectificationOverlay::default();
    o.push(64, 0, LabelId::SKIN);
    ev.set_manual(1, 0, o);
    assert!(matches!(
        scene.pipeline.init_first_frame(&geo, &ev),
        Err(Error::PixelOutOfBounds { .. })
    ));
    assert!(ev.manual(1, 1).unwrap().is_none());
}

#[test]
fn garment_faces_carry_their_label() {
    let scene = sphere_scene(2, 64);
    let g = extract_garments(&scene.mesh, &scene.truth).unwrap();
    for garment in &g {
        for &fi in &garment.face_map {
            assert_eq!(face_label(scene.mesh.faces()[fi as usize], &scene.truth), garment.label);
        }
    }
    let _ = LabelFrame::new(1, scene.truth.clone());
}
