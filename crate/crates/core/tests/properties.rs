use std::io::Cursor;
use std::path::Path;

use labelfuse4d::energy::{argmin_labels, normalize_unary};
use labelfuse4d::evidence::{
    decode_flo, decode_masks_json, encode_flo, encode_masks_json, filter_masks, FlowField, Mask, MaskFilter, MaskSet,
};
use labelfuse4d::frame::{decode, encode_binary};
use labelfuse4d::geom::{self, rotation_y};
use labelfuse4d::image_io::{decode_index_png, encode_label_png, BACKGROUND_INDEX};
use labelfuse4d::label::{LabelId, LabelRegistry};
use labelfuse4d::metrics::{chamfer_squared, parsing_metrics};
use labelfuse4d::raster::{rasterize, LabelImage};
use labelfuse4d::synthetic::icosphere;
use labelfuse4d::{build_adjacency, TriMesh, UnaryTable, ViewCamera};
use proptest::prelude::*;

fn labels(max: i16) -> impl Strategy<Value = Vec<i16>> {
    proptest::collection::vec(-1..max, 1..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_ignores_face_order_and_follows_relabeling(seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mesh = icosphere(1, 1.0);
        let base = build_adjacency(&mesh);

        let mut faces = mesh.faces().to_vec();
        faces.shuffle(&mut rng);
        let shuffled = TriMesh::new(mesh.vertices().to_vec(), faces, None).unwrap();
        let again = build_adjacency(&shuffled);
        prop_assert_eq!(again.edges(), base.edges());

        let mut perm: Vec<u32> = (0..mesh.vertex_count() as u32).collect();
        perm.shuffle(&mut rng);
        let mut verts = vec![[0.0; 3]; mesh.vertex_count()];
        for (old, &new) in perm.iter().enumerate() {
            verts[new as usize] = mesh.vertices()[old];
        }
        let faces = mesh.faces().iter().map(|f| f.map(|v| perm[v as usize])).collect();
        let relabeled = build_adjacency(&TriMesh::new(verts, faces, None).unwrap());
        prop_assert_eq!(relabeled.edge_count(), base.edge_count());
        for &(a, b) in base.edges() {
            prop_assert!(relabeled.contains(perm[a as usize] as usize, perm[b as usize] as usize));
        }
    }

    #[test]
    fn recenter_is_idempotent(t in prop::array::uniform3(-5.0f64..5.0)) {
        let mesh = icosphere(1, 0.7).translated(t);
        let (once, off) = mesh.recenter();
        let (twice, off2) = once.recenter();
        for c in 0..3 {
            prop_assert!((off[c] - t[c]).abs() < 1e-12);
            prop_assert!(off2[c].abs() < 1e-12);
        }
        for (a, b) in once.vertices().iter().zip(twice.vertices()) {
            prop_assert!(geom::dist2(*a, *b) < 1e-24);
        }
    }

    #[test]
    fn mask_filter_keeps_a_subset_and_is_idempotent(bits in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 64 * 64), 1..6)) {
        let mesh = icosphere(2, 1.0);
        let cam = ViewCamera::look_at([0.0, 0.0, 4.0], [0.0; 3], 90.0, 64, 64).unwrap();
        let map = rasterize(&mesh, &cam);
        let masks: Vec<Mask> = bits.iter().map(|b| Mask::from_fn(64, 64, |x, y| b[y * 64 + x])).collect();
        let raw = MaskSet::new(64, 64, masks).unwrap();
        let filter = MaskFilter { min_area: 10, ..MaskFilter::default() };
        let once = filter_masks(&raw, &map, &filter).unwrap();
        prop_assert!(once.masks.iter().all(|m| raw.masks.contains(m)));
        let twice = filter_masks(&once, &map, &filter).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn chamfer_is_rigid_invariant(
        x in proptest::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..60),
        y in proptest::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..60),
        angle in 0.0f64..6.3,
        t in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let r = rotation_y(angle);
        let move_all = |p: &[[f64; 3]]| -> Vec<[f64; 3]> { p.iter().map(|&v| geom::add(geom::mat_vec(&r, v), t)).collect() };
        let a = chamfer_squared(&x, &y).unwrap();
        let b = chamfer_squared(&move_all(&x), &move_all(&y)).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn parsing_metrics_survive_consistent_relabeling(pred in labels(4), shift in 1i16..4) {
        let gt: Vec<LabelId> = pred.iter().rev().map(|&l| LabelId(l)).collect();
        let pred: Vec<LabelId> = pred.iter().map(|&l| LabelId(l)).collect();
        prop_assume!(gt.iter().any(|l| !l.is_background()));
        let rot = |l: &LabelId| if l.is_background() { *l } else { LabelId((l.0 + shift) % 4) };
        let a = parsing_metrics(&pred, &gt).unwrap();
        let b = parsing_metrics(&pred.iter().map(rot).collect::<Vec<_>>(), &gt.iter().map(rot).collect::<Vec<_>>()).unwrap();
        prop_assert!((a.m_acc - b.m_acc).abs() < 1e-12);
        prop_assert!((a.m_iou - b.m_iou).abs() < 1e-12);
        prop_assert!(a.m_iou <= a.m_acc + 1e-12);
    }

    #[test]
    fn normalized_rows_span_unit_interval(rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 3), 1..40)) {
        let raw = UnaryTable::from_rows(&rows).unwrap();
        let n = normalize_unary(&raw);
        for v in 0..n.n_vertices() {
            let row = n.row(v);
            prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(lo, 0.0);
        }
        prop_assert_eq!(argmin_labels(&n), argmin_labels(&raw));
    }

    #[test]
    fn label_files_round_trip(l in labels(6)) {
        let l: Vec<LabelId> = l.into_iter().map(LabelId).collect();
        prop_assert_eq!(decode(&encode_binary(&l), Path::new("x")).unwrap(), l);
    }

    #[test]
    fn label_png_round_trips(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let img = LabelImage { width: w, height: h, labels: (0..w * h).map(|_| LabelId(rng.random_range(-1..6))).collect() };
        let bytes = encode_label_png(&img, &LabelRegistry::default()).unwrap();
        let back = decode_index_png(Cursor::new(bytes)).unwrap();
        for (i, l) in back.indices.iter().zip(&img.labels) {
            match l.index() {
                Some(k) => prop_assert_eq!(*i as usize, k),
                None => prop_assert_eq!(*i, BACKGROUND_INDEX),
            }
        }
    }

    #[test]
    fn flow_and_masks_round_trip(w in 1usize..16, h in 1usize..16, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut flow = FlowField::zeros(w, h);
        for d in flow.data.iter_mut() {
            *d = [rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)];
        }
        prop_assert_eq!(&decode_flo(&encode_flo(&flow)).unwrap(), &flow);
        let masks: Vec<Mask> = (0..3)
            .map(|_| {
                let bits: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.5)).collect();
                Mask::from_fn(w, h, |x, y| bits[y * w + x])
            })
            .collect();
        let set = MaskSet::new(w, h, masks).unwrap();
        prop_assert_eq!(decode_masks_json(&encode_masks_json(&set)).unwrap(), set);
    }
}
