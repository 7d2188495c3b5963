use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::label::LabelId;
use crate::mesh::TriMesh;

/// Faces of one label as a standalone mesh.
#[derive(Debug, Clone)]
pub struct GarmentMesh {
    pub label: LabelId,
    pub mesh: TriMesh,
    /// Source-mesh index of every submesh vertex.
    pub vertex_map: Vec<u32>,
    /// Source-mesh index of every submesh face.
    pub face_map: Vec<u32>,
}

/// Label of a face: the label shared by at least two of its vertices, else
/// the label of its lowest-index vertex.
pub fn face_label(face: [u32; 3], labels: &[LabelId]) -> LabelId {
    let [a, b, c] = face.map(|v| labels[v as usize]);
    if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        let lowest = *face.iter().min().expect("three vertices");
        labels[lowest as usize]
    }
}

/// Splits the mesh into one submesh per face label, ordered by label id.
pub fn extract_garments(mesh: &TriMesh, labels: &[LabelId]) -> Result<Vec<GarmentMesh>> {
    if labels.len() != mesh.vertex_count() {
        return Err(Error::LengthMismatch {
            expected: mesh.vertex_count(),
            found: labels.len(),
        });
    }
    let mut groups: BTreeMap<LabelId, Vec<u32>> = BTreeMap::new();
    for (fi, &f) in mesh.faces().iter().enumerate() {
        groups.entry(face_label(f, labels)).or_default().push(fi as u32);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (label, face_map) in groups {
        let mut remap = vec![u32::MAX; mesh.vertex_count()];
        let mut vertex_map = Vec::new();
        let mut faces = Vec::with_capacity(face_map.len());
        for &fi in &face_map {
            let f = mesh.faces()[fi as usize];
            faces.push(f.map(|v| {
                if remap[v as usize] == u32::MAX {
                    remap[v as usize] = vertex_map.len() as u32;
                    vertex_map.push(v);
                }
                remap[v as usize]
            }));
        }
        let vertices = vertex_map.iter().map(|&v| mesh.vertices()[v as usize]).collect();
        let colors = mesh
            .colors()
            .map(|c| vertex_map.iter().map(|&v| c[v as usize]).collect());
        out.push(GarmentMesh {
            label,
            mesh: TriMesh::new(vertices, faces, colors)?,
            vertex_map,
            face_map,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{hemisphere_labels, icosphere};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn face_rule() {
        let l = [LabelId(3), LabelId(4), LabelId(4), LabelId(5)];
        assert_eq!(face_label([0, 1, 2], &l), LabelId(4));
        assert_eq!(face_label([3, 1, 0], &l), LabelId(3));
        assert_eq!(face_label([2, 0, 3], &l), LabelId(3));
    }

    #[test]
    fn uniform_and_hemispheres() {
        let m = icosphere(2, 1.0);
        let g = extract_garments(&m, &vec![LabelId(2); m.vertex_count()]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].mesh.face_count(), m.face_count());
        let labels = hemisphere_labels(&m, [0.0, 1.0, 0.0], LabelId::UPPER, LabelId::LOWER);
        let g = extract_garments(&m, &labels).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].mesh.face_count() + g[1].mesh.face_count(), m.face_count());
    }

    #[test]
    fn random_labels_partition_faces() {
        let m = icosphere(2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let labels: Vec<LabelId> = (0..m.vertex_count()).map(|_| LabelId(rng.random_range(0..6))).collect();
        let g = extract_garments(&m, &labels).unwrap();
        let mut seen = vec![0; m.face_count()];
        for garment in &g {
            for (local, &fi) in garment.face_map.iter().enumerate() {
                seen[fi as usize] += 1;
                assert_eq!(face_label(m.faces()[fi as usize], &labels), garment.label);
                let src = m.faces()[fi as usize];
                let dst = garment.mesh.faces()[local].map(|v| garment.vertex_map[v as usize]);
                assert_eq!(src, dst);
            }
            let mut vm = garment.vertex_map.clone();
            vm.sort_unstable();
            vm.dedup();
            assert_eq!(vm.len(), garment.vertex_map.len());
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
