//! Parsing scores, surface sampling, Chamfer distance, stretching energy and
//! the combined simulation loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::label::LabelId;
use crate::mesh::{build_adjacency, TriMesh};

/// Seed used by `sample_surface` callers that do not pick their own.
pub const DEFAULT_SAMPLE_SEED: u64 = 20240611;
/// Sample count for surface Chamfer evaluation.
pub const DEFAULT_SAMPLE_COUNT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: LabelId,
    pub support: usize,
    pub acc: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsingReport {
    pub per_label: Vec<ClassScore>,
    #[serde(rename = "mAcc")]
    pub m_acc: f64,
    #[serde(rename = "mIoU")]
    pub m_iou: f64,
    #[serde(rename = "pixelAcc")]
    pub pixel_acc: f64,
}

/// Per-class recall and IoU over classes present in `gt`. Entries where `gt`
/// is background are ignored; a background prediction counts as a miss.
pub fn parsing_metrics(pred: &[LabelId], gt: &[LabelId]) -> Result<ParsingReport> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let n_classes = gt
        .iter()
        .chain(pred)
        .filter_map(|l| l.index())
        .max()
        .map_or(0, |m| m + 1);
    let mut inter = vec![0usize; n_classes];
    let mut gt_count = vec![0usize; n_classes];
    let mut pred_count = vec![0usize; n_classes];
    let mut valid = 0usize;
    let mut correct = 0usize;
    for (&p, &g) in pred.iter().zip(gt) {
        let Some(gi) = g.index() else { continue };
        valid += 1;
        gt_count[gi] += 1;
        if let Some(pi) = p.index() {
            pred_count[pi] += 1;
            if pi == gi {
                inter[gi] += 1;
                correct += 1;
            }
        }
    }
    if valid == 0 {
        return Err(Error::Invalid("ground truth has no labeled entries".into()));
    }
    let per_label: Vec<ClassScore> = (0..n_classes)
        .filter(|&l| gt_count[l] > 0)
        .map(|l| {
            let union = gt_count[l] + pred_count[l] - inter[l];
            ClassScore {
                label: LabelId::from_index(l),
                support: gt_count[l],
                acc: inter[l] as f64 / gt_count[l] as f64,
                iou: inter[l] as f64 / union as f64,
            }
        })
        .collect();
    let k = per_label.len() as f64;
    Ok(ParsingReport {
        m_acc: per_label.iter().map(|c| c.acc).sum::<f64>() / k,
        m_iou: per_label.iter().map(|c| c.iou).sum::<f64>() / k,
        pixel_acc: correct as f64 / valid as f64,
        per_label,
    })
}

/// Area-weighted surface samples. Each face receives `floor(n * share)`
/// samples, the remainder goes to the faces with the largest fractional
/// parts, and points are drawn uniformly inside each face.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    if n == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    let areas: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSurface);
    }
    let mut counts = Vec::with_capacity(areas.len());
    let mut remainders = Vec::with_capacity(areas.len());
    let mut assigned = 0usize;
    for (f, a) in areas.iter().enumerate() {
        let exact = n as f64 * a / total;
        let c = exact.floor() as usize;
        counts.push(c);
        assigned += c;
        remainders.push((exact - c as f64, f));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, f) in remainders.iter().take(n.saturating_sub(assigned)) {
        counts[f] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for (f, &c) in counts.iter().enumerate() {
        let [a, b, cc] = mesh.face_vertices(f);
        for _ in 0..c {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let s = r1.sqrt();
            let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
            out.push(geom::add(
                geom::add(geom::scale(a, wa), geom::scale(b, wb)),
                geom::scale(cc, wc),
            ));
        }
    }
    Ok(out)
}

/// Static k-d tree over a point set for nearest-neighbor queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    // implicit layout: the middle element of every range is its split point
    axes: Vec<u8>,
}

const LEAF_SIZE: usize = 8;

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut pts = points.to_vec();
        let mut axes = vec![0u8; pts.len()];
        build(&mut pts, &mut axes, 0);
        KdTree { points: pts, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `q` to the closest stored point.
    pub fn nearest_sq(&self, q: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), q, &mut best);
        best
    }

    fn search(&self, lo: usize, hi: usize, q: Vec3, best: &mut f64) {
        if hi - lo <= LEAF_SIZE {
            for p in &self.points[lo..hi] {
                let d = geom::dist2(*p, q);
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = self.axes[mid] as usize;
        let split = self.points[mid];
        let d = geom::dist2(split, q);
        if d < *best {
            *best = d;
        }
        let diff = q[axis] - split[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        if diff * diff < *best {
            self.search(far.0, far.1, q, best);
        }
    }
}

fn build(pts: &mut [Vec3], axes: &mut [u8], depth: usize) {
    let n = pts.len();
    if n <= LEAF_SIZE {
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts.iter() {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(depth % 3);
    let mid = n / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (left, rest) = pts.split_at_mut(mid);
    let (laxes, raxes) = axes.split_at_mut(mid);
    build(left, laxes, depth + 1);
    build(&mut rest[1..], &mut raxes[1..], depth + 1);
}

fn check_cloud(points: &[Vec3], name: &str) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Invalid(format!("{name} point cloud is empty")));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("{name} point cloud has non-finite coordinates")));
    }
    Ok(())
}

/// Mean squared distance from each point of `from` to its nearest point in `to`.
pub fn directed_chamfer(from: &[Vec3], to: &[Vec3]) -> Result<f64> {
    check_cloud(from, "source")?;
    check_cloud(to, "target")?;
    let tree = KdTree::new(to);
    let d: Vec<f64> = from.par_iter().map(|&p| tree.nearest_sq(p)).collect();
    Ok(d.iter().sum::<f64>() / from.len() as f64)
}

/// Symmetric squared Chamfer distance.
pub fn chamfer_squared(x: &[Vec3], y: &[Vec3]) -> Result<f64> {
    Ok(directed_chamfer(x, y)? + directed_chamfer(y, x)?)
}

/// Quadratic-time reference for `chamfer_squared`.
pub fn chamfer_squared_brute(x: &[Vec3], y: &[Vec3]) -> Result<f64> {
    check_cloud(x, "source")?;
    check_cloud(y, "target")?;
    let dir = |a: &[Vec3], b: &[Vec3]| {
        a.iter()
            .map(|&p| b.iter().map(|&q| geom::dist2(p, q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / a.len() as f64
    };
    Ok(dir(x, y) + dir(y, x))
}

pub fn scale_points(points: &[Vec3], factor: f64) -> Vec<Vec3> {
    points.iter().map(|&p| geom::scale(p, factor)).collect()
}

/// Edge lengths of a deformed mesh next to those of its rest template, over
/// the template's unique edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLengths {
    pub rest: Vec<f64>,
    pub current: Vec<f64>,
}

impl EdgeLengths {
    pub fn new(rest: Vec<f64>, current: Vec<f64>) -> Result<Self> {
        if rest.len() != current.len() {
            return Err(Error::LengthMismatch {
                expected: rest.len(),
                found: current.len(),
            });
        }
        Ok(EdgeLengths { rest, current })
    }

    pub fn from_meshes(template: &TriMesh, deformed: &TriMesh) -> Result<Self> {
        if template.vertex_count() != deformed.vertex_count() {
            return Err(Error::LengthMismatch {
                expected: template.vertex_count(),
                found: deformed.vertex_count(),
            });
        }
        if template.faces() != deformed.faces() {
            return Err(Error::InvalidMesh(
                "deformed mesh does not share the template topology".into(),
            ));
        }
        let graph = build_adjacency(template);
        let len =
            |m: &TriMesh, (a, b): (u32, u32)| geom::dist2(m.vertices()[a as usize], m.vertices()[b as usize]).sqrt();
        let rest = graph.edges().iter().map(|&e| len(template, e)).collect();
        let current = graph.edges().iter().map(|&e| len(deformed, e)).collect();
        Ok(EdgeLengths { rest, current })
    }

    pub fn len(&self) -> usize {
        self.rest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rest.is_empty()
    }
}

/// Mean squared deviation between current and rest edge lengths.
pub fn stretching_energy(edges: &EdgeLengths) -> Result<f64> {
    if edges.is_empty() {
        return Err(Error::Invalid("no edges".into()));
    }
    let s: f64 = edges
        .rest
        .iter()
        .zip(&edges.current)
        .map(|(r, c)| (c - r) * (c - r))
        .sum();
    Ok(s / edges.len() as f64)
}

/// Chamfer distance between the vertex sets of two meshes.
pub fn vertex_chamfer(a: &TriMesh, b: &TriMesh) -> Result<f64> {
    chamfer_squared(a.vertices(), b.vertices())
}

/// Vertex Chamfer to the ground truth plus `w` times the stretching energy
/// of `sim` against `template`.
pub fn simulation_loss(sim: &TriMesh, gt: &TriMesh, template: &TriMesh, w: f64) -> Result<f64> {
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::InvalidWeights(format!("w = {w}")));
    }
    let edges = EdgeLengths::from_meshes(template, sim)?;
    Ok(vertex_chamfer(sim, gt)? + w * stretching_energy(&edges)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(v: &[i16]) -> Vec<LabelId> {
        v.iter().map(|&x| LabelId(x)).collect()
    }

    #[test]
    fn parsing_worked_example() {
        let gt = l(&[3, 3, 4, 4]);
        let pred = l(&[3, 3, 3, 3]);
        let r = parsing_metrics(&pred, &gt).unwrap();
        assert_eq!(r.m_acc, 0.5);
        assert_eq!(r.m_iou, 0.25);
        assert_eq!(r.pixel_acc, 0.5);
        let same = parsing_metrics(&gt, &gt).unwrap();
        assert_eq!((same.m_acc, same.m_iou), (1.0, 1.0));
        assert!(parsing_metrics(&pred[..3], &gt).is_err());
    }

    #[test]
    fn background_gt_is_ignored() {
        let gt = l(&[-1, -1, 0, 1]);
        let pred = l(&[2, 0, 0, -1]);
        let r = parsing_metrics(&pred, &gt).unwrap();
        assert_eq!(r.per_label.len(), 2);
        assert_eq!(r.per_label[0].acc, 1.0);
        assert_eq!(r.per_label[1].acc, 0.0);
        assert_eq!(r.pixel_acc, 0.5);
    }

    #[test]
    fn two_point_chamfer() {
        let x = [[0.0, 0.0, 0.0]];
        let y = [[1.0, 0.0, 0.0]];
        assert_eq!(chamfer_squared(&x, &y).unwrap(), 2.0);
        assert_eq!(chamfer_squared(&x, &x).unwrap(), 0.0);
        assert!(chamfer_squared(&x, &[]).is_err());
    }

    #[test]
    fn stretch_worked_example() {
        let e = EdgeLengths::new(vec![1.0; 4], vec![2.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(stretching_energy(&e).unwrap(), 0.25);
        assert!(stretching_energy(&EdgeLengths::new(vec![], vec![]).unwrap()).is_err());
    }

    #[test]
    fn sampling_split_and_determinism() {
        // areas 1 and 3
        let mesh = TriMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [2.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [10.0, 0.0, 0.0],
                [16.0, 0.0, 0.0],
                [10.0, 1.0, 0.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
            None,
        )
        .unwrap();
        let pts = sample_surface(&mesh, 100_000, 7).unwrap();
        assert_eq!(pts.len(), 100_000);
        let second = pts.iter().filter(|p| p[0] >= 10.0).count() as f64 / 1e5;
        assert!((second - 0.75).abs() < 0.02);
        assert!(pts.iter().all(|p| p[2].abs() < 1e-9));
        assert_eq!(pts, sample_surface(&mesh, 100_000, 7).unwrap());
    }

    proptest! {
        #[test]
        fn kd_tree_matches_brute(
            x in proptest::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..80),
            y in proptest::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..80),
        ) {
            let fast = chamfer_squared(&x, &y).unwrap();
            let slow = chamfer_squared_brute(&x, &y).unwrap();
            prop_assert!((fast - slow).abs() < 1e-9);
            prop_assert!((fast - chamfer_squared(&y, &x).unwrap()).abs() < 1e-12);
        }
    }
}
