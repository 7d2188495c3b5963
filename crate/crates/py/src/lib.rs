//! Python bindings: meshes, label files, the energy solver, metrics, and the
//! sequence runner. Labels cross the boundary as plain `int` lists with -1
//! for background.

use std::path::PathBuf;

use labelfuse4d::energy::{self, ExpansionOptions};
use labelfuse4d::evidence::RectificationOverlay;
use labelfuse4d::fixture::{write_fixture as write_fixture_files, FixtureOptions};
use labelfuse4d::frame::load_label_frame;
use labelfuse4d::metrics;
use labelfuse4d::pipeline::{self as pl, extract_garments};
use labelfuse4d::{
    AdjacencyGraph, DirEvidence, EnergyProblem, Error, LabelFrame, LabelId, LabelRegistry, SequenceManifest,
    SequenceRunner, Toggles, TriMesh, UnaryTable,
};
use pyo3::exceptions::{PyFileNotFoundError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: Error) -> PyErr {
    let mut msg = e.to_string();
    let mut src = std::error::Error::source(&e);
    while let Some(s) = src {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        src = s.source();
    }
    match e {
        Error::MissingEvidence { .. } => PyFileNotFoundError::new_err(msg),
        Error::Io { .. } => PyOSError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn ids(labels: Vec<i16>) -> Vec<LabelId> {
    labels.into_iter().map(LabelId).collect()
}

fn raw(labels: &[LabelId]) -> Vec<i16> {
    labels.iter().map(|l| l.0).collect()
}

/// Source and smoothness weights. Keyword arguments override the defaults.
#[pyclass(name = "FusionWeights", get_all, set_all, from_py_object)]
#[derive(Debug, Clone)]
pub struct PyFusionWeights {
    lambda_p: f64,
    lambda_o: f64,
    lambda_s: f64,
    lambda_po: f64,
    lambda_b: f64,
    w_man: f64,
}

impl From<energy::FusionWeights> for PyFusionWeights {
    fn from(w: energy::FusionWeights) -> Self {
        PyFusionWeights {
            lambda_p: w.lambda_p,
            lambda_o: w.lambda_o,
            lambda_s: w.lambda_s,
            lambda_po: w.lambda_po,
            lambda_b: w.lambda_b,
            w_man: w.w_man,
        }
    }
}

impl PyFusionWeights {
    fn to_core(&self) -> PyResult<energy::FusionWeights> {
        let w = energy::FusionWeights {
            lambda_p: self.lambda_p,
            lambda_o: self.lambda_o,
            lambda_s: self.lambda_s,
            lambda_po: self.lambda_po,
            lambda_b: self.lambda_b,
            w_man: self.w_man,
        };
        w.validate().map_err(err)?;
        Ok(w)
    }
}

#[pymethods]
impl PyFusionWeights {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut w = energy::FusionWeights::default();
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                w.set(&k.extract::<String>()?, v.extract::<f64>()?).map_err(err)?;
            }
        }
        Ok(w.into())
    }

    fn __repr__(&self) -> String {
        format!(
            "FusionWeights(lambda_p={}, lambda_o={}, lambda_s={}, lambda_po={}, lambda_b={}, w_man={})",
            self.lambda_p, self.lambda_o, self.lambda_s, self.lambda_po, self.lambda_b, self.w_man
        )
    }
}

/// Triangle mesh with optional per-vertex colors.
#[pyclass(name = "Mesh", frozen, skip_from_py_object)]
#[derive(Debug, Clone)]
pub struct PyMesh {
    inner: TriMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    #[pyo3(signature = (vertices, faces, colors=None))]
    fn new(vertices: Vec<[f64; 3]>, faces: Vec<[u32; 3]>, colors: Option<Vec<[f32; 3]>>) -> PyResult<Self> {
        Ok(PyMesh {
            inner: TriMesh::new(vertices, faces, colors).map_err(err)?,
        })
    }

    /// Reads `.ply` or `.obj`.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyMesh {
            inner: labelfuse4d::load_mesh(&path).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (level, radius=1.0))]
    fn icosphere(level: u32, radius: f64) -> Self {
        PyMesh {
            inner: labelfuse4d::synthetic::icosphere(level, radius),
        }
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        labelfuse4d::save_mesh(&path, &self.inner).map_err(err)
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn face_count(&self) -> usize {
        self.inner.face_count()
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.vertices().to_vec()
    }

    #[getter]
    fn faces(&self) -> Vec<[u32; 3]> {
        self.inner.faces().to_vec()
    }

    #[getter]
    fn has_colors(&self) -> bool {
        self.inner.colors().is_some()
    }

    /// Unique vertex pairs sharing a face edge, `a < b`, sorted.
    fn edges(&self) -> Vec<(u32, u32)> {
        labelfuse4d::build_adjacency(&self.inner).edges().to_vec()
    }

    fn translated(&self, t: [f64; 3]) -> Self {
        PyMesh {
            inner: self.inner.translated(t),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(vertices={}, faces={})",
            self.inner.vertex_count(),
            self.inner.face_count()
        )
    }
}

#[pyclass(name = "FrameSummary", frozen, get_all, skip_from_py_object)]
#[derive(Debug, Clone)]
pub struct PyFrameSummary {
    frame: usize,
    vertices: usize,
    energy: Option<f64>,
    moved: usize,
    rectified: bool,
}

impl From<pl::FrameSummary> for PyFrameSummary {
    fn from(s: pl::FrameSummary) -> Self {
        PyFrameSummary {
            frame: s.frame,
            vertices: s.vertices,
            energy: s.energy,
            moved: s.moved,
            rectified: s.rectified,
        }
    }
}

#[pymethods]
impl PyFrameSummary {
    fn __repr__(&self) -> String {
        format!(
            "FrameSummary(frame={}, vertices={}, energy={:?}, moved={}, rectified={})",
            self.frame, self.vertices, self.energy, self.moved, self.rectified
        )
    }
}

/// A manifest-described sequence and its output tree.
#[pyclass(name = "Sequence", frozen)]
pub struct PySequence {
    manifest: SequenceManifest,
    evidence: DirEvidence,
    weights: energy::FusionWeights,
    toggles: Toggles,
    out: PathBuf,
}

impl PySequence {
    fn runner(&self) -> PyResult<SequenceRunner<'_>> {
        SequenceRunner::new(&self.manifest, &self.evidence, self.weights, self.toggles, &self.out).map_err(err)
    }
}

#[pymethods]
impl PySequence {
    #[new]
    #[pyo3(signature = (manifest, out=None, weights=None, toggles="all"))]
    fn new(manifest: PathBuf, out: Option<PathBuf>, weights: Option<PyFusionWeights>, toggles: &str) -> PyResult<Self> {
        let manifest = SequenceManifest::load(&manifest).map_err(err)?;
        let weights = match weights {
            Some(w) => w.to_core()?,
            None => manifest.weights,
        };
        Ok(PySequence {
            evidence: DirEvidence::from_manifest(&manifest),
            toggles: Toggles::parse(toggles).map_err(err)?,
            out: out.unwrap_or_else(|| manifest.output_root.clone()),
            weights,
            manifest,
        })
    }

    #[getter]
    fn frames(&self) -> Vec<usize> {
        self.manifest.frames.iter().map(|f| f.index).collect()
    }

    #[getter]
    fn output_root(&self) -> PathBuf {
        self.out.clone()
    }

    /// Labels every frame (or the ones after the last completed frame with
    /// `resume`) and writes the output tree.
    #[pyo3(signature = (resume=false))]
    fn run(&self, py: Python<'_>, resume: bool) -> PyResult<Vec<PyFrameSummary>> {
        let rows = py.detach(|| self.runner()?.run(resume).map_err(err))?;
        Ok(rows.into_iter().map(Into::into).collect())
    }

    #[pyo3(signature = (frame, propagate=false))]
    fn rectify(&self, py: Python<'_>, frame: usize, propagate: bool) -> PyResult<Vec<PyFrameSummary>> {
        let rows = py.detach(|| self.runner()?.rectify(frame, propagate).map_err(err))?;
        Ok(rows.into_iter().map(Into::into).collect())
    }

    /// Final labels of a processed frame (round 2 when present).
    fn labels(&self, py: Python<'_>, frame: usize) -> PyResult<Vec<i16>> {
        py.detach(|| {
            let runner = self.runner()?;
            let geo = runner.geometry(frame).map_err(err)?;
            let result = runner.load_result(&geo).map_err(err)?;
            Ok(raw(&result.labels().labels))
        })
    }

    /// Stores `[(x, y, label), ...]` as the manual overlay of one view.
    fn set_corrections(&self, frame: usize, view: usize, entries: Vec<(i64, i64, i16)>) -> PyResult<()> {
        if self.manifest.frame(frame).is_none() {
            return Err(PyValueError::new_err(format!("frame {frame} is not in the manifest")));
        }
        let runner = self.runner()?;
        let rig = &runner.pipeline.rig;
        if view >= rig.len() {
            return Err(PyValueError::new_err(format!(
                "view {view} out of range (rig has {})",
                rig.len()
            )));
        }
        let overlay = RectificationOverlay {
            entries: entries.into_iter().map(|(x, y, l)| (x, y, LabelId(l))).collect(),
        };
        let (w, h) = rig.image_size();
        overlay.validate(w, h, &self.manifest.registry).map_err(err)?;
        overlay.save(&self.evidence.path("manual", frame, view)).map_err(err)
    }
}

/// Minimizes unary plus Potts energy over `edges` by alpha-expansion.
/// Returns `(labels, energy)`.
#[pyfunction]
#[pyo3(signature = (unary, edges, lambda_b, init=None, max_passes=10))]
fn alpha_expansion(
    py: Python<'_>,
    unary: Vec<Vec<f64>>,
    edges: Vec<(u32, u32)>,
    lambda_b: f64,
    init: Option<Vec<i16>>,
    max_passes: usize,
) -> PyResult<(Vec<i16>, f64)> {
    let table = UnaryTable::from_rows(&unary).map_err(err)?;
    let n = table.n_vertices();
    let graph = AdjacencyGraph::from_edges(n, edges);
    let problem = EnergyProblem::new(table, graph, lambda_b).map_err(err)?;
    let init = init.map(ids).unwrap_or_else(|| vec![LabelId::BACKGROUND; n]);
    let options = ExpansionOptions { max_passes };
    let result = py
        .detach(|| labelfuse4d::alpha_expansion(&problem, &init, &options))
        .map_err(err)?;
    Ok((raw(&result.labels), result.energy))
}

/// Per-row min-max normalization of a unary table.
#[pyfunction]
fn normalize_unary(rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let n = labelfuse4d::normalize_unary(&UnaryTable::from_rows(&rows).map_err(err)?);
    Ok((0..n.n_vertices()).map(|v| n.row(v).to_vec()).collect())
}

/// `{"mAcc", "mIoU", "pixelAcc", "per_label": [{"label", "support", "acc", "iou"}]}`
#[pyfunction]
fn parsing_metrics<'py>(py: Python<'py>, pred: Vec<i16>, gt: Vec<i16>) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::parsing_metrics(&ids(pred), &ids(gt)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("mAcc", r.m_acc)?;
    out.set_item("mIoU", r.m_iou)?;
    out.set_item("pixelAcc", r.pixel_acc)?;
    let per = r
        .per_label
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("label", c.label.0)?;
            d.set_item("support", c.support)?;
            d.set_item("acc", c.acc)?;
            d.set_item("iou", c.iou)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("per_label", per)?;
    Ok(out)
}

/// Symmetric mean squared nearest-neighbor distance.
#[pyfunction]
fn chamfer(py: Python<'_>, x: Vec<[f64; 3]>, y: Vec<[f64; 3]>) -> PyResult<f64> {
    py.detach(|| metrics::chamfer_squared(&x, &y)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (mesh, n, seed=metrics::DEFAULT_SAMPLE_SEED))]
fn sample_surface(mesh: &PyMesh, n: usize, seed: u64) -> PyResult<Vec<[f64; 3]>> {
    metrics::sample_surface(&mesh.inner, n, seed).map_err(err)
}

/// Mean squared edge-length change from `template` to `deformed`.
#[pyfunction]
fn stretching_energy(template: &PyMesh, deformed: &PyMesh) -> PyResult<f64> {
    let edges = metrics::EdgeLengths::from_meshes(&template.inner, &deformed.inner).map_err(err)?;
    metrics::stretching_energy(&edges).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (sim, gt, template, w=1.0))]
fn simulation_loss(sim: &PyMesh, gt: &PyMesh, template: &PyMesh, w: f64) -> PyResult<f64> {
    metrics::simulation_loss(&sim.inner, &gt.inner, &template.inner, w).map_err(err)
}

#[pyfunction]
fn load_labels(path: PathBuf) -> PyResult<Vec<i16>> {
    Ok(raw(&load_label_frame(&path, 0, None).map_err(err)?.labels))
}

#[pyfunction]
fn save_labels(path: PathBuf, labels: Vec<i16>) -> PyResult<()> {
    labelfuse4d::save_label_frame(&LabelFrame::new(0, ids(labels)), &path).map_err(err)
}

/// One submesh per face label: `[(label, Mesh, vertex_map)]`.
#[pyfunction]
fn garments(mesh: &PyMesh, labels: Vec<i16>) -> PyResult<Vec<(i16, PyMesh, Vec<u32>)>> {
    Ok(extract_garments(&mesh.inner, &ids(labels))
        .map_err(err)?
        .into_iter()
        .map(|g| (g.label.0, PyMesh { inner: g.mesh }, g.vertex_map))
        .collect())
}

/// Default label set as `[(id, name, (r, g, b))]`.
#[pyfunction]
fn default_registry() -> Vec<(i16, String, [u8; 3])> {
    LabelRegistry::default()
        .entries()
        .iter()
        .map(|e| (e.id.0, e.name.clone(), e.color))
        .collect()
}

/// Writes a synthetic sequence with evidence; returns `(manifest_path, truth)`.
#[pyfunction]
#[pyo3(signature = (root, frames=5, level=3, image_size=128, noise=0.1, seed=7))]
fn write_fixture(
    py: Python<'_>,
    root: PathBuf,
    frames: usize,
    level: u32,
    image_size: usize,
    noise: f64,
    seed: u64,
) -> PyResult<(PathBuf, Vec<i16>)> {
    let opts = FixtureOptions {
        frames,
        level,
        image_size,
        noise,
        seed,
        ..FixtureOptions::default()
    };
    let fx = py.detach(|| write_fixture_files(&root, &opts)).map_err(err)?;
    Ok((fx.manifest, raw(&fx.truth)))
}

#[pymodule]
pub fn labelfuse4d_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFusionWeights>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyFrameSummary>()?;
    m.add_class::<PySequence>()?;
    m.add_function(wrap_pyfunction!(alpha_expansion, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_unary, m)?)?;
    m.add_function(wrap_pyfunction!(parsing_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(chamfer, m)?)?;
    m.add_function(wrap_pyfunction!(sample_surface, m)?)?;
    m.add_function(wrap_pyfunction!(stretching_energy, m)?)?;
    m.add_function(wrap_pyfunction!(simulation_loss, m)?)?;
    m.add_function(wrap_pyfunction!(load_labels, m)?)?;
    m.add_function(wrap_pyfunction!(save_labels, m)?)?;
    m.add_function(wrap_pyfunction!(garments, m)?)?;
    m.add_function(wrap_pyfunction!(default_registry, m)?)?;
    m.add_function(wrap_pyfunction!(write_fixture, m)?)?;
    m.add("BACKGROUND", LabelId::BACKGROUND.0)?;
    Ok(())
}
