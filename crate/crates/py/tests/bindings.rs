use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::attach(|py| {
        let m = PyModule::new(py, "labelfuse4d_py").unwrap();
        labelfuse4d_py::labelfuse4d_py(&m).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("lf", m).unwrap();
        f(py, &globals);
    });
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    if let Err(e) = py.run(&code, Some(globals), None) {
        panic!("{e}");
    }
}

#[test]
fn solver_and_metrics() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
labels, energy = lf.alpha_expansion([[0.0, 1.0], [1.0, 0.0]], [(0, 1)], 0.25)
assert labels == [0, 1] and abs(energy - 0.25) < 1e-12
labels, _ = lf.alpha_expansion([[0.0, 1.0], [1.0, 0.0]], [(0, 1)], 5.0, init=[1, 1])
assert labels[0] == labels[1]
r = lf.parsing_metrics([3, 3, 3, 3], [3, 3, 4, 4])
assert (r["mAcc"], r["mIoU"], r["pixelAcc"]) == (0.5, 0.25, 0.5)
assert [c["label"] for c in r["per_label"]] == [3, 4]
assert lf.chamfer([[0, 0, 0]], [[1, 0, 0]]) == 2.0
s = lf.Mesh.icosphere(1)
assert (s.vertex_count, s.face_count, len(s.edges())) == (42, 80, 120)
assert lf.BACKGROUND == -1
"#,
        );
    });
}

#[test]
fn errors_become_python_exceptions() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
def raises(exc, f, *a, **kw):
    try:
        f(*a, **kw)
    except exc:
        return
    raise AssertionError(f"{f} did not raise {exc}")

raises(ValueError, lf.parsing_metrics, [0], [0, 1])
raises(ValueError, lf.FusionWeights, q=1.0)
raises(ValueError, lf.Mesh, [[0, 0, 0]], [[0, 1, 2]])
raises(OSError, lf.load_labels, "/nonexistent/x.l4dl")
raises(OSError, lf.Sequence, "/nonexistent/manifest.json")
w = lf.FusionWeights(b=0.5)
assert w.lambda_b == 0.5 and w.w_man == 10.0
w.lambda_p = 2.0
assert "lambda_p=2" in repr(w)
"#,
        );
    });
}

#[test]
fn sequence_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    with_module(|py, g| {
        g.set_item("root", dir.path()).unwrap();
        run(
            py,
            g,
            r#"
import os
manifest, truth = lf.write_fixture(root, frames=2, level=2, image_size=64)
seq = lf.Sequence(manifest, toggles="par")
rows = seq.run()
assert [r.frame for r in rows] == [1, 2]
assert lf.parsing_metrics(seq.labels(2), truth)["mAcc"] > 0.95
os.remove(os.path.join(root, "evidence", "masks", "2", "0.json"))
try:
    lf.Sequence(manifest).run()
except FileNotFoundError as e:
    assert "masks" in str(e)
else:
    raise AssertionError("missing masks went unnoticed")
"#,
        );
    });
}
