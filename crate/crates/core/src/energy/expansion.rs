use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::error::{Error, Result};
use crate::label::LabelId;
use crate::mesh::AdjacencyGraph;

use super::maxflow::{Graph, Segment};
use super::unary::{argmin_labels, UnaryTable};

/// Unary table plus Potts smoothness over the mesh graph.
#[derive(Debug, Clone)]
pub struct EnergyProblem {
    pub unary: UnaryTable,
    pub adjacency: AdjacencyGraph,
    pub lambda_b: f64,
}

impl EnergyProblem {
    pub fn new(unary: UnaryTable, adjacency: AdjacencyGraph, lambda_b: f64) -> Result<Self> {
        if unary.n_labels() == 0 {
            return Err(Error::EmptyLabelSet);
        }
        if adjacency.vertex_count() != unary.n_vertices() {
            return Err(Error::LengthMismatch {
                expected: unary.n_vertices(),
                found: adjacency.vertex_count(),
            });
        }
        if !(lambda_b.is_finite() && lambda_b >= 0.0) {
            return Err(Error::InvalidWeights(format!("lambda_b = {lambda_b}")));
        }
        if unary.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite unary cost".into()));
        }
        Ok(EnergyProblem {
            unary,
            adjacency,
            lambda_b,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.unary.n_vertices()
    }

    pub fn n_labels(&self) -> usize {
        self.unary.n_labels()
    }

    pub fn labels(&self) -> impl Iterator<Item = LabelId> {
        (0..self.n_labels()).map(LabelId::from_index)
    }

    fn index_of(&self, label: LabelId) -> Result<usize> {
        match label.index() {
            Some(i) if i < self.n_labels() => Ok(i),
            _ => Err(Error::UnknownLabel(label.0 as i32)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionOptions {
    pub max_passes: usize,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions { max_passes: 10 }
    }
}

/// Energy after one attempted move. Move 0 is the initial labeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub move_index: usize,
    pub label: LabelId,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct ExpansionResult {
    pub labels: Vec<LabelId>,
    pub energy: f64,
    pub passes: usize,
    pub trace: Vec<TraceEntry>,
}

/// Total energy: unary costs plus `lambda_b` per edge whose endpoints differ.
pub fn energy_of(problem: &EnergyProblem, labels: &[LabelId]) -> Result<f64> {
    if labels.len() != problem.n_vertices() {
        return Err(Error::LengthMismatch {
            expected: problem.n_vertices(),
            found: labels.len(),
        });
    }
    let mut idx = Vec::with_capacity(labels.len());
    for &l in labels {
        idx.push(problem.index_of(l)?);
    }
    Ok(energy_idx(problem, &idx))
}

fn energy_idx(problem: &EnergyProblem, idx: &[usize]) -> f64 {
    let unary: f64 = idx.iter().enumerate().map(|(v, &l)| problem.unary.get(v, l)).sum();
    let cut = problem
        .adjacency
        .edges()
        .iter()
        .filter(|(a, b)| idx[*a as usize] != idx[*b as usize])
        .count();
    unary + problem.lambda_b * cut as f64
}

fn improves(new: f64, old: f64) -> bool {
    new < old - 1e-12 * old.abs().max(1.0)
}

/// Best labeling reachable from `current` by letting any subset of vertices
/// switch to `alpha`. Returns the candidate without comparing energies.
pub fn expansion_move(problem: &EnergyProblem, current: &[LabelId], alpha: LabelId) -> Result<Vec<LabelId>> {
    let a = problem.index_of(alpha)?;
    let mut idx = Vec::with_capacity(current.len());
    for &l in current {
        idx.push(problem.index_of(l)?);
    }
    if idx.len() != problem.n_vertices() {
        return Err(Error::LengthMismatch {
            expected: problem.n_vertices(),
            found: idx.len(),
        });
    }
    let out = move_idx(problem, &idx, a);
    Ok(out.into_iter().map(LabelId::from_index).collect())
}

// Binary variable x_i: 0 keeps the current label (source side), 1 switches to
// alpha (sink side). Vertices already at alpha are constants.
fn move_idx(problem: &EnergyProblem, idx: &[usize], alpha: usize) -> Vec<usize> {
    let n = idx.len();
    let lb = problem.lambda_b;
    let potts = |x: usize, y: usize| if x == y { 0.0 } else { lb };
    let mut theta0: Vec<f64> = (0..n).map(|v| problem.unary.get(v, idx[v])).collect();
    let mut theta1: Vec<f64> = (0..n).map(|v| problem.unary.get(v, alpha)).collect();
    let mut g = Graph::new(n, problem.adjacency.edge_count());

    for &(i, j) in problem.adjacency.edges() {
        let (i, j) = (i as usize, j as usize);
        let (li, lj) = (idx[i], idx[j]);
        match (li == alpha, lj == alpha) {
            (true, true) => {}
            (true, false) => theta0[j] += potts(alpha, lj),
            (false, true) => theta0[i] += potts(li, alpha),
            (false, false) => {
                let e00 = potts(li, lj);
                let e01 = potts(li, alpha);
                let e10 = potts(alpha, lj);
                // E = e00 + (e10-e00) x_i + (0-e10) x_j + (e01+e10-e00)(1-x_i) x_j
                theta1[i] += e10 - e00;
                theta1[j] -= e10;
                let w = e01 + e10 - e00;
                if w > 0.0 {
                    g.add_edge(i, j, w, 0.0);
                }
            }
        }
    }
    for v in 0..n {
        if idx[v] == alpha {
            continue;
        }
        let m = theta0[v].min(theta1[v]);
        // a source-side node pays its sink capacity
        g.add_tweights(v, theta1[v] - m, theta0[v] - m);
    }
    g.maxflow();
    (0..n)
        .map(|v| {
            if idx[v] != alpha && g.segment(v) == Segment::Sink {
                alpha
            } else {
                idx[v]
            }
        })
        .collect()
}

/// Alpha-expansion with labels visited in ascending order. A move is kept
/// only if it lowers the energy; the solver stops after a pass without
/// accepted moves or after `max_passes`. Background entries of `init` are
/// replaced by the unary argmin.
pub fn alpha_expansion(
    problem: &EnergyProblem,
    init: &[LabelId],
    options: &ExpansionOptions,
) -> Result<ExpansionResult> {
    if problem.n_labels() == 0 {
        return Err(Error::EmptyLabelSet);
    }
    if init.len() != problem.n_vertices() {
        return Err(Error::LengthMismatch {
            expected: problem.n_vertices(),
            found: init.len(),
        });
    }
    let fallback = argmin_labels(&problem.unary);
    let mut idx = Vec::with_capacity(init.len());
    for (v, &l) in init.iter().enumerate() {
        let l = if l.is_background() { fallback[v] } else { l };
        idx.push(problem.index_of(l)?);
    }

    let mut energy = energy_idx(problem, &idx);
    let mut trace = vec![TraceEntry {
        move_index: 0,
        label: LabelId::BACKGROUND,
        energy,
    }];
    let mut passes = 0;
    while passes < options.max_passes {
        passes += 1;
        let mut changed = false;
        for alpha in 0..problem.n_labels() {
            let candidate = move_idx(problem, &idx, alpha);
            let e = energy_idx(problem, &candidate);
            if improves(e, energy) {
                idx = candidate;
                energy = e;
                changed = true;
            }
            trace.push(TraceEntry {
                move_index: trace.len(),
                label: LabelId::from_index(alpha),
                energy,
            });
        }
        debug!(pass = passes, energy, "expansion pass");
        if !changed {
            break;
        }
    }
    debug_assert!(trace.windows(2).all(|w| w[1].energy <= w[0].energy));
    Ok(ExpansionResult {
        labels: idx.into_iter().map(LabelId::from_index).collect(),
        energy,
        passes,
        trace,
    })
}

pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut s = String::from("move,label,energy\n");
    for t in trace {
        let _ = writeln!(s, "{},{},{}", t.move_index, t.label.0, t.energy);
    }
    s
}

pub fn write_trace_csv(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    crate::util::write_atomic(path, trace_csv(trace).as_bytes())
}
