//! Per-vertex semantic labeling of 4D clothed-human mesh sequences.
//!
//! Multi-view 2D evidence (parser label images, flow-warped labels of the
//! previous frame, segmentation masks and manual corrections) is projected
//! onto mesh vertices through a software rasterizer, fused into unary costs,
//! and resolved with a Potts model minimized by alpha-expansion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod energy;
pub mod error;
pub mod evidence;
pub mod fixture;
pub mod frame;
pub mod geom;
pub mod image_io;
pub mod label;
pub mod manifest;
pub mod mesh;
pub mod mesh_io;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod synthetic;
mod util;

pub use camera::{build_rig, RigParams, ViewCamera, ViewRig};
pub use energy::{
    alpha_expansion, energy_of, normalize_unary, EnergyProblem, ExpansionOptions, FusionWeights, UnaryTable,
};
pub use error::{Error, Result};
pub use frame::{load_label_frame, save_label_frame, LabelFrame};
pub use label::{ClassMap, LabelId, LabelRegistry};
pub use manifest::SequenceManifest;
pub use mesh::{build_adjacency, AdjacencyGraph, TriMesh};
pub use mesh_io::{load_mesh, save_mesh};
pub use pipeline::{DirEvidence, EvidenceSource, Pipeline, SequenceRunner, Toggles};
pub use raster::{rasterize, rasterize_rig, render_labels, LabelImage, RasterMap};
pub use util::write_atomic;
