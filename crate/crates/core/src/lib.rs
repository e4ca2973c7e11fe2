//! Generator and evaluator for multi-view crowd benchmarks.
//!
//! * [`geometry`]: pinhole cameras, projection, camera rings, ground grids.
//! * [`scene_synth`]: seeded scenes, crowd placement, area partitioning, datasets.
//! * [`annotate`]: density/occupancy maps, per-view annotations, file formats.
//! * [`fusion`]: cross-view softmax selection, ground projection, max fusion.
//! * [`ot`]: unbalanced entropic optimal transport loss and its solver.
//! * [`metrics`]: point matching, MODA/MODP/precision/recall/F1, MAE/MSE/NAE.
//! * [`stats`]: dataset statistics tables and SVG charts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotate;
pub mod config;
pub mod fusion;
pub mod geometry;
pub mod metrics;
pub mod ot;
pub mod polygon;
pub mod rng;
pub mod scene_synth;
pub mod stats;

/// Rounds to nine significant decimal digits, the precision of manifest reals.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}
