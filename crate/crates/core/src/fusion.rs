//! Multi-view ground-plane fusion on plain numeric maps: per-pixel softmax
//! selection across views, projection of each view onto the ground plane at a
//! fixed height, and view max-pooling.

use rayon::prelude::*;
use thiserror::Error;

use crate::annotate::{GridMap, MapKind};
use crate::geometry::{Camera, GroundGrid, WorldPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no views to fuse")]
    Empty,
}

/// One pixel-space map per camera, all the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMapStack {
    pub maps: Vec<GridMap>,
    pub cameras: Vec<Camera>,
}

impl ViewMapStack {
    pub fn new(maps: Vec<GridMap>, cameras: Vec<Camera>) -> Result<Self, FusionError> {
        if maps.is_empty() {
            return Err(FusionError::Empty);
        }
        if maps.len() != cameras.len() {
            return Err(FusionError::ShapeMismatch(format!(
                "{} maps for {} cameras",
                maps.len(),
                cameras.len()
            )));
        }
        check_shapes(&maps)?;
        Ok(ViewMapStack { maps, cameras })
    }
}

fn check_shapes(maps: &[GridMap]) -> Result<(), FusionError> {
    let first = maps.first().ok_or(FusionError::Empty)?;
    for (k, m) in maps.iter().enumerate() {
        if !m.same_shape(first) {
            return Err(FusionError::ShapeMismatch(format!(
                "map {k} is {}x{}, expected {}x{}",
                m.rows, m.cols, first.rows, first.cols
            )));
        }
    }
    Ok(())
}

/// Per-pixel softmax weights across views, one map per view.
pub fn softmax_weights(attention: &[GridMap]) -> Result<Vec<Vec<f64>>, FusionError> {
    check_shapes(attention)?;
    let n = attention[0].values.len();
    let mut weights = vec![vec![0.0f64; n]; attention.len()];
    for p in 0..n {
        let max = attention
            .iter()
            .map(|a| a.values[p] as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (v, a) in attention.iter().enumerate() {
            let e = (a.values[p] as f64 - max).exp();
            weights[v][p] = e;
            total += e;
        }
        for w in weights.iter_mut() {
            w[p] /= total;
        }
    }
    Ok(weights)
}

/// `out[v][p] = stack[v][p] · softmax_v(attention[·][p])`.
pub fn spatial_select(
    stack: &ViewMapStack,
    attention: &[GridMap],
) -> Result<ViewMapStack, FusionError> {
    if attention.len() != stack.maps.len() {
        return Err(FusionError::ShapeMismatch(format!(
            "{} attention maps for {} views",
            attention.len(),
            stack.maps.len()
        )));
    }
    if !attention[0].same_shape(&stack.maps[0]) {
        return Err(FusionError::ShapeMismatch(
            "attention and feature maps differ in shape".into(),
        ));
    }
    let weights = softmax_weights(attention)?;
    let maps = stack
        .maps
        .iter()
        .zip(&weights)
        .map(|(m, w)| GridMap {
            values: m
                .values
                .iter()
                .zip(w)
                .map(|(&x, &w)| (x as f64 * w) as f32)
                .collect(),
            ..m.clone()
        })
        .collect();
    Ok(ViewMapStack {
        maps,
        cameras: stack.cameras.clone(),
    })
}

/// Bilinear sample at continuous image coordinates with zero padding; pixel
/// `(i, j)` has its center at `(u, v) = (j + 0.5, i + 0.5)`.
pub fn sample_bilinear(map: &GridMap, u: f64, v: f64) -> f64 {
    let x = u - 0.5;
    let y = v - 0.5;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let at = |r: f64, c: f64| -> f64 {
        if r < 0.0 || c < 0.0 || r >= map.rows as f64 || c >= map.cols as f64 {
            0.0
        } else {
            map.get(r as usize, c as usize) as f64
        }
    };
    let mut acc = 0.0;
    for (dr, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        for (dc, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            let w = wy * wx;
            if w != 0.0 {
                acc += w * at(y0 + dr, x0 + dc);
            }
        }
    }
    acc
}

/// Samples `map` at the projection of every ground cell center lifted to
/// `height`. Cells behind the camera or outside the image get 0.
pub fn project_to_ground(
    map: &GridMap,
    camera: &Camera,
    grid: &GroundGrid,
    height: f64,
) -> GridMap {
    let mut out = GridMap::zeros(grid.rows, grid.cols, MapKind::GroundFeature);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let (x, y) = grid.cell_center(r, c);
            if let Ok(q) = camera.project(&WorldPoint::new(x, y, height)) {
                if camera.contains(&q) {
                    out.set(r, c, sample_bilinear(map, q.u, q.v) as f32);
                }
            }
        }
    }
    out
}

/// Elementwise maximum across views.
pub fn fuse_max(maps: &[GridMap]) -> Result<GridMap, FusionError> {
    check_shapes(maps)?;
    let mut out = maps[0].clone();
    for m in &maps[1..] {
        for (o, &v) in out.values.iter_mut().zip(&m.values) {
            *o = o.max(v);
        }
    }
    out.kind = MapKind::GroundFused;
    Ok(out)
}

/// Selection, per-view ground projection, then max fusion. Without attention
/// every view is weighted equally.
pub fn ground_pipeline(
    stack: &ViewMapStack,
    attention: Option<&[GridMap]>,
    grid: &GroundGrid,
    height: f64,
) -> Result<GridMap, FusionError> {
    let uniform;
    let attention = match attention {
        Some(a) => a,
        None => {
            uniform = vec![
                GridMap::zeros(
                    stack.maps[0].rows,
                    stack.maps[0].cols,
                    MapKind::PixelFeature
                );
                stack.maps.len()
            ];
            &uniform
        }
    };
    let selected = spatial_select(stack, attention)?;
    let ground: Vec<GridMap> = selected
        .maps
        .par_iter()
        .zip(selected.cameras.par_iter())
        .map(|(m, cam)| project_to_ground(m, cam, grid, height))
        .collect();
    fuse_max(&ground)
}

/// Cells that are at least `min_value` and not below any 8-neighbor; among
/// equal neighbors only the first in row-major order is kept.
pub fn peak_cells(map: &GridMap, min_value: f32) -> Vec<(usize, usize)> {
    let mut peaks = Vec::new();
    for r in 0..map.rows {
        for c in 0..map.cols {
            let v = map.get(r, c);
            if v < min_value || v <= 0.0 {
                continue;
            }
            let mut is_peak = true;
            'scan: for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= map.rows as i64 || nc >= map.cols as i64 {
                        continue;
                    }
                    let n = map.get(nr as usize, nc as usize);
                    let earlier = (dr, dc) < (0, 0);
                    if n > v || (n == v && earlier) {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                peaks.push((r, c));
            }
        }
    }
    peaks
}
