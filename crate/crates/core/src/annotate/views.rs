use serde::{Deserialize, Serialize};

use crate::geometry::{Camera, GeometryError, WorldPoint};
use crate::scene_synth::FrameRecord;

/// Radius of the vertical head disk used by the occlusion test, meters.
pub const OCCLUDER_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub person_id: u32,
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewAnnotation {
    pub camera_id: u32,
    pub entries: Vec<ViewEntry>,
}

impl ViewAnnotation {
    pub fn visible_count(&self) -> usize {
        self.entries.iter().filter(|e| e.visible).count()
    }
}

/// True when the vertical disk around `occluder` (facing the camera) is hit by
/// the segment from the camera center to `target` before it reaches `target`.
fn blocks(center: &WorldPoint, occluder: &WorldPoint, target: &WorldPoint) -> bool {
    let (nx, ny) = (occluder.x - center.x, occluder.y - center.y);
    let norm = (nx * nx + ny * ny).sqrt();
    if norm == 0.0 {
        return false;
    }
    let (nx, ny) = (nx / norm, ny / norm);
    let dx = target.x - center.x;
    let dy = target.y - center.y;
    let dz = target.z - center.z;
    let denom = nx * dx + ny * dy;
    if denom <= 0.0 {
        return false;
    }
    let t = norm / denom;
    if !(t > 0.0 && t < 1.0) {
        return false;
    }
    let hit = [
        center.x + t * dx - occluder.x,
        center.y + t * dy - occluder.y,
        center.z + t * dz - occluder.z,
    ];
    hit.iter().map(|h| h * h).sum::<f64>() < OCCLUDER_RADIUS * OCCLUDER_RADIUS
}

/// Projects every person's head into every camera. With `occlusion`, a
/// visible head covered by a strictly nearer head disk is marked not visible.
pub fn annotate_views(
    frame: &FrameRecord,
    cameras: &[Camera],
    occlusion: bool,
) -> Vec<ViewAnnotation> {
    let heads: Vec<WorldPoint> = frame.persons.iter().map(|p| p.head()).collect();
    cameras
        .iter()
        .map(|cam| {
            let mut depths = Vec::with_capacity(heads.len());
            let mut entries: Vec<ViewEntry> = frame
                .persons
                .iter()
                .zip(&heads)
                .map(|(p, h)| {
                    let (u, v, visible, depth) = match cam.project(h) {
                        Ok(q) => (q.u, q.v, cam.contains(&q), q.depth),
                        Err(GeometryError::DegenerateProjection) | Err(_) => (0.0, 0.0, false, 0.0),
                    };
                    depths.push(depth);
                    ViewEntry {
                        person_id: p.id,
                        u,
                        v,
                        visible,
                    }
                })
                .collect();
            if occlusion {
                let c = cam.center();
                let hidden: Vec<bool> = (0..entries.len())
                    .map(|i| {
                        entries[i].visible
                            && (0..heads.len()).any(|j| {
                                j != i
                                    && depths[j] > 0.0
                                    && depths[j] < depths[i]
                                    && blocks(&c, &heads[j], &heads[i])
                            })
                    })
                    .collect();
                for (e, h) in entries.iter_mut().zip(hidden) {
                    if h {
                        e.visible = false;
                    }
                }
            }
            ViewAnnotation {
                camera_id: cam.id,
                entries,
            }
        })
        .collect()
}
