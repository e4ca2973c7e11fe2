use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{FrameRecord, PersonRecord, Scene, SynthError};
use crate::polygon::{Bounds, Polygon};

/// Person limit of one synthesis area.
pub const DEFAULT_CAPACITY: usize = 256;

/// Depth past which bisection stops and splits the id list instead. Only
/// reachable with many coincident persons.
const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub bounds: Polygon,
    pub persons: Vec<PersonRecord>,
}

impl Area {
    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.persons.iter().map(|p| p.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaPartition {
    pub areas: Vec<Area>,
    pub capacity: usize,
}

/// Splits the roi bounding box in halves along its longer axis, recursing only
/// into halves that still exceed `capacity`. Areas come out in depth-first,
/// low-half-first order.
pub fn partition_frame(
    frame: &FrameRecord,
    scene: &Scene,
    capacity: usize,
) -> Result<AreaPartition, SynthError> {
    if capacity < 1 {
        return Err(SynthError::InvalidConfig(
            "capacity must be at least 1".into(),
        ));
    }
    let mut areas = Vec::new();
    split(
        scene.roi.bounds(),
        frame.persons.clone(),
        capacity,
        0,
        &mut areas,
    );
    Ok(AreaPartition { areas, capacity })
}

fn split(
    bounds: Bounds,
    persons: Vec<PersonRecord>,
    capacity: usize,
    depth: usize,
    out: &mut Vec<Area>,
) {
    if persons.len() <= capacity {
        out.push(Area {
            bounds: bounds.to_polygon(),
            persons,
        });
        return;
    }
    let (low_b, high_b, low, high) = if depth >= MAX_DEPTH {
        let mut low = persons;
        let high = low.split_off(low.len() / 2);
        (bounds, bounds, low, high)
    } else if bounds.width() >= bounds.height() {
        let mid = bounds.min_x + bounds.width() / 2.0;
        let (low, high): (Vec<_>, Vec<_>) = persons.into_iter().partition(|p| p.position.x < mid);
        (
            Bounds {
                max_x: mid,
                ..bounds
            },
            Bounds {
                min_x: mid,
                ..bounds
            },
            low,
            high,
        )
    } else {
        let mid = bounds.min_y + bounds.height() / 2.0;
        let (low, high): (Vec<_>, Vec<_>) = persons.into_iter().partition(|p| p.position.y < mid);
        (
            Bounds {
                max_y: mid,
                ..bounds
            },
            Bounds {
                min_y: mid,
                ..bounds
            },
            low,
            high,
        )
    };
    split(low_b, low, capacity, depth + 1, out);
    split(high_b, high, capacity, depth + 1, out);
}

/// Union of the per-area person sets, sorted by id.
pub fn merge_areas(partition: &AreaPartition) -> Result<Vec<PersonRecord>, SynthError> {
    let total = partition.areas.iter().map(|a| a.persons.len()).sum();
    let mut seen = HashSet::with_capacity(total);
    let mut merged = Vec::with_capacity(total);
    for area in &partition.areas {
        for p in &area.persons {
            if !seen.insert(p.id) {
                return Err(SynthError::DuplicateId(p.id));
            }
            merged.push(p.clone());
        }
    }
    merged.sort_by_key(|p| p.id);
    Ok(merged)
}
