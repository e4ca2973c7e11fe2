use std::collections::HashMap;

use rand::Rng;

use super::{Action, PersonRecord, Scene, SynthError, CHARACTER_MODELS};
use crate::geometry::WorldPoint;
use crate::rng::rng_from_seed;
use crate::round_sig9;

pub const DEFAULT_SEPARATION: f64 = 0.25;

/// Rejection budget per requested person.
pub const REJECTIONS_PER_PERSON: usize = 1000;

/// Uniform hash of accepted points, bucketed by the separation radius.
struct SeparationIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<[f64; 2]>>,
}

impl SeparationIndex {
    fn new(cell: f64) -> Self {
        SeparationIndex {
            cell,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, x: f64, y: f64) -> (i64, i64) {
        (
            (x / self.cell).floor() as i64,
            (y / self.cell).floor() as i64,
        )
    }

    fn is_clear(&self, x: f64, y: f64) -> bool {
        let (kx, ky) = self.key(x, y);
        let r2 = self.cell * self.cell;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(points) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if points
                        .iter()
                        .any(|p| (p[0] - x).powi(2) + (p[1] - y).powi(2) < r2)
                    {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, x: f64, y: f64) {
        let k = self.key(x, y);
        self.buckets.entry(k).or_default().push([x, y]);
    }
}

/// Places `count` persons uniformly over the roi minus exclusion zones by
/// rejection sampling in the roi bounding box. Coordinates are rounded to nine
/// significant digits before the acceptance tests, so the stored positions are
/// exactly the tested ones.
pub fn place_people(
    scene: &Scene,
    count: usize,
    min_separation: f64,
    seed: u64,
) -> Result<Vec<PersonRecord>, SynthError> {
    if !(min_separation >= 0.0) {
        return Err(SynthError::InvalidConfig(format!(
            "min_separation {min_separation} must be >= 0"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let bb = scene.roi.bounds();
    let budget = REJECTIONS_PER_PERSON.saturating_mul(count.max(1));
    let mut index = (min_separation > 0.0).then(|| SeparationIndex::new(min_separation));
    let mut persons = Vec::with_capacity(count);
    let mut rejections = 0usize;

    while persons.len() < count {
        let x = round_sig9(bb.min_x + rng.random::<f64>() * bb.width());
        let y = round_sig9(bb.min_y + rng.random::<f64>() * bb.height());
        let ok = scene.admits(x, y) && index.as_ref().is_none_or(|ix| ix.is_clear(x, y));
        if !ok {
            rejections += 1;
            if rejections > budget {
                return Err(SynthError::PlacementInfeasible {
                    placed: persons.len(),
                    requested: count,
                    rejections,
                });
            }
            continue;
        }
        if let Some(ix) = index.as_mut() {
            ix.insert(x, y);
        }
        let action = Action::ALL[rng.random_range(0..Action::ALL.len())];
        let character_model = rng.random_range(0..CHARACTER_MODELS);
        persons.push(PersonRecord {
            id: persons.len() as u32,
            position: WorldPoint::new(x, y, 0.0),
            action,
            character_model,
        });
    }
    Ok(persons)
}
