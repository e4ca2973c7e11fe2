//! Seeded synthesis of crowd scenes and frames.
//!
//! A [`Scene`] is the static world (ROI polygon, exclusion zones, count range);
//! a [`FrameRecord`] is one independent crowd draw inside it together with the
//! weather and time of day. Crowded frames are built as capacity-limited areas
//! ([`partition_frame`]) whose person sets are unioned back by [`merge_areas`].

mod dataset;
mod environment;
mod partition;
mod placement;

pub use dataset::{
    assign_splits, build_scene, generate_dataset, generate_frame, SceneDataset, SceneEntry, Split,
};
pub use environment::{
    sample_environment, sample_environment_with, EnvironmentSample, EveningPeriod, TimePart,
    Weather,
};
pub use partition::{merge_areas, partition_frame, Area, AreaPartition, DEFAULT_CAPACITY};
pub use placement::{place_people, DEFAULT_SEPARATION, REJECTIONS_PER_PERSON};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::WorldPoint;
use crate::polygon::Polygon;

/// Number of distinct character models persons are drawn from.
pub const CHARACTER_MODELS: u32 = 265;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("placement infeasible: placed {placed} of {requested} persons after {rejections} rejections")]
    PlacementInfeasible {
        placed: usize,
        requested: usize,
        rejections: usize,
    },
    #[error("duplicate person id {0} across areas")]
    DuplicateId(u32),
    #[error("scene {scene}: {reason}")]
    InvalidScene { scene: u32, reason: String },
    #[error("scene {scene}, frame {frame}: {source}")]
    Frame {
        scene: u32,
        frame: u32,
        #[source]
        source: Box<SynthError>,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneType {
    Park,
    Curbside,
    Beach,
    WalkingStreet,
    ShoppingCenter,
    Church,
    Square,
    Campus,
    Stadium,
    Station,
    Market,
    Harbor,
    ParkingLot,
    Riverside,
    Residential,
}

impl SceneType {
    pub const ALL: [SceneType; 15] = [
        SceneType::Park,
        SceneType::Curbside,
        SceneType::Beach,
        SceneType::WalkingStreet,
        SceneType::ShoppingCenter,
        SceneType::Church,
        SceneType::Square,
        SceneType::Campus,
        SceneType::Stadium,
        SceneType::Station,
        SceneType::Market,
        SceneType::Harbor,
        SceneType::ParkingLot,
        SceneType::Riverside,
        SceneType::Residential,
    ];

    /// Relative frequency when scenes are drawn procedurally; the everyday
    /// outdoor types dominate.
    pub fn draw_weight(self) -> f64 {
        match self {
            SceneType::Park | SceneType::Curbside | SceneType::Beach => 3.0,
            SceneType::WalkingStreet | SceneType::ShoppingCenter => 2.0,
            _ => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SceneType::Park => "park",
            SceneType::Curbside => "curbside",
            SceneType::Beach => "beach",
            SceneType::WalkingStreet => "walking_street",
            SceneType::ShoppingCenter => "shopping_center",
            SceneType::Church => "church",
            SceneType::Square => "square",
            SceneType::Campus => "campus",
            SceneType::Stadium => "stadium",
            SceneType::Station => "station",
            SceneType::Market => "market",
            SceneType::Harbor => "harbor",
            SceneType::ParkingLot => "parking_lot",
            SceneType::Riverside => "riverside",
            SceneType::Residential => "residential",
        }
    }
}

/// Cosmetic per-person action label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Standing,
    Talking,
    Smoking,
    Drinking,
    Music,
    Phone,
    Waving,
    Stretching,
    LookingAround,
    Clapping,
}

impl Action {
    pub const ALL: [Action; 10] = [
        Action::Standing,
        Action::Talking,
        Action::Smoking,
        Action::Drinking,
        Action::Music,
        Action::Phone,
        Action::Waving,
        Action::Stretching,
        Action::LookingAround,
        Action::Clapping,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: u32,
    pub scene_type: SceneType,
    pub roi: Polygon,
    pub size_x: f64,
    pub size_y: f64,
    pub count_range: [usize; 2],
    pub exclusion_zones: Vec<Polygon>,
    /// Whether Thunder weather may be drawn for this scene.
    pub thunder: bool,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |reason: String| {
            Err(SynthError::InvalidScene {
                scene: self.id,
                reason,
            })
        };
        if !self.roi.is_simple() {
            return bad("roi is not a simple polygon with at least 3 vertices".into());
        }
        let [lo, hi] = self.count_range;
        if lo < 1 || hi > 10_000 || lo > hi {
            return bad(format!("count range [{lo}, {hi}] outside [1, 10000]"));
        }
        if !(self.size_x > 0.0 && self.size_y > 0.0) {
            return bad("scene size must be positive".into());
        }
        let bb = self.roi.bounds();
        for (k, zone) in self.exclusion_zones.iter().enumerate() {
            if !zone.is_simple() {
                return bad(format!("exclusion zone {k} is not a simple polygon"));
            }
            if !bb.contains_bounds(&zone.bounds()) {
                return bad(format!("exclusion zone {k} leaves the roi bounding box"));
            }
        }
        Ok(())
    }

    /// True when `(x, y)` is a legal foot position.
    pub fn admits(&self, x: f64, y: f64) -> bool {
        self.roi.contains(x, y) && !self.exclusion_zones.iter().any(|z| z.contains(x, y))
    }

    pub fn center(&self) -> WorldPoint {
        WorldPoint::new(self.size_x / 2.0, self.size_y / 2.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub id: u32,
    /// Foot point on the ground (`z = 0`).
    pub position: WorldPoint,
    pub action: Action,
    pub character_model: u32,
}

impl PersonRecord {
    pub fn head(&self) -> WorldPoint {
        WorldPoint::new(
            self.position.x,
            self.position.y,
            self.position.z + crate::geometry::HEAD_HEIGHT,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u32,
    pub seed: u64,
    pub environment: EnvironmentSample,
    pub persons: Vec<PersonRecord>,
}

impl FrameRecord {
    pub fn validate(&self, scene: &Scene) -> Result<(), SynthError> {
        let [lo, hi] = scene.count_range;
        let n = self.persons.len();
        let fail = |reason: String| SynthError::Frame {
            scene: scene.id,
            frame: self.frame_id,
            source: Box::new(SynthError::InvalidScene {
                scene: scene.id,
                reason,
            }),
        };
        if n < lo || n > hi {
            return Err(fail(format!(
                "{n} persons outside count range [{lo}, {hi}]"
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        for p in &self.persons {
            if !seen.insert(p.id) {
                return Err(SynthError::DuplicateId(p.id));
            }
            if !scene.admits(p.position.x, p.position.y) {
                return Err(fail(format!("person {} outside the roi", p.id)));
            }
            if p.character_model >= CHARACTER_MODELS {
                return Err(fail(format!(
                    "person {} has character model {}",
                    p.id, p.character_model
                )));
            }
        }
        Ok(())
    }
}
