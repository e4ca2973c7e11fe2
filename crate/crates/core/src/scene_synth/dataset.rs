use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::environment::sample_environment_with;
use super::{
    merge_areas, partition_frame, place_people, FrameRecord, Scene, SceneType, SynthError,
};
use crate::config::{DatasetConfig, SceneSpec};
use crate::geometry::{standard_rig, Camera, CameraRing, GroundGrid};
use crate::polygon::Polygon;
use crate::rng::{derive_seed, mix64, rng_from_seed, tags, SynthRng};
use crate::round_sig9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneEntry {
    pub scene: Scene,
    pub split: Split,
    pub cameras: Vec<Camera>,
    pub grid: GroundGrid,
    /// Per-frame probability of Thunder for this scene.
    pub thunder_prob: f64,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDataset {
    pub config: DatasetConfig,
    pub seed: u64,
    pub scenes: Vec<SceneEntry>,
}

impl SceneDataset {
    pub fn frame_count(&self) -> usize {
        self.scenes.iter().map(|s| s.frames.len()).sum()
    }

    pub fn view_annotation_count(&self) -> usize {
        self.scenes
            .iter()
            .map(|s| s.frames.len() * s.cameras.len())
            .sum()
    }

    pub fn person_count(&self) -> usize {
        self.scenes
            .iter()
            .flat_map(|s| s.frames.iter())
            .map(|f| f.persons.len())
            .sum()
    }
}

/// Split targets for `n` scenes at 3:1:1, rounded, with test taking the remainder.
pub fn split_targets(n: usize) -> [usize; 3] {
    let train = (3.0 * n as f64 / 5.0).round() as usize;
    let val = ((n as f64 / 5.0).round() as usize).min(n - train);
    [train, val, n - train - val]
}

/// Assigns scenes to splits at 3:1:1, stratified by scene type. Scenes are
/// ordered by type (seeded shuffle within a type) and labelled by a
/// largest-deficit sequence, so each type is spread across the splits and the
/// totals hit the targets exactly.
pub fn assign_splits(types: &[SceneType], seed: u64) -> Vec<Split> {
    let n = types.len();
    if n == 0 {
        return Vec::new();
    }
    let targets = split_targets(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| {
        (
            types[i],
            mix64(derive_seed(seed, &[tags::SPLIT, i as u64])),
            i,
        )
    });
    let mut assigned = [0usize; 3];
    let mut out = vec![Split::Train; n];
    for (k, &scene) in order.iter().enumerate() {
        let best = (0..3)
            .max_by(|&a, &b| {
                let da = targets[a] as f64 * (k + 1) as f64 / n as f64 - assigned[a] as f64;
                let db = targets[b] as f64 * (k + 1) as f64 / n as f64 - assigned[b] as f64;
                da.partial_cmp(&db).unwrap().then(b.cmp(&a))
            })
            .unwrap();
        assigned[best] += 1;
        out[scene] = Split::ALL[best];
    }
    out
}

fn pick_scene_type(rng: &mut SynthRng) -> SceneType {
    let total: f64 = SceneType::ALL.iter().map(|t| t.draw_weight()).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for t in SceneType::ALL {
        acc += t.draw_weight();
        if target < acc {
            return t;
        }
    }
    SceneType::ALL[SceneType::ALL.len() - 1]
}

/// Star-shaped roi inscribed in the scene rectangle, plus up to two
/// rectangular exclusion zones.
fn procedural_scene(cfg: &DatasetConfig, id: u32, seed: u64) -> Scene {
    let mut rng = rng_from_seed(derive_seed(seed, &[tags::SCENE, id as u64]));
    let scene_type = pick_scene_type(&mut rng);
    let (sx, sy) = (cfg.scene_size_x, cfg.scene_size_y);
    let margin = 0.05 * sx.min(sy);
    let (cx, cy) = (sx / 2.0, sy / 2.0);
    let (hx, hy) = (sx / 2.0 - margin, sy / 2.0 - margin);
    let k = rng.random_range(8..=14usize);
    let vertices = (0..k)
        .map(|i| {
            let jitter = rng.random_range(-0.3..0.3);
            let theta = std::f64::consts::TAU * (i as f64 + jitter) / k as f64;
            let r = rng.random_range(0.75..=1.0);
            [
                round_sig9(cx + hx * r * theta.cos()),
                round_sig9(cy + hy * r * theta.sin()),
            ]
        })
        .collect();
    let roi = Polygon::new(vertices);
    let bb = roi.bounds();
    let zones = rng.random_range(0..=2usize);
    let exclusion_zones = (0..zones)
        .map(|_| {
            let w = rng.random_range(0.04..0.1) * bb.width();
            let h = rng.random_range(0.04..0.1) * bb.height();
            let x0 = bb.min_x + rng.random::<f64>() * (bb.width() - w);
            let y0 = bb.min_y + rng.random::<f64>() * (bb.height() - h);
            Polygon::rectangle(
                round_sig9(x0),
                round_sig9(y0),
                round_sig9(x0 + w),
                round_sig9(y0 + h),
            )
        })
        .collect();
    let every = cfg.weather.thunder_scene_every;
    Scene {
        id,
        scene_type,
        roi,
        size_x: sx,
        size_y: sy,
        count_range: [cfg.count_min, cfg.count_max],
        exclusion_zones,
        thunder: every > 0 && (id as usize + 1).is_multiple_of(every),
    }
}

fn scene_from_spec(cfg: &DatasetConfig, spec: &SceneSpec, fallback: Scene) -> Scene {
    Scene {
        id: spec.id,
        scene_type: spec.scene_type.unwrap_or(fallback.scene_type),
        roi: Polygon::new(
            spec.roi
                .iter()
                .map(|p| [round_sig9(p[0]), round_sig9(p[1])])
                .collect(),
        ),
        size_x: spec.size_x.unwrap_or(cfg.scene_size_x),
        size_y: spec.size_y.unwrap_or(cfg.scene_size_y),
        count_range: [
            spec.count_min.unwrap_or(cfg.count_min),
            spec.count_max.unwrap_or(cfg.count_max),
        ],
        exclusion_zones: spec
            .exclusion_zones
            .iter()
            .map(|z| {
                Polygon::new(
                    z.iter()
                        .map(|p| [round_sig9(p[0]), round_sig9(p[1])])
                        .collect(),
                )
            })
            .collect(),
        thunder: spec.thunder.unwrap_or(fallback.thunder),
    }
}

/// Scene `id` under `cfg`: the configured `[[scene]]` table when present,
/// otherwise a procedural scene derived from the seed.
pub fn build_scene(cfg: &DatasetConfig, id: u32, seed: u64) -> Result<Scene, SynthError> {
    let procedural = procedural_scene(cfg, id, seed);
    let scene = match cfg.scene_specs.iter().find(|s| s.id == id) {
        Some(spec) => scene_from_spec(cfg, spec, procedural),
        None => procedural,
    };
    scene.validate()?;
    Ok(scene)
}

fn scene_cameras(cfg: &DatasetConfig, scene: &Scene) -> Result<Vec<Camera>, SynthError> {
    let radius = cfg.ring_radius_factor * scene.size_x.max(scene.size_y);
    let height = match cfg.ring_height {
        Some(h) => h,
        None if cfg.ring_pitch_deg < 0.0 => radius * (-cfg.ring_pitch_deg).to_radians().tan(),
        None => {
            return Err(SynthError::InvalidConfig(
                "ring_height is required when ring_pitch_deg is not negative".into(),
            ))
        }
    };
    let template = CameraRing {
        image_width: cfg.image_width,
        image_height: cfg.image_height,
        ..CameraRing::new(
            scene.center(),
            radius,
            height,
            cfg.ring_pitch_deg,
            cfg.views,
            cfg.fov_deg,
        )
    };
    standard_rig(&template, cfg.views).map_err(|e| SynthError::InvalidScene {
        scene: scene.id,
        reason: e.to_string(),
    })
}

/// One frame, reproducible from `(cfg, scene, frame_seed)` alone.
pub fn generate_frame(
    cfg: &DatasetConfig,
    scene: &Scene,
    frame_id: u32,
    frame_seed: u64,
    thunder_prob: f64,
) -> Result<FrameRecord, SynthError> {
    let wrap = |e: SynthError| SynthError::Frame {
        scene: scene.id,
        frame: frame_id,
        source: Box::new(e),
    };
    let mut env_rng = rng_from_seed(derive_seed(frame_seed, &[tags::ENVIRONMENT]));
    let environment = sample_environment_with(&mut env_rng, &cfg.weather, thunder_prob);
    let [lo, hi] = scene.count_range;
    let count = rng_from_seed(derive_seed(frame_seed, &[tags::COUNT])).random_range(lo..=hi);
    let persons = place_people(
        scene,
        count,
        cfg.separation,
        derive_seed(frame_seed, &[tags::PLACEMENT]),
    )
    .map_err(wrap)?;
    let mut frame = FrameRecord {
        frame_id,
        seed: frame_seed,
        environment,
        persons,
    };
    // Synthesize area by area and merge the person sets back into one frame.
    let partition = partition_frame(&frame, scene, cfg.capacity).map_err(wrap)?;
    frame.persons = merge_areas(&partition).map_err(wrap)?;
    Ok(frame)
}

/// Generates every scene and frame for `cfg` under `seed`. Frames within a
/// scene are generated in parallel; the result is independent of the thread
/// count.
pub fn generate_dataset(cfg: &DatasetConfig, seed: u64) -> Result<SceneDataset, SynthError> {
    cfg.validate()
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let scenes = (0..cfg.scenes as u32)
        .map(|id| build_scene(cfg, id, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let thunder_scenes = scenes.iter().filter(|s| s.thunder).count();
    let thunder_prob = if thunder_scenes == 0 {
        0.0
    } else {
        (cfg.weather.thunder_share * scenes.len() as f64 / thunder_scenes as f64).min(1.0)
    };
    let splits = assign_splits(
        &scenes.iter().map(|s| s.scene_type).collect::<Vec<_>>(),
        seed,
    );

    let mut entries = Vec::with_capacity(scenes.len());
    for (scene, split) in scenes.into_iter().zip(splits) {
        let cameras = scene_cameras(cfg, &scene)?;
        let grid = GroundGrid::covering(scene.size_x, scene.size_y, cfg.cell_size)
            .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        let p = if scene.thunder { thunder_prob } else { 0.0 };
        let frames = (0..cfg.frames_per_scene as u32)
            .into_par_iter()
            .map(|f| {
                let frame_seed = derive_seed(seed, &[tags::FRAME, scene.id as u64, f as u64]);
                generate_frame(cfg, &scene, f, frame_seed, p)
            })
            .collect::<Result<Vec<_>, _>>()?;
        entries.push(SceneEntry {
            scene,
            split,
            cameras,
            grid,
            thunder_prob: p,
            frames,
        });
    }
    Ok(SceneDataset {
        config: cfg.clone(),
        seed,
        scenes: entries,
    })
}
