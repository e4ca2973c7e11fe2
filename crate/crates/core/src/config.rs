//! Dataset configuration, read from a TOML key-value file.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! are rejected. Explicit scenes can be given as `[[scene]]` tables, which
//! replace the procedurally generated scene with the same id.
//!
//! ```toml
//! seed = 7
//! scenes = 5
//! frames_per_scene = 10
//! views = 8
//! count_min = 200
//! count_max = 1000
//!
//! [[scene]]
//! id = 0
//! scene_type = "park"
//! roi = [[5.0, 5.0], [95.0, 5.0], [95.0, 115.0], [5.0, 115.0]]
//! ```

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::scene_synth::SceneType;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "MVFORGE_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which map files accompany each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapOutput {
    None,
    #[default]
    Ground,
    All,
}

impl std::str::FromStr for MapOutput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(MapOutput::None),
            "ground" => Ok(MapOutput::Ground),
            "all" => Ok(MapOutput::All),
            other => Err(format!(
                "unknown map output '{other}' (expected none|ground|all)"
            )),
        }
    }
}

/// Two-stage weather rule: a fixed share of Clear, the remainder drawn from
/// `weights` over [ExtraSunny, Clear, Overcast, Clouds, Rain, Foggy].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherConfig {
    pub clear_share: f64,
    pub weights: [f64; 6],
    /// Target dataset-wide share of Thunder frames.
    pub thunder_share: f64,
    /// Every n-th scene (ids n-1, 2n-1, ...) opts in to Thunder; 0 disables it.
    pub thunder_scene_every: usize,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        WeatherConfig {
            clear_share: 0.5,
            weights: [2.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            thunder_share: 0.0077,
            thunder_scene_every: 10,
        }
    }
}

/// An explicitly configured scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub id: u32,
    #[serde(default)]
    pub scene_type: Option<SceneType>,
    pub roi: Vec<[f64; 2]>,
    #[serde(default)]
    pub exclusion_zones: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub size_x: Option<f64>,
    #[serde(default)]
    pub size_y: Option<f64>,
    #[serde(default)]
    pub count_min: Option<usize>,
    #[serde(default)]
    pub count_max: Option<usize>,
    #[serde(default)]
    pub thunder: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub scenes: usize,
    pub frames_per_scene: usize,
    pub views: usize,
    pub count_min: usize,
    pub count_max: usize,
    /// Maximum persons per synthesis area.
    pub capacity: usize,
    /// Minimum horizontal distance between persons, meters.
    pub separation: f64,
    pub scene_size_x: f64,
    pub scene_size_y: f64,
    /// Ring radius as a multiple of the larger scene dimension.
    pub ring_radius_factor: f64,
    /// Camera height; when absent the optical axes meet the ground at the scene center.
    pub ring_height: Option<f64>,
    pub ring_pitch_deg: f64,
    pub fov_deg: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub cell_size: f64,
    pub density_sigma_px: f64,
    pub ground_sigma_cells: f64,
    pub maps: MapOutput,
    pub occlusion: bool,
    pub weather: WeatherConfig,
    #[serde(rename = "scene", skip_serializing_if = "Vec::is_empty")]
    pub scene_specs: Vec<SceneSpec>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 0,
            scenes: 50,
            frames_per_scene: 200,
            views: 50,
            count_min: 200,
            count_max: 1000,
            capacity: 256,
            separation: 0.25,
            scene_size_x: 100.0,
            scene_size_y: 120.0,
            ring_radius_factor: 0.75,
            ring_height: None,
            ring_pitch_deg: -25.0,
            fov_deg: 40.0,
            image_width: 1920,
            image_height: 1080,
            cell_size: 0.2,
            density_sigma_px: 3.0,
            ground_sigma_cells: 3.0,
            maps: MapOutput::Ground,
            occlusion: false,
            weather: WeatherConfig::default(),
            scene_specs: Vec::new(),
        }
    }
}

impl DatasetConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Applies `MVFORGE_SEED` when set.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}='{v}' is not a u64")))?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.scenes == 0 || self.frames_per_scene == 0 || self.views == 0 {
            return bad("scenes, frames_per_scene and views must be positive".into());
        }
        if self.count_min < 1 || self.count_max > 10_000 || self.count_min > self.count_max {
            return bad(format!(
                "count range [{}, {}] must lie within [1, 10000]",
                self.count_min, self.count_max
            ));
        }
        if self.capacity < 1 {
            return bad("capacity must be at least 1".into());
        }
        if !(self.separation >= 0.0) {
            return bad("separation must be non-negative".into());
        }
        if !(self.scene_size_x > 0.0 && self.scene_size_y > 0.0) {
            return bad("scene size must be positive".into());
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad(format!("fov {} outside (0, 180)", self.fov_deg));
        }
        if !(self.ring_radius_factor > 0.0) {
            return bad("ring_radius_factor must be positive".into());
        }
        if !(self.ring_pitch_deg > -90.0 && self.ring_pitch_deg < 90.0) {
            return bad("ring_pitch_deg must lie in (-90, 90)".into());
        }
        if self.image_width == 0 || self.image_height == 0 {
            return bad("image size must be positive".into());
        }
        if !(self.cell_size > 0.0 && self.density_sigma_px > 0.0 && self.ground_sigma_cells > 0.0) {
            return bad("cell_size and sigmas must be positive".into());
        }
        let w = &self.weather;
        if !(0.0..=1.0).contains(&w.clear_share)
            || w.weights.iter().any(|x| !(*x >= 0.0))
            || w.weights.iter().sum::<f64>() <= 0.0
            || !(0.0..=1.0).contains(&w.thunder_share)
        {
            return bad("weather weights must be non-negative with shares in [0, 1]".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = DatasetConfig::default();
        let back = DatasetConfig::from_toml_str(&cfg.to_toml(), "mem").unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = DatasetConfig::from_toml_str("scenes = 5\nviews = 8\nmaps = \"none\"\n", "mem")
            .unwrap();
        assert_eq!(cfg.scenes, 5);
        assert_eq!(cfg.views, 8);
        assert_eq!(cfg.maps, MapOutput::None);
        assert_eq!(cfg.frames_per_scene, 200);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(DatasetConfig::from_toml_str("scens = 5\n", "mem").is_err());
    }

    #[test]
    fn scene_tables_parse() {
        let text = r#"
[[scene]]
id = 1
scene_type = "beach"
roi = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]]
"#;
        let cfg = DatasetConfig::from_toml_str(text, "mem").unwrap();
        assert_eq!(cfg.scene_specs.len(), 1);
        assert_eq!(cfg.scene_specs[0].scene_type, Some(SceneType::Beach));
    }
}
