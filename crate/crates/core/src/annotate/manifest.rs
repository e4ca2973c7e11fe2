//! Dataset manifest and directory layout.
//!
//! ```text
//! <root>/manifest.json
//! <root>/scene_<s>/frame_<f>/view_<v>.dots
//! <root>/scene_<s>/frame_<f>/view_<v>.den     (maps = "all")
//! <root>/scene_<s>/frame_<f>/ground.occ       (maps = "ground" | "all")
//! <root>/scene_<s>/frame_<f>/ground.den       (maps = "ground" | "all")
//! ```
//!
//! The manifest is pretty-printed JSON with a fixed key order. Camera
//! parameters keep full double precision; every other real is rounded to nine
//! significant digits when it is created, so `read(write(m)) == m`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::density::{render_density_map, render_ground_occupancy};
use super::format::{decode_map, encode_map, parse_dots, write_dots, FormatError};
use super::views::annotate_views;
use super::MapKind;
use crate::config::{DatasetConfig, MapOutput};
use crate::geometry::{Camera, GroundGrid, HEAD_HEIGHT};
use crate::rng::GENERATOR_ID;
use crate::round_sig9;
use crate::scene_synth::{FrameRecord, Scene, SceneDataset, Split};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "mvforge-dataset";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub name: String,
    pub version: String,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSettings {
    pub head_height: f64,
    pub density_sigma_px: f64,
    pub ground_sigma_cells: f64,
    pub occlusion: bool,
    pub maps: MapOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRef {
    pub camera_id: u32,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRef {
    pub kind: MapKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub camera_id: Option<u32>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub record: FrameRecord,
    pub views: Vec<ViewRef>,
    pub maps: Vec<MapRef>,
    pub out_of_grid: usize,
}

impl FrameManifest {
    pub fn map(&self, kind: MapKind, camera_id: Option<u32>) -> Option<&MapRef> {
        self.maps
            .iter()
            .find(|m| m.kind == kind && m.camera_id == camera_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub scene: Scene,
    pub split: Split,
    pub thunder_prob: f64,
    pub ground_grid: GroundGrid,
    pub cameras: Vec<Camera>,
    pub frames: Vec<FrameManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub format_version: u32,
    pub generator: GeneratorInfo,
    pub seed: u64,
    pub config: DatasetConfig,
    pub annotation: AnnotationSettings,
    pub scenes: Vec<SceneManifest>,
}

impl DatasetManifest {
    pub fn frames(&self) -> impl Iterator<Item = (&SceneManifest, &FrameManifest)> {
        self.scenes
            .iter()
            .flat_map(|s| s.frames.iter().map(move |f| (s, f)))
    }

    pub fn frame_count(&self) -> usize {
        self.scenes.iter().map(|s| s.frames.len()).sum()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}

fn frame_dir(scene: u32, frame: u32) -> String {
    format!("scene_{scene}/frame_{frame}")
}

/// Describes `dataset` and the files [`write_dataset`] will produce for it.
pub fn build_manifest(dataset: &SceneDataset) -> DatasetManifest {
    let cfg = &dataset.config;
    let scenes = dataset
        .scenes
        .iter()
        .map(|entry| {
            let frames = entry
                .frames
                .iter()
                .map(|frame| {
                    let dir = frame_dir(entry.scene.id, frame.frame_id);
                    let views = entry
                        .cameras
                        .iter()
                        .map(|c| ViewRef {
                            camera_id: c.id,
                            file: format!("{dir}/view_{}.dots", c.id),
                        })
                        .collect();
                    let mut maps = Vec::new();
                    if cfg.maps != MapOutput::None {
                        maps.push(MapRef {
                            kind: MapKind::GroundOccupancy,
                            camera_id: None,
                            file: format!("{dir}/ground.occ"),
                        });
                        maps.push(MapRef {
                            kind: MapKind::GroundDensity,
                            camera_id: None,
                            file: format!("{dir}/ground.den"),
                        });
                    }
                    if cfg.maps == MapOutput::All {
                        maps.extend(entry.cameras.iter().map(|c| MapRef {
                            kind: MapKind::PixelDensity,
                            camera_id: Some(c.id),
                            file: format!("{dir}/view_{}.den", c.id),
                        }));
                    }
                    let out_of_grid = frame
                        .persons
                        .iter()
                        .filter(|p| entry.grid.grid_index(p.position.x, p.position.y).is_none())
                        .count();
                    FrameManifest {
                        record: frame.clone(),
                        views,
                        maps,
                        out_of_grid,
                    }
                })
                .collect();
            SceneManifest {
                scene: entry.scene.clone(),
                split: entry.split,
                thunder_prob: round_sig9(entry.thunder_prob),
                ground_grid: entry.grid,
                cameras: entry.cameras.clone(),
                frames,
            }
        })
        .collect();
    DatasetManifest {
        format: MANIFEST_FORMAT.to_string(),
        format_version: MANIFEST_VERSION,
        generator: GeneratorInfo {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: GENERATOR_ID.to_string(),
        },
        seed: dataset.seed,
        config: cfg.clone(),
        annotation: AnnotationSettings {
            head_height: HEAD_HEIGHT,
            density_sigma_px: cfg.density_sigma_px,
            ground_sigma_cells: cfg.ground_sigma_cells,
            occlusion: cfg.occlusion,
            maps: cfg.maps,
        },
        scenes,
    }
}

fn write_frame(
    root: &Path,
    manifest: &DatasetManifest,
    scene: &SceneManifest,
    frame: &FrameManifest,
) -> Result<(), DatasetError> {
    let settings = &manifest.annotation;
    let dir = root.join(frame_dir(scene.scene.id, frame.record.frame_id));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let annotations = annotate_views(&frame.record, &scene.cameras, settings.occlusion);
    for (view, ann) in frame.views.iter().zip(&annotations) {
        let path = root.join(&view.file);
        std::fs::write(&path, write_dots(ann)).map_err(io_err(&path))?;
    }
    if frame.maps.is_empty() {
        return Ok(());
    }
    let occupancy = render_ground_occupancy(
        &frame.record,
        &scene.ground_grid,
        settings.ground_sigma_cells,
    );
    for map_ref in &frame.maps {
        let map = match (map_ref.kind, map_ref.camera_id) {
            (MapKind::GroundOccupancy, _) => occupancy.dots.clone(),
            (MapKind::GroundDensity, _) => occupancy.density.clone(),
            (MapKind::PixelDensity, Some(cam_id)) => {
                let (k, cam) = scene
                    .cameras
                    .iter()
                    .enumerate()
                    .find(|(_, c)| c.id == cam_id)
                    .expect("map references a scene camera");
                let points: Vec<(f64, f64)> = annotations[k]
                    .entries
                    .iter()
                    .filter(|e| e.visible)
                    .map(|e| (e.v, e.u))
                    .collect();
                render_density_map(
                    &points,
                    cam.image_height as usize,
                    cam.image_width as usize,
                    settings.density_sigma_px,
                )
            }
            _ => continue,
        };
        let path = root.join(&map_ref.file);
        std::fs::write(&path, encode_map(&map)).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Writes every per-frame file, then the manifest. Frames are written in
/// parallel; file contents do not depend on scheduling.
pub fn write_dataset(root: &Path, manifest: &DatasetManifest) -> Result<PathBuf, DatasetError> {
    std::fs::create_dir_all(root).map_err(io_err(root))?;
    let jobs: Vec<(&SceneManifest, &FrameManifest)> = manifest.frames().collect();
    jobs.par_iter()
        .try_for_each(|(scene, frame)| write_frame(root, manifest, scene, frame))?;
    let path = root.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()).map_err(io_err(&path))?;
    Ok(path)
}

/// Byte offset of a 1-based line/column position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Parses `manifest.json` without touching the files it references.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest, FormatError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, &e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| {
        FormatError::new(
            &file,
            byte_offset(&text, e.line(), e.column()),
            "valid dataset manifest",
            e.to_string(),
        )
    })?;
    if manifest.format != MANIFEST_FORMAT {
        let at = text.find("\"format\"").unwrap_or(0);
        return Err(FormatError::new(
            &file,
            at,
            MANIFEST_FORMAT,
            format!("unknown format '{}'", manifest.format),
        ));
    }
    if manifest.format_version != MANIFEST_VERSION {
        let at = text.find("\"format_version\"").unwrap_or(0);
        return Err(FormatError::new(
            &file,
            at,
            format!("format_version {MANIFEST_VERSION}"),
            format!("unsupported version {}", manifest.format_version),
        ));
    }
    Ok(manifest)
}

fn check_frame(
    root: &Path,
    scene: &SceneManifest,
    frame: &FrameManifest,
) -> Result<(), FormatError> {
    let ids: HashSet<u32> = frame.record.persons.iter().map(|p| p.id).collect();
    for view in &frame.views {
        let path = root.join(&view.file);
        let file = path.display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|e| FormatError::io(&path, &e))?;
        let ann = parse_dots(&text, &file, view.camera_id)?;
        let seen: HashSet<u32> = ann.entries.iter().map(|e| e.person_id).collect();
        if ann.entries.len() != ids.len() || seen != ids {
            return Err(FormatError::new(
                &file,
                text.len(),
                format!("one entry per person of frame {}", frame.record.frame_id),
                "person ids differ from the manifest",
            ));
        }
        if !scene.cameras.iter().any(|c| c.id == view.camera_id) {
            return Err(FormatError::new(
                &file,
                0,
                "known camera id",
                format!("camera {} not in scene", view.camera_id),
            ));
        }
    }
    for map_ref in &frame.maps {
        let path = root.join(&map_ref.file);
        let file = path.display().to_string();
        let bytes = std::fs::read(&path).map_err(|e| FormatError::io(&path, &e))?;
        let map = decode_map(&bytes, &file)?;
        if map.kind != map_ref.kind {
            return Err(FormatError::new(
                &file,
                6,
                format!("map kind {:?}", map_ref.kind),
                "map kind mismatch",
            ));
        }
    }
    Ok(())
}

/// Reads a manifest and checks that every referenced file exists, parses, and
/// carries the frame's person ids.
pub fn read_dataset(manifest_path: &Path) -> Result<DatasetManifest, FormatError> {
    let manifest = read_manifest(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let jobs: Vec<(&SceneManifest, &FrameManifest)> = manifest.frames().collect();
    jobs.par_iter()
        .try_for_each(|(scene, frame)| check_frame(root, scene, frame))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_from_line_and_column() {
        let text = "ab\ncde\nf";
        assert_eq!(byte_offset(text, 1, 1), 0);
        assert_eq!(byte_offset(text, 2, 2), 4);
        assert_eq!(byte_offset(text, 3, 1), 7);
    }
}
