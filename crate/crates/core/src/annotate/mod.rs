//! Per-view and ground-plane annotations, and every on-disk format.
//!
//! Pixel `(i, j)` of a map covers `[i, i+1) × [j, j+1)` in continuous
//! `(row, col)` coordinates, so its center is `(i + 0.5, j + 0.5)`; image
//! coordinates map as `row = v`, `col = u`.

mod density;
mod format;
mod grid_map;
mod manifest;
mod views;

pub use density::{
    render_density_map, render_ground_occupancy, GroundOccupancy, DEFAULT_SIGMA_PX,
    TRUNCATION_SIGMAS,
};
pub use format::{
    decode_map, encode_map, parse_dots, parse_points, read_dots, read_map, read_points, write_dots,
    write_map, FormatError, ScoredPoint, MAP_HEADER_LEN, MAP_MAGIC, MAP_VERSION,
};
pub use grid_map::{GridMap, MapKind, MapSpace};
pub use manifest::{
    build_manifest, read_dataset, read_manifest, write_dataset, AnnotationSettings, DatasetError,
    DatasetManifest, FrameManifest, GeneratorInfo, MapRef, SceneManifest, ViewRef, MANIFEST_FILE,
    MANIFEST_FORMAT, MANIFEST_VERSION,
};
pub use views::{annotate_views, ViewAnnotation, ViewEntry, OCCLUDER_RADIUS};
