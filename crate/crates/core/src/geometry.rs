//! Pinhole cameras, world/image projection and ground-plane grids.
//!
//! World frame is right-handed with `z` up, in meters. A camera stores the
//! world-to-camera transform `[R|t]`, so its center is `c = -Rᵀt`. Camera
//! axes follow the usual image convention: `x` right, `y` down, `z` forward.

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Head height used for annotations and ground projection, in meters.
pub const HEAD_HEIGHT: f64 = 1.75;

/// Divisor magnitude below which a point is treated as lying on the principal plane.
pub const PRINCIPAL_PLANE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point lies on the camera principal plane (|s| < 1e-12)")]
    DegenerateProjection,
    #[error("viewing ray is parallel to the plane z = {0}")]
    RayParallelToPlane(f64),
    #[error("invalid camera ring: {0}")]
    InvalidRing(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Pixel coordinates plus the projective scale `s`, which equals the depth
/// along the optical axis for intrinsics with last row `[0, 0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRecord", into = "CameraRecord")]
pub struct Camera {
    pub id: u32,
    pub intrinsics: Matrix3<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub image_width: u32,
    pub image_height: u32,
    pub fov_deg: f64,
}

/// Serialized camera layout: matrices as row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CameraRecord {
    id: u32,
    intrinsics: [[f64; 3]; 3],
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    image_width: u32,
    image_height: u32,
    fov_deg: f64,
}

fn rows_of(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = m[(r, c)];
        }
    }
    out
}

fn from_rows(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| rows[r][c])
}

impl From<Camera> for CameraRecord {
    fn from(cam: Camera) -> Self {
        CameraRecord {
            id: cam.id,
            intrinsics: rows_of(&cam.intrinsics),
            rotation: rows_of(&cam.rotation),
            translation: [cam.translation.x, cam.translation.y, cam.translation.z],
            image_width: cam.image_width,
            image_height: cam.image_height,
            fov_deg: cam.fov_deg,
        }
    }
}

impl TryFrom<CameraRecord> for Camera {
    type Error = GeometryError;

    fn try_from(rec: CameraRecord) -> Result<Self, Self::Error> {
        Camera::new(
            rec.id,
            from_rows(&rec.intrinsics),
            from_rows(&rec.rotation),
            Vector3::from(rec.translation),
            rec.image_width,
            rec.image_height,
            rec.fov_deg,
        )
    }
}

/// Focal length in pixels for a horizontal field of view.
pub fn focal_from_fov(image_width: u32, fov_deg: f64) -> f64 {
    (image_width as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan()
}

/// Zero-skew intrinsics with the principal point at the image center.
pub fn intrinsics_from_fov(image_width: u32, image_height: u32, fov_deg: f64) -> Matrix3<f64> {
    let f = focal_from_fov(image_width, fov_deg);
    Matrix3::new(
        f,
        0.0,
        image_width as f64 / 2.0,
        0.0,
        f,
        image_height as f64 / 2.0,
        0.0,
        0.0,
        1.0,
    )
}

impl Camera {
    /// Builds a camera and checks its invariants.
    pub fn new(
        id: u32,
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        image_width: u32,
        image_height: u32,
        fov_deg: f64,
    ) -> Result<Self, GeometryError> {
        let cam = Camera {
            id,
            intrinsics,
            rotation,
            translation,
            image_width,
            image_height,
            fov_deg,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera with intrinsics derived from the field of view.
    pub fn from_fov(
        id: u32,
        image_width: u32,
        image_height: u32,
        fov_deg: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "fov {fov_deg} outside (0, 180)"
            )));
        }
        let a = intrinsics_from_fov(image_width, image_height, fov_deg);
        Self::new(
            id,
            a,
            rotation,
            translation,
            image_width,
            image_height,
            fov_deg,
        )
    }

    /// Places a camera at `center` whose optical axis has the given horizontal
    /// bearing (radians, counter-clockwise from +x) and pitch (radians, negative
    /// looks down). Pitch must stay strictly inside (-90°, 90°).
    pub fn looking(
        id: u32,
        center: WorldPoint,
        bearing: f64,
        pitch: f64,
        image_width: u32,
        image_height: u32,
        fov_deg: f64,
    ) -> Result<Self, GeometryError> {
        if !(pitch.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(GeometryError::InvalidCamera(format!(
                "pitch {:.6} rad must lie strictly inside (-pi/2, pi/2)",
                pitch
            )));
        }
        let forward = Vector3::new(
            pitch.cos() * bearing.cos(),
            pitch.cos() * bearing.sin(),
            pitch.sin(),
        );
        let up = Vector3::z();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rotation =
            Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * center.to_vector());
        Self::from_fov(
            id,
            image_width,
            image_height,
            fov_deg,
            rotation,
            translation,
        )
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidCamera(msg));
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        if !(ortho < 1e-9) {
            return bad(format!(
                "camera {}: rotation not orthonormal ({ortho:e})",
                self.id
            ));
        }
        let det = r.determinant();
        if !((det - 1.0).abs() < 1e-9) {
            return bad(format!("camera {}: rotation determinant {det}", self.id));
        }
        let a = &self.intrinsics;
        if !(a[(0, 0)] > 0.0 && a[(1, 1)] > 0.0) {
            return bad(format!(
                "camera {}: focal entries must be positive",
                self.id
            ));
        }
        if a[(1, 0)] != 0.0 || a[(2, 0)] != 0.0 || a[(2, 1)] != 0.0 {
            return bad(format!(
                "camera {}: intrinsics not upper triangular",
                self.id
            ));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad(format!(
                "camera {}: fov {} outside (0, 180)",
                self.id, self.fov_deg
            ));
        }
        if !self.translation.iter().all(|v| v.is_finite()) || !a.iter().all(|v| v.is_finite()) {
            return bad(format!("camera {}: non-finite parameters", self.id));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return bad(format!("camera {}: empty image", self.id));
        }
        Ok(())
    }

    /// Camera center in world coordinates, `-Rᵀt`.
    pub fn center(&self) -> WorldPoint {
        WorldPoint::from_vector(&(-(self.rotation.transpose() * self.translation)))
    }

    /// Unit optical axis in world coordinates.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// The 3×4 matrix `A[R|t]`.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        rt.set_column(3, &self.translation);
        self.intrinsics * rt
    }

    /// `s·(u, v, 1)ᵀ = A[R|t]·(x, y, z, 1)ᵀ`.
    pub fn project(&self, p: &WorldPoint) -> Result<ImagePoint, GeometryError> {
        let cam = self.rotation * p.to_vector() + self.translation;
        let h = self.intrinsics * cam;
        let s = h.z;
        if s.abs() < PRINCIPAL_PLANE_EPS {
            return Err(GeometryError::DegenerateProjection);
        }
        Ok(ImagePoint {
            u: h.x / s,
            v: h.y / s,
            depth: s,
        })
    }

    /// Intersects the viewing ray through `(q.u, q.v)` with the plane at height `z`.
    pub fn backproject_at_height(
        &self,
        q: &ImagePoint,
        z: f64,
    ) -> Result<WorldPoint, GeometryError> {
        let a_inv = self
            .intrinsics
            .try_inverse()
            .ok_or_else(|| GeometryError::InvalidCamera("singular intrinsics".into()))?;
        let ray_cam = a_inv * Vector3::new(q.u, q.v, 1.0);
        let dir = (self.rotation.transpose() * ray_cam).normalize();
        if dir.z.abs() < PRINCIPAL_PLANE_EPS {
            return Err(GeometryError::RayParallelToPlane(z));
        }
        let c = self.center();
        let lambda = (z - c.z) / dir.z;
        Ok(WorldPoint::new(
            c.x + lambda * dir.x,
            c.y + lambda * dir.y,
            z,
        ))
    }

    /// True iff the point is in front of the camera and lands inside the image.
    pub fn is_visible(&self, p: &WorldPoint) -> bool {
        match self.project(p) {
            Ok(q) => self.contains(&q),
            Err(_) => false,
        }
    }

    pub fn contains(&self, q: &ImagePoint) -> bool {
        q.depth > 0.0
            && q.u >= 0.0
            && q.u < self.image_width as f64
            && q.v >= 0.0
            && q.v < self.image_height as f64
    }
}

/// Parameters of one ring of cameras circling a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRing {
    pub scene_center: WorldPoint,
    pub radius: f64,
    /// Camera height above `scene_center.z`.
    pub height: f64,
    pub pitch_deg: f64,
    pub count: usize,
    pub fov_deg: f64,
    /// Azimuth of the first camera, counter-clockwise from +x.
    pub azimuth_offset_deg: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub first_id: u32,
}

impl CameraRing {
    pub fn new(
        scene_center: WorldPoint,
        radius: f64,
        height: f64,
        pitch_deg: f64,
        count: usize,
        fov_deg: f64,
    ) -> Self {
        CameraRing {
            scene_center,
            radius,
            height,
            pitch_deg,
            count,
            fov_deg,
            azimuth_offset_deg: 0.0,
            image_width: 1920,
            image_height: 1080,
            first_id: 0,
        }
    }

    pub fn azimuth(&self, k: usize) -> f64 {
        self.azimuth_offset_deg.to_radians() + std::f64::consts::TAU * k as f64 / self.count as f64
    }
}

/// Evenly spaced cameras on a circle, each facing the scene center horizontally.
pub fn place_camera_ring(ring: &CameraRing) -> Result<Vec<Camera>, GeometryError> {
    if ring.count < 1 {
        return Err(GeometryError::InvalidRing(
            "count must be at least 1".into(),
        ));
    }
    if !(ring.radius > 0.0) || !ring.radius.is_finite() {
        return Err(GeometryError::InvalidRing(format!(
            "radius {} must be positive",
            ring.radius
        )));
    }
    let pitch = ring.pitch_deg.to_radians();
    (0..ring.count)
        .map(|k| {
            let az = ring.azimuth(k);
            let center = WorldPoint::new(
                ring.scene_center.x + ring.radius * az.cos(),
                ring.scene_center.y + ring.radius * az.sin(),
                ring.scene_center.z + ring.height,
            );
            let bearing = az + std::f64::consts::PI;
            Camera::looking(
                ring.first_id + k as u32,
                center,
                bearing,
                pitch,
                ring.image_width,
                ring.image_height,
                ring.fov_deg,
            )
            .map_err(|e| GeometryError::InvalidRing(e.to_string()))
        })
        .collect()
}

/// Number of cardinal cameras in the standard rig.
pub const CARDINAL_VIEWS: usize = 4;

/// Standard rig: four cardinal cameras followed by an evenly spaced ring with
/// the remaining `views - 4` cameras, offset by half a ring step. With
/// `views <= 4` only the cardinal ring is built, truncated to `views` cameras.
pub fn standard_rig(template: &CameraRing, views: usize) -> Result<Vec<Camera>, GeometryError> {
    if views < 1 {
        return Err(GeometryError::InvalidRing(
            "rig needs at least one view".into(),
        ));
    }
    let cardinal = CameraRing {
        count: views.min(CARDINAL_VIEWS),
        azimuth_offset_deg: 0.0,
        first_id: 0,
        ..template.clone()
    };
    let mut cams = place_camera_ring(&cardinal)?;
    if views > CARDINAL_VIEWS {
        let count = views - CARDINAL_VIEWS;
        let ring = CameraRing {
            count,
            azimuth_offset_deg: 180.0 / count as f64,
            first_id: CARDINAL_VIEWS as u32,
            ..template.clone()
        };
        cams.extend(place_camera_ring(&ring)?);
    }
    Ok(cams)
}

/// Axis-aligned grid on the ground plane. Row index follows `y`, column index follows `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundGrid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GroundGrid {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        cell_size: f64,
        rows: usize,
        cols: usize,
    ) -> Result<Self, GeometryError> {
        if !(cell_size > 0.0) || rows == 0 || cols == 0 {
            return Err(GeometryError::InvalidCamera(format!(
                "invalid ground grid: cell {cell_size}, {rows}x{cols}"
            )));
        }
        Ok(GroundGrid {
            origin_x,
            origin_y,
            cell_size,
            rows,
            cols,
        })
    }

    /// Grid covering `[0, size_x] × [0, size_y]`.
    pub fn covering(size_x: f64, size_y: f64, cell_size: f64) -> Result<Self, GeometryError> {
        let cells = |s: f64| ((s / cell_size) - 1e-9).ceil().max(1.0) as usize;
        Self::new(0.0, 0.0, cell_size, cells(size_y), cells(size_x))
    }

    /// World cell for `(x, y)`, or `None` when outside the grid.
    pub fn grid_index(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let r = ((y - self.origin_y) / self.cell_size).floor();
        let c = ((x - self.origin_x) / self.cell_size).floor();
        if r >= 0.0 && c >= 0.0 && r < self.rows as f64 && c < self.cols as f64 {
            Some((r as usize, c as usize))
        } else {
            None
        }
    }

    /// Continuous (row, col) coordinates where cell `(r, c)` spans `[r, r+1) × [c, c+1)`.
    pub fn to_cell_coords(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (y - self.origin_y) / self.cell_size,
            (x - self.origin_x) / self.cell_size,
        )
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
