use mvforge::geometry::{
    place_camera_ring, standard_rig, Camera, CameraRing, GroundGrid, WorldPoint,
};
use proptest::prelude::*;

fn camera(x: f64, y: f64, z: f64, bearing: f64, pitch_deg: f64, fov: f64) -> Camera {
    Camera::looking(
        3,
        WorldPoint::new(x, y, z),
        bearing,
        pitch_deg.to_radians(),
        1920,
        1080,
        fov,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn backprojection_inverts_projection(
        x in -100.0..100.0f64, y in -100.0..100.0f64, z in 1.0..50.0f64,
        bearing in 0.0..std::f64::consts::TAU, pitch in -85.0..-3.0f64, fov in 15.0..120.0f64,
        dx in -80.0..80.0f64, dy in -80.0..80.0f64, h in 0.0..2.5f64,
    ) {
        let cam = camera(x, y, z, bearing, pitch, fov);
        let p = WorldPoint::new(x + dx, y + dy, h);
        if let Ok(q) = cam.project(&p) {
            prop_assume!(q.depth > 1e-3);
            let back = cam.backproject_at_height(&q, h).unwrap();
            prop_assert!((back.to_vector() - p.to_vector()).norm() < 1e-6);
        }
    }

    #[test]
    fn serde_keeps_cameras_exact(x in -100.0..100.0f64, z in 1.0..50.0f64, bearing in 0.0..std::f64::consts::TAU, pitch in -85.0..-3.0f64) {
        let cam = camera(x, -x, z, bearing, pitch, 50.0);
        let text = serde_json::to_string(&cam).unwrap();
        let back: Camera = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, cam);
    }

    #[test]
    fn grid_cells_contain_their_centers(ox in -20.0..20.0f64, oy in -20.0..20.0f64, cell in 0.05..2.0f64, r in 0usize..40, c in 0usize..40) {
        let grid = GroundGrid::new(ox, oy, cell, 40, 40).unwrap();
        let (x, y) = grid.cell_center(r, c);
        prop_assert_eq!(grid.grid_index(x, y), Some((r, c)));
    }
}

#[test]
fn ring_cameras_look_at_the_center() {
    let ring = CameraRing::new(
        WorldPoint::new(50.0, 60.0, 0.0),
        90.0,
        40.0,
        -24.0,
        12,
        40.0,
    );
    let cams = place_camera_ring(&ring).unwrap();
    for cam in &cams {
        let q = cam.project(&WorldPoint::new(50.0, 60.0, 0.0)).unwrap();
        // Horizontally centered; the pitch decides the vertical position.
        assert!((q.u - 960.0).abs() < 1e-6, "u = {}", q.u);
        assert!(q.depth > 0.0);
    }
}

#[test]
fn standard_rig_is_cardinal_plus_offset_ring() {
    let template = CameraRing::new(WorldPoint::new(0.0, 0.0, 0.0), 10.0, 5.0, -20.0, 1, 60.0);
    let cams = standard_rig(&template, 8).unwrap();
    assert_eq!(cams.len(), 8);
    let ids: Vec<u32> = cams.iter().map(|c| c.id).collect();
    assert_eq!(ids, (0..8).collect::<Vec<_>>());
    let az = |c: &Camera| {
        c.center()
            .y
            .atan2(c.center().x)
            .to_degrees()
            .rem_euclid(360.0)
    };
    let cardinal: Vec<f64> = cams[..4].iter().map(az).collect();
    for (k, a) in cardinal.iter().enumerate() {
        assert!((a - 90.0 * k as f64).abs() < 1e-9);
    }
    assert!((az(&cams[4]) - 45.0).abs() < 1e-9);
    assert_eq!(standard_rig(&template, 3).unwrap().len(), 3);
    assert!(standard_rig(&template, 0).is_err());
}

#[test]
fn invalid_rings_are_rejected() {
    let bad_radius = CameraRing::new(WorldPoint::new(0.0, 0.0, 0.0), 0.0, 5.0, -20.0, 4, 60.0);
    assert!(place_camera_ring(&bad_radius).is_err());
    let straight_down = CameraRing::new(WorldPoint::new(0.0, 0.0, 0.0), 5.0, 5.0, -90.0, 4, 60.0);
    assert!(place_camera_ring(&straight_down).is_err());
}
