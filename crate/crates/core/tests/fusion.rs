mod common;

use mvforge::annotate::{GridMap, MapKind};
use mvforge::fusion::{
    fuse_max, ground_pipeline, peak_cells, project_to_ground, sample_bilinear, spatial_select,
    FusionError, ViewMapStack,
};
use mvforge::geometry::{standard_rig, CameraRing, GroundGrid, WorldPoint};

fn rig(views: usize) -> Vec<mvforge::geometry::Camera> {
    let template = CameraRing {
        image_width: 320,
        image_height: 180,
        ..CameraRing::new(
            WorldPoint::new(5.0, 5.0, 0.0),
            12.0,
            8.0,
            -30.0,
            views,
            60.0,
        )
    };
    standard_rig(&template, views).unwrap()
}

#[test]
fn toy_frames_fuse_onto_the_occupied_cells() {
    for seed in [1, 2, 3] {
        assert_eq!(common::toy_fusion_mismatches(seed), 0, "seed {seed}");
    }
}

#[test]
fn constant_views_give_a_constant_footprint() {
    let cams = rig(4);
    let grid = GroundGrid::covering(10.0, 10.0, 0.25).unwrap();
    let ones = GridMap::filled(180, 320, 1.0, MapKind::PixelFeature);
    for cam in &cams {
        let g = project_to_ground(&ones, cam, &grid, 0.0);
        // Inside the image footprint the bilinear sample of a constant map is
        // the constant, except within one pixel of the image border.
        let mut interior = 0;
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let (x, y) = grid.cell_center(r, c);
                let q = cam.project(&WorldPoint::new(x, y, 0.0)).unwrap();
                if q.depth > 0.0 && q.u > 1.0 && q.v > 1.0 && q.u < 319.0 && q.v < 179.0 {
                    assert!((g.get(r, c) - 1.0).abs() < 1e-6);
                    interior += 1;
                }
            }
        }
        assert!(interior > 0);
    }
}

#[test]
fn uniform_attention_averages_views() {
    let cams = rig(3);
    let maps: Vec<GridMap> = (0..3)
        .map(|k| GridMap::filled(180, 320, (k + 1) as f32, MapKind::PixelFeature))
        .collect();
    let stack = ViewMapStack::new(maps, cams).unwrap();
    let att: Vec<GridMap> = (0..3)
        .map(|_| GridMap::filled(180, 320, 4.2, MapKind::PixelFeature))
        .collect();
    let sel = spatial_select(&stack, &att).unwrap();
    for (k, m) in sel.maps.iter().enumerate() {
        assert!((m.get(7, 9) - (k + 1) as f32 / 3.0).abs() < 1e-6);
    }
}

#[test]
fn bilinear_sampling_hits_pixel_centers() {
    let values: Vec<f32> = (0..12).map(|v| v as f32).collect();
    let map = GridMap::from_values(3, 4, values, MapKind::PixelFeature).unwrap();
    assert_eq!(sample_bilinear(&map, 2.5, 1.5), 6.0);
    assert!((sample_bilinear(&map, 3.0, 1.5) - 6.5).abs() < 1e-12);
    assert_eq!(sample_bilinear(&map, -5.0, 1.5), 0.0);
}

#[test]
fn shape_errors() {
    let a = GridMap::zeros(2, 2, MapKind::GroundFeature);
    let b = GridMap::zeros(2, 3, MapKind::GroundFeature);
    assert!(matches!(
        fuse_max(&[a.clone(), b]),
        Err(FusionError::ShapeMismatch(_))
    ));
    assert!(matches!(fuse_max(&[]), Err(FusionError::Empty)));
    assert!(ViewMapStack::new(vec![a], rig(2)).is_err());
}

#[test]
fn pipeline_output_is_a_fused_ground_map() {
    let cams = rig(2);
    let grid = GroundGrid::covering(10.0, 10.0, 0.5).unwrap();
    let maps = vec![GridMap::filled(180, 320, 2.0, MapKind::PixelFeature); 2];
    let stack = ViewMapStack::new(maps, cams).unwrap();
    let fused = ground_pipeline(&stack, None, &grid, 1.75).unwrap();
    assert_eq!(
        (fused.rows, fused.cols, fused.kind),
        (grid.rows, grid.cols, MapKind::GroundFused)
    );
    assert!(fused.values.iter().all(|v| *v <= 1.0 + 1e-6));
    assert!(peak_cells(&GridMap::zeros(4, 4, MapKind::GroundFused), 0.0).is_empty());
}
