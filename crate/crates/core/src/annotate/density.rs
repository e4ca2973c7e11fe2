use super::{GridMap, MapKind};
use crate::geometry::GroundGrid;
use crate::scene_synth::FrameRecord;

pub const DEFAULT_SIGMA_PX: f64 = 3.0;

/// Kernels are truncated at this many standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 4.0;

fn splat(acc: &mut [f64], rows: usize, cols: usize, r: f64, c: f64, sigma: f64) {
    let radius = TRUNCATION_SIGMAS * sigma;
    let r0 = ((r - radius - 0.5).floor().max(0.0)) as usize;
    let c0 = ((c - radius - 0.5).floor().max(0.0)) as usize;
    let r1 = (r + radius - 0.5).ceil().min(rows as f64 - 1.0);
    let c1 = (c + radius - 0.5).ceil().min(cols as f64 - 1.0);
    if r1 < 0.0 || c1 < 0.0 {
        return;
    }
    let (r1, c1) = (r1 as usize, c1 as usize);
    if r0 > r1 || c0 > c1 {
        return;
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let r2max = radius * radius;
    let w = c1 - c0 + 1;
    let mut weights = Vec::with_capacity((r1 - r0 + 1) * w);
    let mut total = 0.0;
    for i in r0..=r1 {
        let dr = i as f64 + 0.5 - r;
        for j in c0..=c1 {
            let dc = j as f64 + 0.5 - c;
            let d2 = dr * dr + dc * dc;
            let k = if d2 <= r2max { (-d2 * inv).exp() } else { 0.0 };
            total += k;
            weights.push(k);
        }
    }
    if total > 0.0 {
        for (n, k) in weights.into_iter().enumerate() {
            if k > 0.0 {
                acc[(r0 + n / w) * cols + c0 + n % w] += k / total;
            }
        }
    } else if r >= 0.0 && c >= 0.0 && r < rows as f64 && c < cols as f64 {
        // Kernel narrower than a pixel: all mass to the containing pixel.
        acc[r as usize * cols + c as usize] += 1.0;
    }
}

/// Sum of truncated Gaussians, one per `(row, col)` point, each renormalized
/// over the pixels it reaches so it contributes exactly unit mass. Points
/// whose kernel misses the map entirely contribute nothing.
pub fn render_density_map(points: &[(f64, f64)], rows: usize, cols: usize, sigma: f64) -> GridMap {
    assert!(sigma > 0.0, "sigma must be positive");
    let mut acc = vec![0.0f64; rows * cols];
    if rows > 0 && cols > 0 {
        for &(r, c) in points {
            splat(&mut acc, rows, cols, r, c, sigma);
        }
    }
    GridMap {
        rows,
        cols,
        values: acc.into_iter().map(|v| v as f32).collect(),
        kind: MapKind::PixelDensity,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundOccupancy {
    /// Person count per cell.
    pub dots: GridMap,
    /// Gaussian-smoothed occupancy; sums to the in-grid count.
    pub density: GridMap,
    /// Persons whose foot point falls outside the grid.
    pub out_of_grid: usize,
}

/// Ground-plane dot map and Gaussian map of a frame's foot positions;
/// `sigma_cells` is in grid cells.
pub fn render_ground_occupancy(
    frame: &FrameRecord,
    grid: &GroundGrid,
    sigma_cells: f64,
) -> GroundOccupancy {
    let mut dots = GridMap::zeros(grid.rows, grid.cols, MapKind::GroundOccupancy);
    let mut points = Vec::with_capacity(frame.persons.len());
    let mut out_of_grid = 0;
    for p in &frame.persons {
        match grid.grid_index(p.position.x, p.position.y) {
            Some((r, c)) => {
                let v = dots.get(r, c);
                dots.set(r, c, v + 1.0);
                points.push(grid.to_cell_coords(p.position.x, p.position.y));
            }
            None => out_of_grid += 1,
        }
    }
    let mut density = render_density_map(&points, grid.rows, grid.cols, sigma_cells);
    density.kind = MapKind::GroundDensity;
    GroundOccupancy {
        dots,
        density,
        out_of_grid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WorldPoint;
    use crate::scene_synth::{sample_environment, Action, PersonRecord};

    #[test]
    fn single_center_point_has_unit_mass() {
        for sigma in [0.1, 0.5, 1.0, 3.0, 10.0] {
            let m = render_density_map(&[(20.5, 30.5)], 41, 61, sigma);
            assert!((m.sum() - 1.0).abs() < 1e-6, "sigma {sigma}");
            assert_eq!(m.argmax(), Some((20, 30)));
        }
    }

    #[test]
    fn corner_point_is_renormalized() {
        let m = render_density_map(&[(0.0, 0.0)], 50, 50, 3.0);
        assert!((m.sum() - 1.0).abs() < 1e-6);
        assert_eq!(m.argmax(), Some((0, 0)));
    }

    #[test]
    fn empty_point_list_gives_zero_map() {
        let m = render_density_map(&[], 4, 5, 3.0);
        assert_eq!(m.sum(), 0.0);
        assert_eq!(m.values.len(), 20);
    }

    fn person(id: u32, x: f64, y: f64) -> PersonRecord {
        PersonRecord {
            id,
            position: WorldPoint::new(x, y, 0.0),
            action: Action::Standing,
            character_model: 0,
        }
    }

    #[test]
    fn occupancy_counts_shared_cells() {
        let grid = GroundGrid::new(0.0, 0.0, 0.2, 20, 20).unwrap();
        let frame = FrameRecord {
            frame_id: 0,
            seed: 0,
            environment: sample_environment(0),
            persons: vec![
                person(0, 1.1, 1.1),
                person(1, 1.12, 1.15),
                person(2, 9.0, 9.0),
                person(3, 2.5, 0.3),
            ],
        };
        let occ = render_ground_occupancy(&frame, &grid, 3.0);
        assert_eq!(occ.dots.get(5, 5), 2.0);
        assert_eq!(occ.dots.get(1, 12), 1.0);
        assert_eq!(occ.out_of_grid, 1);
        assert_eq!(occ.dots.sum(), 3.0);
        assert!((occ.density.sum() - 3.0).abs() < 1e-3);
    }
}
