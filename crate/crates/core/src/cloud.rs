//! Whole-cloud operations: rigid transforms, grid tiling and centroids.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{Point3, PointCloud, RigidTransform, Vec3};

pub fn apply_transform(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    cloud.iter().map(|p| t.apply(p)).collect()
}

pub fn centroid(cloud: &PointCloud) -> Result<Point3> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("centroid of an empty cloud".into()));
    }
    Ok(centroid_of(cloud.points()))
}

pub(crate) fn centroid_of(points: &[Point3]) -> Point3 {
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len() as f64)
}

/// Grid cell of `v` along one axis. Values on a shared edge go to the lower cell.
fn cell_index(v: f64, origin: f64, size: f64) -> usize {
    let k = ((v - origin) / size).ceil() - 1.0;
    if k <= 0.0 {
        0
    } else {
        k as usize
    }
}

/// Groups point indices by grid cell, keyed by `(ix, iy)`.
pub(crate) fn grid_cells(cloud: &PointCloud, cell_size: f64) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let Some(bounds) = cloud.xy_bounds() else {
        return cells;
    };
    for (i, p) in cloud.iter().enumerate() {
        let key = (
            cell_index(p.x, bounds.min_x, cell_size),
            cell_index(p.y, bounds.min_y, cell_size),
        );
        cells.entry(key).or_default().push(i);
    }
    cells
}

/// Partitions a cloud on an axis-aligned grid anchored at its xy-minimum.
///
/// Tiles holding fewer than `min_points` points are dropped. Tiles come back in
/// `(ix, iy)` order.
pub fn tile_scene(cloud: &PointCloud, tile_size: f64, min_points: usize) -> Result<Vec<PointCloud>> {
    if !(tile_size > 0.0 && tile_size.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "tile size must be positive, got {tile_size}"
        )));
    }
    let points = cloud.points();
    Ok(grid_cells(cloud, tile_size)
        .into_values()
        .filter(|idx| idx.len() >= min_points)
        .map(|idx| idx.into_iter().map(|i| points[i]).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_cloud(n: usize, size: f64, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(0.0..size),
                    rng.random_range(0.0..size),
                    rng.random_range(-0.1..0.1),
                )
            })
            .collect()
    }

    #[test]
    fn identity_and_translation() {
        let c: PointCloud = vec![Point3::origin(), Point3::new(1.0, 2.0, 3.0)]
            .into_iter()
            .collect();
        assert_eq!(apply_transform(&c, &RigidTransform::identity()), c);
        let t = RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let one: PointCloud = std::iter::once(Point3::origin()).collect();
        assert_eq!(apply_transform(&one, &t).points()[0], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn quarter_turn() {
        let one: PointCloud = std::iter::once(Point3::new(1.0, 0.0, 0.0)).collect();
        let out = apply_transform(&one, &RigidTransform::from_yaw(std::f64::consts::FRAC_PI_2));
        let p = out.points()[0];
        assert!((p - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn round_trip_through_inverse() {
        let c = uniform_cloud(500, 10.0, 1);
        let t = RigidTransform::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 1.1)
            .with_translation(Vec3::new(-3.0, 4.0, 7.5));
        let back = apply_transform(&apply_transform(&c, &t), &t.inverse());
        for (a, b) in c.iter().zip(back.iter()) {
            assert!((a - b).abs().max() < 1e-9);
        }
    }

    #[test]
    fn four_tiles_partition_the_cloud() {
        let mut c = uniform_cloud(10_000, 100.0, 2);
        // pin the extent so the grid spans exactly 100 m
        let mut pts = c.clone().into_points();
        pts.push(Point3::new(0.0, 0.0, 0.0));
        pts.push(Point3::new(100.0, 100.0, 0.0));
        c = PointCloud::from_points(pts).unwrap();
        let tiles = tile_scene(&c, 50.0, 0).unwrap();
        assert_eq!(tiles.len(), 4);
        assert_eq!(tiles.iter().map(|t| t.len()).sum::<usize>(), c.len());
    }

    #[test]
    fn boundary_points_go_to_lower_tile() {
        let c: PointCloud = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(20.0, 0.0, 0.0),
        ]
        .into_iter()
        .collect();
        let tiles = tile_scene(&c, 10.0, 0).unwrap();
        assert_eq!(tiles.len(), 2);
        assert_eq!(tiles[0].len(), 2);
        assert_eq!(tiles[1].len(), 1);
    }

    #[test]
    fn empty_cloud_has_no_tiles() {
        assert!(tile_scene(&PointCloud::new(), 40.0, 0).unwrap().is_empty());
        assert!(tile_scene(&PointCloud::new(), 0.0, 0).is_err());
    }

    #[test]
    fn min_points_keeps_only_the_dense_corner() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<Point3> = (0..400)
            .map(|_| Point3::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 0.0))
            .collect();
        for i in 0..30 {
            pts.push(Point3::new(12.0 + (i % 10) as f64 * 2.5, 12.0 + (i / 10) as f64 * 9.0, 0.0));
        }
        let cloud = PointCloud::from_points(pts.clone()).unwrap();
        // brute-force count per 10 m cell with lower-cell tie-breaking
        let mut counts = std::collections::HashMap::new();
        for p in &pts {
            let ix = (((p.x - 0.0) / 10.0).ceil() - 1.0).max(0.0) as usize;
            let iy = (((p.y - 0.0) / 10.0).ceil() - 1.0).max(0.0) as usize;
            *counts.entry((ix, iy)).or_insert(0usize) += 1;
        }
        let expected = counts.values().filter(|&&n| n >= 100).count();
        assert_eq!(expected, 1);
        let tiles = tile_scene(&cloud, 10.0, 100).unwrap();
        assert_eq!(tiles.len(), expected);
        assert!(tiles[0].len() >= 400);
    }

    #[test]
    fn centroid_cases() {
        assert!(centroid(&PointCloud::new()).is_err());
        let c: PointCloud = vec![Point3::origin(), Point3::new(2.0, 0.0, 0.0)].into_iter().collect();
        assert_eq!(centroid(&c).unwrap(), Point3::new(1.0, 0.0, 0.0));
        let single: PointCloud = std::iter::once(Point3::new(3.0, -1.0, 2.0)).collect();
        assert_eq!(centroid(&single).unwrap(), Point3::new(3.0, -1.0, 2.0));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let unit: PointCloud = (0..10_000)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let m = centroid(&unit).unwrap();
        assert!((m - Point3::new(0.5, 0.5, 0.5)).abs().max() < 0.02);
    }

    #[test]
    fn tiling_is_permutation_invariant() {
        use rand::seq::SliceRandom;
        let c = uniform_cloud(2000, 30.0, 5);
        let mut pts = c.clone().into_points();
        pts.shuffle(&mut ChaCha8Rng::seed_from_u64(6));
        let shuffled = PointCloud::from_points(pts).unwrap();
        let a = tile_scene(&c, 7.0, 10).unwrap();
        let b = tile_scene(&shuffled, 7.0, 10).unwrap();
        assert_eq!(a.len(), b.len());
        for (ta, tb) in a.iter().zip(&b) {
            assert_eq!(ta.canonical(), tb.canonical());
        }
    }
}
