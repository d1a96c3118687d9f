//! Plane fitting and seabed removal.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::grid_cells;
use crate::error::{Error, Result};
use crate::rng::{derive, rng_for, stream};
use crate::types::{Point3, PointCloud, Vec3};

/// The plane `{p : normal · p + offset = 0}` with `normal.z >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    pub normal: Vec3,
    pub offset: f64,
    pub inlier_count: usize,
}

impl PlaneModel {
    /// Signed distance, positive above the plane.
    pub fn distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) + self.offset
    }

    /// Plane `z = 0`.
    pub fn horizontal() -> Self {
        PlaneModel {
            normal: Vec3::z(),
            offset: 0.0,
            inlier_count: 0,
        }
    }

    fn oriented(normal: Vec3, point: &Point3) -> (Vec3, f64) {
        let n = if normal.z < 0.0 { -normal } else { normal };
        (n, -n.dot(&point.coords))
    }
}

fn centroid(points: &[&Point3]) -> Point3 {
    let sum = points.iter().fold(Vec3::zeros(), |s, p| s + p.coords);
    Point3::from(sum / points.len() as f64)
}

/// Least-squares plane through `points`: normal along the smallest principal axis.
fn fit_least_squares(points: &[&Point3]) -> (Vec3, Point3, Vec3) {
    let c = centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = *p - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / points.len() as f64);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vec3::new(
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    (eig.eigenvectors.column(order[0]).normalize(), c, values)
}

fn count_inliers(points: &[Point3], normal: &Vec3, offset: f64, dist: f64) -> usize {
    points
        .iter()
        .filter(|p| (normal.dot(&p.coords) + offset).abs() <= dist)
        .count()
}

/// Fits the plane supported by the most points.
///
/// Candidate planes come from random point triples; the winner is refit by
/// least squares on its inliers. Triples are drawn from the lexicographically
/// sorted points, so the result does not depend on input order.
pub fn ransac_plane(cloud: &PointCloud, iterations: usize, inlier_dist: f64, seed: u64) -> Result<PlaneModel> {
    if cloud.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "plane fit needs at least 3 points, got {}",
            cloud.len()
        )));
    }
    if !(inlier_dist > 0.0) || iterations == 0 {
        return Err(Error::InvalidInput(
            "plane fit needs positive iterations and inlier distance".into(),
        ));
    }
    let sorted = cloud.canonical();
    let pts = sorted.points();
    let all: Vec<&Point3> = pts.iter().collect();
    let (_, _, spread) = fit_least_squares(&all);
    let scale = spread[2].max(f64::MIN_POSITIVE);
    if spread[1] <= 1e-14 * scale {
        return Err(Error::InvalidInput("points are collinear".into()));
    }

    let mut rng = rng_for(seed, &[stream::DETECT]);
    let n = pts.len();
    let mut best: Option<(usize, Vec3, f64)> = None;
    for _ in 0..iterations {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let normal = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
        let len = normal.norm();
        if len <= 1e-12 {
            continue;
        }
        let (normal, offset) = PlaneModel::oriented(normal / len, &pts[i]);
        let count = count_inliers(pts, &normal, offset, inlier_dist);
        if best.as_ref().is_none_or(|b| count > b.0) {
            best = Some((count, normal, offset));
        }
    }
    let (_, normal, offset) = match best {
        Some(b) => b,
        // every draw was degenerate; fall back to the global fit
        None => {
            let (normal, c, _) = fit_least_squares(&all);
            let (n, d) = PlaneModel::oriented(normal, &c);
            (0, n, d)
        }
    };
    let inliers: Vec<&Point3> = pts
        .iter()
        .filter(|p| (normal.dot(&p.coords) + offset).abs() <= inlier_dist)
        .collect();
    let (normal, offset) = if inliers.len() >= 3 {
        let (n, c, _) = fit_least_squares(&inliers);
        PlaneModel::oriented(n, &c)
    } else {
        (normal, offset)
    };
    Ok(PlaneModel {
        normal,
        offset,
        inlier_count: count_inliers(pts, &normal, offset, inlier_dist).max(3),
    })
}

/// Keeps the points more than `clearance` above the plane.
pub fn remove_seabed(cloud: &PointCloud, plane: &PlaneModel, clearance: f64) -> PointCloud {
    cloud
        .iter()
        .filter(|p| plane.distance(p) > clearance)
        .copied()
        .collect()
}

/// Seabed removal settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeabedParams {
    pub iterations: usize,
    pub inlier_dist: f64,
    pub clearance: f64,
    /// Side of the square tiles that each get their own plane.
    pub tile_size: f64,
    /// Each tile's plane is fit to the points within this border around it.
    pub tile_padding: f64,
}

impl Default for SeabedParams {
    fn default() -> Self {
        SeabedParams {
            iterations: 200,
            inlier_dist: 0.04,
            clearance: 0.04,
            tile_size: 4.0,
            tile_padding: 1.0,
        }
    }
}

impl SeabedParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0
            || !(self.inlier_dist > 0.0 && self.clearance > 0.0 && self.tile_size > 0.0 && self.tile_padding >= 0.0)
        {
            return Err(Error::Config(
                "seabed iterations, inlier_dist, clearance and tile_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Removes a curved seabed by fitting one plane per tile.
///
/// Tiles are anchored at the cloud's minimum corner. Tiles whose padded
/// neighbourhood has fewer than three non-collinear points are dropped.
pub fn remove_seabed_tiled(cloud: &PointCloud, params: &SeabedParams, seed: u64) -> Result<(PointCloud, Vec<PlaneModel>)> {
    params.validate()?;
    if cloud.is_empty() {
        return Ok((PointCloud::new(), Vec::new()));
    }
    let cells = grid_cells(cloud, params.tile_size);
    let pts = cloud.points();
    let bounds = cloud.xy_bounds().expect("non-empty cloud");
    let reach = (params.tile_padding / params.tile_size).ceil() as usize;
    let mut kept = Vec::new();
    let mut planes = Vec::with_capacity(cells.len());
    for (&(ix, iy), members) in &cells {
        let x0 = bounds.min_x + ix as f64 * params.tile_size - params.tile_padding;
        let y0 = bounds.min_y + iy as f64 * params.tile_size - params.tile_padding;
        let x1 = bounds.min_x + (ix + 1) as f64 * params.tile_size + params.tile_padding;
        let y1 = bounds.min_y + (iy + 1) as f64 * params.tile_size + params.tile_padding;
        let mut support = Vec::new();
        for jx in ix.saturating_sub(reach)..=ix + reach {
            for jy in iy.saturating_sub(reach)..=iy + reach {
                if let Some(m) = cells.get(&(jx, jy)) {
                    support.extend(
                        m.iter()
                            .map(|&i| pts[i])
                            .filter(|p| p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1),
                    );
                }
            }
        }
        let tile_seed = derive(derive(seed, ix as u64), iy as u64);
        let plane = match ransac_plane(&PointCloud::from_points_unchecked(support), params.iterations, params.inlier_dist, tile_seed) {
            Ok(p) => p,
            Err(_) => continue,
        };
        kept.extend(
            members
                .iter()
                .map(|&i| pts[i])
                .filter(|p| plane.distance(p) > params.clearance),
        );
        planes.push(plane);
    }
    Ok((PointCloud::from_points_unchecked(kept), planes))
}
