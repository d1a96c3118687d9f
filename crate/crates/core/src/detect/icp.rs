//! Point-to-point iterative closest point registration.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::kdtree::KdTree;
use crate::error::{Error, Result};
use crate::types::{Point3, PointCloud, RigidTransform, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Correspondence cutoff at the first iteration.
    pub correspondence_dist: f64,
    /// Cutoff reached after shrinking; also used for the final score.
    pub final_correspondence_dist: f64,
    /// Per-iteration factor applied to the cutoff until it reaches the final value.
    pub shrink: f64,
    pub convergence_tol: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iterations: 50,
            correspondence_dist: 0.5,
            final_correspondence_dist: 0.1,
            shrink: 0.8,
            convergence_tol: 1e-5,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.correspondence_dist > 0.0
            && self.final_correspondence_dist > 0.0
            && self.final_correspondence_dist <= self.correspondence_dist
            && self.shrink > 0.0
            && self.shrink <= 1.0
            && self.convergence_tol > 0.0;
        if !ok {
            return Err(Error::Config(
                "icp needs positive iterations and tolerances, 0 < final_correspondence_dist <= correspondence_dist and shrink in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn cutoff(&self, iteration: usize) -> f64 {
        (self.correspondence_dist * self.shrink.powi(iteration as i32)).max(self.final_correspondence_dist)
    }
}

/// One iteration's residuals on its fixed correspondences, before and after the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpStep {
    pub cutoff: f64,
    pub pairs: usize,
    pub rmse_before: f64,
    pub rmse_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps source points onto the target.
    pub transform: RigidTransform,
    /// Over the final correspondences within the final cutoff.
    pub rmse: f64,
    /// Final correspondences divided by the number of source points.
    pub inlier_fraction: f64,
    /// Score of the initial pose under the same final cutoff, infinite without pairs.
    pub initial_rmse: f64,
    pub converged: bool,
    pub steps: Vec<IcpStep>,
}

/// Closed-form least-squares rigid motion taking `src[i]` onto `dst[i]`.
///
/// SVD of the cross-covariance, with the sign of the last singular direction
/// flipped when needed so the result is a rotation rather than a reflection.
pub fn best_rigid_transform(src: &[Point3], dst: &[Point3]) -> RigidTransform {
    assert_eq!(src.len(), dst.len());
    let n = src.len() as f64;
    let cs = src.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s.coords - cs) * (d.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v requested");
    let v = v_t.transpose();
    let sign = (v * u.transpose()).determinant().signum();
    let d = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, if sign < 0.0 { -1.0 } else { 1.0 }));
    let r = v * d * u.transpose();
    RigidTransform::new(r, cd - r * cs)
}

fn transform_delta(t: &RigidTransform) -> f64 {
    (t.rotation - Matrix3::identity()).norm() + t.translation.norm()
}

/// Target points indexed once, reusable across many registrations.
pub struct Target<'a> {
    points: &'a [Point3],
    tree: KdTree,
}

impl<'a> Target<'a> {
    pub fn new(points: &'a [Point3]) -> Self {
        Target {
            points,
            tree: KdTree::new(points),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &'a [Point3] {
        self.points
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    /// Pairs each moved source point with its nearest target within `cutoff`.
    fn pairs(&self, moved: &[Point3], cutoff: f64, src: &mut Vec<Point3>, dst: &mut Vec<Point3>) -> f64 {
        src.clear();
        dst.clear();
        let mut sum = 0.0;
        for p in moved {
            if let Some((j, d2)) = self.tree.nearest(p, cutoff) {
                src.push(*p);
                dst.push(self.points[j]);
                sum += d2;
            }
        }
        sum
    }

    /// Root mean square distance from each moved source point to its nearest
    /// target within `cutoff`, and the fraction of source points that found one.
    pub fn score(&self, source: &[Point3], transform: &RigidTransform, cutoff: f64) -> (f64, f64) {
        let mut sum = 0.0;
        let mut n = 0usize;
        for p in source {
            if let Some((_, d2)) = self.tree.nearest(&transform.apply(p), cutoff) {
                sum += d2;
                n += 1;
            }
        }
        if n == 0 {
            (f64::INFINITY, 0.0)
        } else {
            ((sum / n as f64).sqrt(), n as f64 / source.len() as f64)
        }
    }

    /// Registers `source` starting from `initial`. `None` when some iteration
    /// finds no correspondences.
    pub fn register(&self, source: &[Point3], initial: &RigidTransform, params: &IcpParams) -> Option<IcpResult> {
        let mut transform = *initial;
        let (initial_rmse, _) = self.score(source, &transform, params.final_correspondence_dist);
        let mut moved: Vec<Point3> = source.iter().map(|p| transform.apply(p)).collect();
        let mut src = Vec::with_capacity(source.len());
        let mut dst = Vec::with_capacity(source.len());
        let mut steps = Vec::new();
        let mut converged = false;
        for it in 0..params.max_iterations {
            let cutoff = params.cutoff(it);
            let sum = self.pairs(&moved, cutoff, &mut src, &mut dst);
            if src.is_empty() {
                return None;
            }
            let step = best_rigid_transform(&src, &dst);
            let after: f64 = src
                .iter()
                .zip(&dst)
                .map(|(s, d)| (step.apply(s) - d).norm_squared())
                .sum();
            steps.push(IcpStep {
                cutoff,
                pairs: src.len(),
                rmse_before: (sum / src.len() as f64).sqrt(),
                rmse_after: (after / src.len() as f64).sqrt(),
            });
            transform = step.compose(&transform);
            for (m, p) in moved.iter_mut().zip(source) {
                *m = transform.apply(p);
            }
            if transform_delta(&step) < params.convergence_tol && cutoff <= params.final_correspondence_dist {
                converged = true;
                break;
            }
        }
        let sum = self.pairs(&moved, params.final_correspondence_dist, &mut src, &mut dst);
        if src.is_empty() {
            return None;
        }
        Some(IcpResult {
            transform,
            rmse: (sum / src.len() as f64).sqrt(),
            inlier_fraction: src.len() as f64 / source.len() as f64,
            initial_rmse,
            converged,
            steps,
        })
    }
}

/// Registers `source` onto `target` from the identity pose.
///
/// Returns `Ok(None)` when an iteration finds no correspondences.
pub fn icp_register(source: &PointCloud, target: &PointCloud, params: &IcpParams) -> Result<Option<IcpResult>> {
    params.validate()?;
    if source.len() < 3 || target.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "registration needs at least 3 points per cloud, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    let target = Target::new(target.points());
    Ok(target.register(source.points(), &RigidTransform::identity(), params))
}
