//! Template matching of segments and duplicate suppression.

use serde::{Deserialize, Serialize};

use super::icp::{IcpParams, Target};
use super::kdtree::KdTree;
use super::segment::Segment;
use crate::cloud::centroid;
use crate::templates::{Template, TemplateLibrary};
use crate::types::{normalize_yaw, Detection, ObjectClass, PerClass, Point3, RigidTransform};

/// A gated registration of one template onto one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub class: ObjectClass,
    /// Template frame to scene frame.
    pub pose: RigidTransform,
    pub rmse: f64,
    pub inlier_fraction: f64,
    /// Share of the surrounding points that the posed template explains.
    pub coverage: f64,
    pub segment_origin: (f64, f64),
    /// Object center in the scene.
    pub center: Point3,
    pub yaw: f64,
}

impl Hypothesis {
    pub fn to_detection(&self) -> Detection {
        Detection {
            class: self.class,
            center: [self.center.x, self.center.y, self.center.z],
            yaw: self.yaw,
            score: Detection::score_from_rmse(self.rmse),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchParams {
    pub icp: IcpParams,
    /// Registrations explaining fewer template points than this are rejected.
    pub min_inlier_fraction: f64,
    /// A point counts as explained when a posed template point lies this close.
    pub coverage_dist: f64,
    /// Minimum share of points inside the template's bounding sphere that
    /// must be explained. Rejects small templates fitted to parts of larger
    /// objects.
    pub min_coverage: PerClass<f64>,
    /// ICP starts per template, spread evenly in yaw about the segment
    /// centroid. Classes with one template per object need several, since a
    /// single start can settle with the samples interleaved.
    pub yaw_starts: PerClass<usize>,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            icp: IcpParams::default(),
            min_inlier_fraction: 0.5,
            coverage_dist: 0.2,
            min_coverage: PerClass {
                reef_ring: 0.45,
                reef_cone: 0.7,
                tetrapod_b: 0.6,
                tetrapod_s: 0.7,
            },
            yaw_starts: PerClass {
                reef_ring: 1,
                reef_cone: 8,
                tetrapod_b: 1,
                tetrapod_s: 1,
            },
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> crate::Result<()> {
        self.icp.validate()?;
        if !(self.min_inlier_fraction > 0.0 && self.min_inlier_fraction <= 1.0) {
            return Err(crate::Error::Config("min_inlier_fraction must be in (0, 1]".into()));
        }
        if !(self.coverage_dist > 0.0) || self.min_coverage.iter().any(|(_, c)| !(0.0..=1.0).contains(c)) {
            return Err(crate::Error::Config(
                "coverage_dist must be positive and min_coverage in [0, 1]".into(),
            ));
        }
        if self.yaw_starts.iter().any(|(_, &n)| n == 0) {
            return Err(crate::Error::Config("yaw_starts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Registers `template` onto an indexed segment from centroid-aligned starts
/// at `yaw_starts` evenly spaced yaws. Registrations passing the inlier gate
/// are preferred, then lower RMSE; the first start wins ties.
pub fn register_template(
    template: &Template,
    target: &Target<'_>,
    segment_centroid: &Point3,
    params: &MatchParams,
) -> Option<(RigidTransform, f64, f64)> {
    let starts = *params.yaw_starts.get(template.class);
    let mut best: Option<(RigidTransform, f64, f64)> = None;
    for k in 0..starts {
        let yaw = std::f64::consts::TAU * k as f64 / starts as f64;
        let initial = RigidTransform::from_translation(segment_centroid.coords).compose(&RigidTransform::from_yaw(yaw));
        let Some(r) = target.register(template.cloud.points(), &initial, &params.icp) else {
            continue;
        };
        let gated = |f: f64| f >= params.min_inlier_fraction;
        let better = match &best {
            None => true,
            Some((_, rmse, f)) => (gated(r.inlier_fraction), -r.rmse) > (gated(*f), -rmse),
        };
        if better {
            best = Some((r.transform, r.rmse, r.inlier_fraction));
        }
    }
    best
}

/// Tries every template and keeps the lowest-RMSE registration that passes
/// its template's RMSE threshold and the inlier-fraction gate.
/// Coverage is measured against the segment itself.
pub fn match_segment(segment: &Segment, library: &TemplateLibrary, params: &MatchParams) -> Option<Hypothesis> {
    if segment.cloud.len() < 3 {
        return None;
    }
    let target = Target::new(segment.cloud.points());
    match_templates(segment, &target, library.templates().iter(), params, &target)
}

/// Share of `context` points within the posed template's bounding sphere
/// that lie within `dist` of a posed template point.
pub fn coverage(template: &Template, pose: &RigidTransform, context: &Target<'_>, dist: f64) -> f64 {
    let offset = Point3::from(template.center_offset);
    let radius = template
        .cloud
        .iter()
        .map(|p| (p - offset).norm())
        .fold(0.0, f64::max);
    let posed: Vec<Point3> = template.cloud.iter().map(|p| pose.apply(p)).collect();
    let near = context.tree().within(&pose.apply(&offset), radius + dist);
    if near.is_empty() {
        return 1.0;
    }
    let tree = KdTree::new(&posed);
    let explained = near
        .iter()
        .filter(|&&i| tree.nearest(&context.points()[i], dist).is_some())
        .count();
    explained as f64 / near.len() as f64
}

pub(crate) fn match_templates<'t>(
    segment: &Segment,
    target: &Target<'_>,
    templates: impl Iterator<Item = &'t Template>,
    params: &MatchParams,
    context: &Target<'_>,
) -> Option<Hypothesis> {
    if segment.cloud.len() < 3 {
        return None;
    }
    let c = centroid(&segment.cloud).ok()?;
    let mut best: Option<Hypothesis> = None;
    for t in templates {
        let Some((pose, rmse, inlier_fraction)) = register_template(t, target, &c, params) else {
            continue;
        };
        debug_assert!(pose.is_rigid(1e-9));
        if rmse > t.rmse_threshold || inlier_fraction < params.min_inlier_fraction {
            continue;
        }
        if best.as_ref().is_some_and(|b| b.rmse <= rmse) {
            continue;
        }
        let coverage = coverage(t, &pose, context, params.coverage_dist);
        if coverage < *params.min_coverage.get(t.class) {
            continue;
        }
        best = Some(Hypothesis {
            class: t.class,
            pose,
            rmse,
            inlier_fraction,
            coverage,
            segment_origin: segment.origin,
            center: pose.apply(&Point3::from(t.center_offset)),
            yaw: normalize_yaw(t.source_yaw + pose.yaw()),
        });
    }
    best
}

fn horizontal_distance(a: &Point3, b: &Point3) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Greedy suppression in order of increasing RMSE.
///
/// A hypothesis is dropped when its center lies horizontally within
/// `max(radius of its class, radius of the accepted class)` of an accepted
/// one. Ties in RMSE are broken by class, then x, then y.
pub fn nms_dedupe(hypotheses: &[Hypothesis], radius: &PerClass<f64>) -> Vec<Detection> {
    let mut order: Vec<&Hypothesis> = hypotheses.iter().collect();
    order.sort_by(|a, b| {
        a.rmse
            .total_cmp(&b.rmse)
            .then(a.class.cmp(&b.class))
            .then(a.center.x.total_cmp(&b.center.x))
            .then(a.center.y.total_cmp(&b.center.y))
    });
    let mut accepted: Vec<&Hypothesis> = Vec::new();
    for h in order {
        let clear = accepted.iter().all(|a| {
            let r = radius.get(a.class).max(*radius.get(h.class));
            horizontal_distance(&a.center, &h.center) > r
        });
        if clear {
            accepted.push(h);
        }
    }
    accepted.into_iter().map(Hypothesis::to_detection).collect()
}
