//! The full detector: seabed removal, windows, template matching, suppression.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::icp::Target;
use super::matching::{match_templates, nms_dedupe, Hypothesis, MatchParams};
use super::ransac::{remove_seabed_tiled, PlaneModel, SeabedParams};
use super::segment::{sliding_windows, Segment};
use crate::error::{Error, Result};
use crate::geometry::ShapeParams;
use crate::templates::TemplateLibrary;
use crate::types::{Detection, ObjectClass, PerClass, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Each class scans its own window size against its own templates.
    PerClass,
    /// One window size (the largest) for all templates.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowParams {
    pub mode: WindowMode,
    pub size: PerClass<f64>,
    /// Stride as a fraction of the window size. At 1/3 with windows 1.5x the
    /// footprint, every object lies wholly inside some window.
    pub stride_fraction: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        let shapes = ShapeParams::default();
        WindowParams {
            mode: WindowMode::PerClass,
            size: PerClass::from_fn(|c| 1.5 * shapes.footprint_diameter(c)),
            stride_fraction: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub seabed: SeabedParams,
    pub window: WindowParams,
    #[serde(rename = "match")]
    pub matching: MatchParams,
    pub nms_radius: PerClass<f64>,
    /// Seeds the plane fits.
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let shapes = ShapeParams::default();
        DetectorConfig {
            seabed: SeabedParams::default(),
            window: WindowParams::default(),
            matching: MatchParams::default(),
            nms_radius: PerClass::from_fn(|c| 0.5 * shapes.footprint_diameter(c)),
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.seabed.validate()?;
        self.matching.validate()?;
        if !(self.window.stride_fraction > 0.0 && self.window.stride_fraction <= 1.0) {
            return Err(Error::Config("window stride_fraction must be in (0, 1]".into()));
        }
        if self.window.size.iter().any(|(_, s)| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("window sizes must be positive".into()));
        }
        if self.nms_radius.iter().any(|(_, r)| !(*r > 0.0)) {
            return Err(Error::Config("nms radii must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one detector run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionDebug {
    pub input_points: usize,
    pub object_points: usize,
    /// `(nx, ny, nz, offset)` of each seabed tile plane.
    pub planes: Vec<[f64; 4]>,
    pub segments: usize,
    /// Lowest accepted RMSE per segment, `None` where nothing passed the gates.
    pub segment_rmse: Vec<SegmentResult>,
    pub hypotheses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentResult {
    pub class_window: ObjectClass,
    pub origin: (f64, f64),
    pub points: usize,
    pub best: Option<SegmentMatch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentMatch {
    pub class: ObjectClass,
    pub rmse: f64,
    pub inlier_fraction: f64,
    pub coverage: f64,
    pub center: [f64; 3],
}

fn class_passes(library: &TemplateLibrary, config: &DetectorConfig) -> Vec<(ObjectClass, f64, Vec<ObjectClass>)> {
    let classes = library.classes();
    match config.window.mode {
        WindowMode::PerClass => classes
            .iter()
            .map(|&c| (c, *config.window.size.get(c), vec![c]))
            .collect(),
        WindowMode::Global => {
            let size = classes
                .iter()
                .map(|&c| *config.window.size.get(c))
                .fold(0.0, f64::max);
            vec![(classes[0], size, classes.clone())]
        }
    }
}

fn plane_row(p: &PlaneModel) -> [f64; 4] {
    [p.normal.x, p.normal.y, p.normal.z, p.offset]
}

/// Runs the detector and also returns its diagnostics.
pub fn detect_scene_debug(
    cloud: &PointCloud,
    library: &TemplateLibrary,
    config: &DetectorConfig,
) -> Result<(Vec<Detection>, DetectionDebug)> {
    config.validate()?;
    if library.is_empty() {
        return Err(Error::InvalidInput("template library is empty".into()));
    }
    let (objects, planes) = remove_seabed_tiled(cloud, &config.seabed, config.seed)?;
    let objects = objects.canonical();

    let mut jobs: Vec<(ObjectClass, Segment, Vec<ObjectClass>)> = Vec::new();
    for (window_class, size, classes) in class_passes(library, config) {
        let min_points = library
            .templates()
            .iter()
            .filter(|t| classes.contains(&t.class))
            .map(|t| t.min_points)
            .min()
            .unwrap_or(3);
        let stride = size * config.window.stride_fraction;
        for seg in sliding_windows(&objects, size, stride, min_points)? {
            jobs.push((window_class, seg, classes.clone()));
        }
    }

    let context = Target::new(objects.points());
    let results: Vec<Option<Hypothesis>> = jobs
        .par_iter()
        .map(|(_, seg, classes)| {
            if seg.cloud.len() < 3 {
                return None;
            }
            let target = Target::new(seg.cloud.points());
            let templates = library.templates().iter().filter(|t| classes.contains(&t.class));
            match_templates(seg, &target, templates, &config.matching, &context)
        })
        .collect();

    let segment_rmse = jobs
        .iter()
        .zip(&results)
        .map(|((wc, seg, _), h)| SegmentResult {
            class_window: *wc,
            origin: seg.origin,
            points: seg.cloud.len(),
            best: h.as_ref().map(|h| SegmentMatch {
                class: h.class,
                rmse: h.rmse,
                inlier_fraction: h.inlier_fraction,
                coverage: h.coverage,
                center: h.center.into(),
            }),
        })
        .collect();
    let hypotheses: Vec<Hypothesis> = results.into_iter().flatten().collect();
    let detections = nms_dedupe(&hypotheses, &config.nms_radius);
    let debug = DetectionDebug {
        input_points: cloud.len(),
        object_points: objects.len(),
        planes: planes.iter().map(plane_row).collect(),
        segments: jobs.len(),
        segment_rmse,
        hypotheses: hypotheses.len(),
    };
    Ok((detections, debug))
}

/// Seabed removal, sliding windows, template matching and duplicate suppression.
pub fn detect_scene(cloud: &PointCloud, library: &TemplateLibrary, config: &DetectorConfig) -> Result<Vec<Detection>> {
    detect_scene_debug(cloud, library, config).map(|(d, _)| d)
}
