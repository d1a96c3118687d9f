//! Center-distance matching, precision-recall curves, AP and mAP.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_annotations, load_detections};
use crate::types::{Detection, ObjectAnnotation, ObjectClass, PerClass};

/// Number of recall levels in the interpolated AP.
pub const RECALL_LEVELS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// Distance between centers in the x-y plane.
    Horizontal,
    /// Full 3D center distance.
    Euclidean,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
        match self {
            DistanceMetric::Horizontal => dx.hypot(dy),
            DistanceMetric::Euclidean => (dx * dx + dy * dy + (a[2] - b[2]).powi(2)).sqrt(),
        }
    }
}

/// One class's detections in sweep order with their match outcome.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ClassMatches {
    /// `(score, matched ground-truth index)` by descending score.
    pub detections: Vec<(f64, Option<usize>)>,
    pub ground_truths: usize,
}

impl ClassMatches {
    pub fn true_positives(&self) -> usize {
        self.detections.iter().filter(|(_, m)| m.is_some()).count()
    }

    pub fn missed(&self) -> usize {
        self.ground_truths - self.true_positives()
    }

    /// Appends another scene's matches; ground-truth indices lose meaning.
    pub fn pool(&mut self, other: &ClassMatches) {
        self.detections.extend(other.detections.iter().copied());
        self.ground_truths += other.ground_truths;
    }

    /// Re-establishes descending score order after pooling. The sort is stable,
    /// so equal scores keep their pooling order.
    pub fn sort(&mut self) {
        self.detections.sort_by(|a, b| b.0.total_cmp(&a.0));
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchSet {
    pub classes: PerClass<ClassMatches>,
}

/// Sweep order: descending score, then center lexicographically.
fn sweep_order(detections: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&detections[a], &detections[b]);
        db.score
            .total_cmp(&da.score)
            .then(da.center[0].total_cmp(&db.center[0]))
            .then(da.center[1].total_cmp(&db.center[1]))
            .then(da.center[2].total_cmp(&db.center[2]))
            .then(da.yaw.total_cmp(&db.yaw))
    });
    order
}

/// Greedy matching: in sweep order each detection takes the nearest unmatched
/// ground truth of its class within `threshold` (ties to the lower index).
pub fn match_detections(
    detections: &[Detection],
    annotations: &[ObjectAnnotation],
    threshold: f64,
    metric: DistanceMetric,
) -> MatchSet {
    let mut set = MatchSet::default();
    for a in annotations {
        set.classes.get_mut(a.class).ground_truths += 1;
    }
    let mut taken = vec![false; annotations.len()];
    for i in sweep_order(detections) {
        let d = &detections[i];
        let mut best: Option<(usize, f64)> = None;
        for (j, a) in annotations.iter().enumerate() {
            if taken[j] || a.class != d.class {
                continue;
            }
            let dist = metric.distance(&d.center, &a.center);
            if dist <= threshold && best.is_none_or(|(_, b)| dist < b) {
                best = Some((j, dist));
            }
        }
        if let Some((j, _)) = best {
            taken[j] = true;
        }
        set.classes
            .get_mut(d.class)
            .detections
            .push((d.score, best.map(|(j, _)| j)));
    }
    set
}

/// Cumulative counts after each detection of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub class: ObjectClass,
    pub threshold: f64,
    pub ground_truths: usize,
    /// `(true positives, false positives)` after each detection.
    pub counts: Vec<(usize, usize)>,
}

impl PrCurve {
    /// `(recall, precision)` pairs; empty when the class has no ground truth.
    pub fn points(&self) -> Vec<(f64, f64)> {
        if self.ground_truths == 0 {
            return Vec::new();
        }
        self.counts
            .iter()
            .map(|&(tp, fp)| (tp as f64 / self.ground_truths as f64, tp as f64 / (tp + fp) as f64))
            .collect()
    }
}

pub fn pr_curve(matches: &ClassMatches, class: ObjectClass, threshold: f64) -> PrCurve {
    let mut tp = 0;
    let mut fp = 0;
    let counts = matches
        .detections
        .iter()
        .map(|(_, m)| {
            if m.is_some() {
                tp += 1;
            } else {
                fp += 1;
            }
            (tp, fp)
        })
        .collect();
    PrCurve {
        class,
        threshold,
        ground_truths: matches.ground_truths,
        counts,
    }
}

/// 101-point interpolated AP: the mean over recall levels 0, 0.01, ..., 1 of
/// the best precision achieved at that recall or higher. `None` for a class
/// without ground truth.
pub fn average_precision(pr: &PrCurve) -> Option<f64> {
    let g = pr.ground_truths;
    if g == 0 {
        return None;
    }
    // best precision at or beyond each sweep position, as exact fractions
    let mut envelope: Vec<(usize, (usize, usize))> = Vec::with_capacity(pr.counts.len());
    let mut best: Option<(usize, usize)> = None;
    for &(tp, fp) in pr.counts.iter().rev() {
        let p = (tp, tp + fp);
        if best.is_none_or(|b| p.0 * b.1 > b.0 * p.1) {
            best = Some(p);
        }
        envelope.push((tp, best.unwrap()));
    }
    envelope.reverse();
    let mut sum = 0.0;
    let mut k = 0;
    for level in 0..RECALL_LEVELS {
        // recall tp/g reaches level/100 when 100 tp >= level g
        while k < envelope.len() && 100 * envelope[k].0 < level * g {
            k += 1;
        }
        if k < envelope.len() {
            let (num, den) = envelope[k].1;
            sum += num as f64 / den as f64;
        }
    }
    Some(sum / RECALL_LEVELS as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Matching thresholds in meters, each reported on its own.
    pub thresholds: Vec<f64>,
    pub distance: DistanceMetric,
    /// Minimum acceptable mAP at the first threshold.
    pub map_gate: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            thresholds: vec![0.5],
            distance: DistanceMetric::Horizontal,
            map_gate: None,
        }
    }
}

impl EvalConfig {
    /// The four nuScenes-style thresholds.
    pub fn multi_threshold() -> Self {
        EvalConfig {
            thresholds: vec![0.5, 1.0, 2.0, 4.0],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config("evaluation thresholds must be positive and non-empty".into()));
        }
        if let Some(g) = self.map_gate {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::Config("map_gate must be in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    /// `None` for classes without ground truth; those are left out of the mean.
    pub ap: PerClass<Option<f64>>,
    pub map: Option<f64>,
    pub true_positives: PerClass<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub distance: DistanceMetric,
    pub scenes: usize,
    pub predictions: usize,
    pub predictions_per_class: PerClass<usize>,
    pub ground_truths: PerClass<usize>,
    pub results: Vec<ThresholdResult>,
    /// Per-class AP and mAP averaged over all thresholds, present only when
    /// more than one threshold was evaluated.
    pub threshold_mean: Option<ThresholdMean>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMean {
    pub ap: PerClass<Option<f64>>,
    pub map: Option<f64>,
}

impl EvalReport {
    /// mAP at the first (primary) threshold.
    pub fn primary_map(&self) -> Option<f64> {
        self.results.first().and_then(|r| r.map)
    }

    /// Human-readable table: one row per threshold.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<12} {:>6} {:>12}", "Threshold", "mAP", "Predictions");
        for c in ObjectClass::ALL {
            let _ = write!(s, " {:>10}", c.title());
        }
        s.push('\n');
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        type Row<'a> = (String, Option<f64>, &'a PerClass<Option<f64>>);
        let mut rows: Vec<Row> = self
            .results
            .iter()
            .map(|r| (format!("{} m", r.threshold), r.map, &r.ap))
            .collect();
        if let Some(m) = &self.threshold_mean {
            rows.push(("mean".to_string(), m.map, &m.ap));
        }
        for (label, map, ap) in rows {
            let _ = write!(s, "{:<12} {:>6} {:>12}", label, fmt(map), self.predictions);
            for c in ObjectClass::ALL {
                let _ = write!(s, " {:>10}", fmt(*ap.get(c)));
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "{} scenes, {} ground-truth objects, {} distance",
            self.scenes,
            self.ground_truths.iter().map(|(_, n)| n).sum::<usize>(),
            match self.distance {
                DistanceMetric::Horizontal => "horizontal",
                DistanceMetric::Euclidean => "3D",
            }
        );
        s
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Scores a set of scenes, each given as `(detections, annotations)`.
pub fn evaluate_scenes(scenes: &[(Vec<Detection>, Vec<ObjectAnnotation>)], config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let mut results = Vec::with_capacity(config.thresholds.len());
    for &threshold in &config.thresholds {
        let mut pooled: PerClass<ClassMatches> = PerClass::default();
        for (dets, gts) in scenes {
            let m = match_detections(dets, gts, threshold, config.distance);
            for c in ObjectClass::ALL {
                pooled.get_mut(c).pool(m.classes.get(c));
            }
        }
        let mut ap = PerClass::splat(None);
        let mut true_positives = PerClass::splat(0);
        for c in ObjectClass::ALL {
            let m = pooled.get_mut(c);
            m.sort();
            *ap.get_mut(c) = average_precision(&pr_curve(m, c, threshold));
            *true_positives.get_mut(c) = m.true_positives();
        }
        results.push(ThresholdResult {
            threshold,
            map: mean_defined(ap.iter().map(|(_, v)| *v)),
            ap,
            true_positives,
        });
    }
    let threshold_mean = (results.len() > 1).then(|| {
        let ap = PerClass::from_fn(|c| mean_defined(results.iter().map(|r| *r.ap.get(c))));
        ThresholdMean {
            map: mean_defined(ap.iter().map(|(_, v)| *v)),
            ap,
        }
    });
    let mut predictions_per_class = PerClass::splat(0);
    let mut ground_truths = PerClass::splat(0);
    for (dets, gts) in scenes {
        dets.iter().for_each(|d| *predictions_per_class.get_mut(d.class) += 1);
        gts.iter().for_each(|a| *ground_truths.get_mut(a.class) += 1);
    }
    Ok(EvalReport {
        distance: config.distance,
        scenes: scenes.len(),
        predictions: scenes.iter().map(|(d, _)| d.len()).sum(),
        predictions_per_class,
        ground_truths,
        results,
        threshold_mean,
    })
}

const RESERVED: [&str; 4] = ["manifest", "run_manifest", "eval_report", "library"];

/// Scene files of a directory: `*.json` whose stem has no further dot and is
/// not one of the reserved metadata names. Sorted by stem.
pub fn scene_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.contains('.') || RESERVED.contains(&stem) {
            continue;
        }
        out.push((stem.to_string(), path));
    }
    out.sort();
    Ok(out)
}

/// Pairs prediction and ground-truth files by name and evaluates them.
pub fn evaluate_dataset(pred_dir: impl AsRef<Path>, gt_dir: impl AsRef<Path>, config: &EvalConfig) -> Result<EvalReport> {
    let preds = scene_files(pred_dir.as_ref())?;
    let gts = scene_files(gt_dir.as_ref())?;
    let p: BTreeSet<&str> = preds.iter().map(|(s, _)| s.as_str()).collect();
    let g: BTreeSet<&str> = gts.iter().map(|(s, _)| s.as_str()).collect();
    let only_pred: Vec<&str> = p.difference(&g).copied().collect();
    let only_gt: Vec<&str> = g.difference(&p).copied().collect();
    if !only_pred.is_empty() || !only_gt.is_empty() {
        return Err(Error::Data(format!(
            "scene sets differ; only in predictions: [{}]; only in ground truth: [{}]",
            only_pred.join(", "),
            only_gt.join(", ")
        )));
    }
    let mut scenes = Vec::with_capacity(preds.len());
    for ((_, pp), (_, gp)) in preds.iter().zip(&gts) {
        scenes.push((load_detections(pp)?, load_annotations(gp)?));
    }
    evaluate_scenes(&scenes, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Point3;

    fn gt(class: ObjectClass, x: f64, y: f64) -> ObjectAnnotation {
        ObjectAnnotation::new(class, Point3::new(x, y, 0.0), 0.0)
    }

    fn det(class: ObjectClass, x: f64, y: f64, score: f64) -> Detection {
        Detection {
            class,
            center: [x, y, 0.0],
            yaw: 0.0,
            score,
        }
    }

    const TB: ObjectClass = ObjectClass::TetrapodB;

    #[test]
    fn detection_on_center_is_true_positive() {
        let m = match_detections(&[det(TB, 1.0, 1.0, 0.9)], &[gt(TB, 1.0, 1.0)], 0.5, DistanceMetric::Horizontal);
        assert_eq!(m.classes.tetrapod_b.true_positives(), 1);
    }

    #[test]
    fn too_far_is_false_positive_and_miss() {
        let m = match_detections(&[det(TB, 0.6, 0.0, 0.9)], &[gt(TB, 0.0, 0.0)], 0.5, DistanceMetric::Horizontal);
        let c = &m.classes.tetrapod_b;
        assert_eq!(c.true_positives(), 0);
        assert_eq!(c.detections.len(), 1);
        assert_eq!(c.missed(), 1);
    }

    #[test]
    fn higher_score_claims_the_object() {
        let m = match_detections(
            &[det(TB, 0.3, 0.0, 0.8), det(TB, 0.1, 0.0, 0.9)],
            &[gt(TB, 0.0, 0.0)],
            0.5,
            DistanceMetric::Horizontal,
        );
        assert_eq!(m.classes.tetrapod_b.detections, vec![(0.9, Some(0)), (0.8, None)]);
    }

    #[test]
    fn class_must_agree() {
        let m = match_detections(&[det(ObjectClass::ReefRing, 0.0, 0.0, 0.9)], &[gt(TB, 0.0, 0.0)], 0.5, DistanceMetric::Horizontal);
        assert_eq!(m.classes.reef_ring.true_positives(), 0);
        assert_eq!(m.classes.tetrapod_b.missed(), 1);
    }

    #[test]
    fn vertical_offset_only_matters_in_3d() {
        let d = Detection {
            center: [0.0, 0.0, 0.8],
            ..det(TB, 0.0, 0.0, 0.9)
        };
        let g = [gt(TB, 0.0, 0.0)];
        assert_eq!(match_detections(&[d], &g, 0.5, DistanceMetric::Horizontal).classes.tetrapod_b.true_positives(), 1);
        assert_eq!(match_detections(&[d], &g, 0.5, DistanceMetric::Euclidean).classes.tetrapod_b.true_positives(), 0);
    }

    fn ap_of(outcomes: &[bool], gts: usize) -> Option<f64> {
        let m = ClassMatches {
            detections: outcomes.iter().enumerate().map(|(i, &t)| (1.0 - i as f64 * 0.01, t.then_some(i))).collect(),
            ground_truths: gts,
        };
        average_precision(&pr_curve(&m, TB, 0.5))
    }

    #[test]
    fn perfect_and_empty() {
        assert_eq!(ap_of(&[true, true, true], 3), Some(1.0));
        assert_eq!(ap_of(&[], 3), Some(0.0));
        assert_eq!(ap_of(&[], 0), None);
    }

    #[test]
    fn tp_fp_tp_sweep() {
        // recall levels 0..=0.5 see precision 1, levels 0.51..=1 see 2/3
        let expect = (51.0 + 50.0 * 2.0 / 3.0) / 101.0;
        let ap = ap_of(&[true, false, true], 2).unwrap();
        assert!((ap - expect).abs() < 1e-15);
        // close to the area under the envelope
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 0.01);
    }

    #[test]
    fn report_perfect_and_empty() {
        let gts = vec![gt(TB, 0.0, 0.0), gt(ObjectClass::ReefCone, 5.0, 5.0)];
        let perfect: Vec<Detection> = gts.iter().map(|a| Detection::from(*a)).collect();
        let r = evaluate_scenes(&[(perfect, gts.clone())], &EvalConfig::default()).unwrap();
        assert_eq!(r.primary_map(), Some(1.0));
        assert_eq!(r.results[0].ap.reef_ring, None);
        let r = evaluate_scenes(&[(Vec::new(), gts)], &EvalConfig::default()).unwrap();
        assert_eq!(r.primary_map(), Some(0.0));
        assert!(r.table().contains("Tetrapod_B"));
    }

    #[test]
    fn multi_threshold_is_reported_separately() {
        let gts = vec![gt(TB, 0.0, 0.0)];
        let dets = vec![det(TB, 0.7, 0.0, 0.9)];
        let r = evaluate_scenes(&[(dets, gts)], &EvalConfig::multi_threshold()).unwrap();
        let maps: Vec<Option<f64>> = r.results.iter().map(|t| t.map).collect();
        assert_eq!(maps, vec![Some(0.0), Some(1.0), Some(1.0), Some(1.0)]);
        assert_eq!(r.threshold_mean.unwrap().map, Some(0.75));
    }

    #[test]
    fn dataset_directories_must_agree() {
        let (p, g) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        crate::io::save_annotations(&[gt(TB, 0.0, 0.0)], g.path().join("scene_0000.json")).unwrap();
        crate::io::save_annotations(&[], g.path().join("scene_0001.json")).unwrap();
        crate::io::save_detections(&[det(TB, 0.0, 0.0, 0.5)], p.path().join("scene_0000.json")).unwrap();
        std::fs::write(g.path().join("manifest.json"), "{}").unwrap();
        let err = evaluate_dataset(p.path(), g.path(), &EvalConfig::default()).unwrap_err();
        assert!(err.to_string().contains("scene_0001"));
        crate::io::save_detections(&[], p.path().join("scene_0001.json")).unwrap();
        let r = evaluate_dataset(p.path(), g.path(), &EvalConfig::default()).unwrap();
        assert_eq!(r.primary_map(), Some(1.0));
        assert_eq!(r.scenes, 2);
    }
}
