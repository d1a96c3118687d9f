//! Sliding-window segmentation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{PointCloud, Point3};

/// The points of one square window.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Minimum corner of the window.
    pub origin: (f64, f64),
    pub size: f64,
    pub cloud: PointCloud,
}

impl Segment {
    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.origin.0
            && p.x <= self.origin.0 + self.size
            && p.y >= self.origin.1
            && p.y <= self.origin.1 + self.size
    }
}

fn window_count(extent: f64, window: f64, stride: f64) -> usize {
    if extent <= window {
        1
    } else {
        ((extent - window) / stride).ceil() as usize + 1
    }
}

/// Square windows of side `window_size` stepped by `stride` from the cloud's
/// xy-minimum until they cover its bounds. Windows are closed, so a point on
/// a shared edge belongs to both. Windows with fewer than `min_points` points
/// are dropped; the rest come back in row-major (y, then x) order.
pub fn sliding_windows(cloud: &PointCloud, window_size: f64, stride: f64, min_points: usize) -> Result<Vec<Segment>> {
    if !(stride > 0.0 && window_size >= stride && window_size.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sliding windows need window_size >= stride > 0, got {window_size} and {stride}"
        )));
    }
    let Some(bounds) = cloud.xy_bounds() else {
        return Ok(Vec::new());
    };
    let nx = window_count(bounds.width(), window_size, stride);
    let ny = window_count(bounds.height(), window_size, stride);

    // bucket points by stride cell so each window only scans nearby points
    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.iter().enumerate() {
        let cx = ((p.x - bounds.min_x) / stride).floor() as usize;
        let cy = ((p.y - bounds.min_y) / stride).floor() as usize;
        cells.entry((cx, cy)).or_default().push(i);
    }
    let span = (window_size / stride).ceil() as usize;
    let pts = cloud.points();
    let mut segments = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let origin = (bounds.min_x + i as f64 * stride, bounds.min_y + j as f64 * stride);
            let mut idx: Vec<usize> = Vec::new();
            for cy in j.saturating_sub(1)..=j + span {
                for cx in i.saturating_sub(1)..=i + span {
                    if let Some(m) = cells.get(&(cx, cy)) {
                        idx.extend(m.iter().copied().filter(|&k| {
                            let p = &pts[k];
                            p.x >= origin.0
                                && p.x <= origin.0 + window_size
                                && p.y >= origin.1
                                && p.y <= origin.1 + window_size
                        }));
                    }
                }
            }
            if idx.len() < min_points.max(1) {
                continue;
            }
            idx.sort_unstable();
            segments.push(Segment {
                origin,
                size: window_size,
                cloud: idx.into_iter().map(|k| pts[k]).collect(),
            });
        }
    }
    Ok(segments)
}
