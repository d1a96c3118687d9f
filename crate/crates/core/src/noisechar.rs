//! Sensor-noise characterization from a near-planar patch: plane fit,
//! point-to-plane residuals, Z-score trimming and D'Agostino's skewness test.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detect::{ransac_plane, PlaneModel};
use crate::error::{Error, Result};
use crate::types::PointCloud;

/// Smallest sample the skewness approximation is valid for.
pub const MIN_SKEW_SAMPLES: usize = 20;

/// Signed distance of every point to `plane`, positive above.
pub fn point_to_plane(cloud: &PointCloud, plane: &PlaneModel) -> Vec<f64> {
    cloud.iter().map(|p| plane.distance(p)).collect()
}

/// Mean and sample standard deviation (`n - 1`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Drops values whose Z-score exceeds `k` in magnitude, in a single pass with
/// the untrimmed mean and standard deviation. Zero spread keeps everything.
pub fn zscore_trim(values: &[f64], k: f64) -> Result<(Vec<f64>, usize)> {
    if values.len() < 2 {
        return Err(Error::InvalidInput("Z-score trimming needs at least 2 values".into()));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidInput(format!("trim cutoff must be positive, got {k}")));
    }
    let (mean, std) = mean_std(values);
    if std == 0.0 {
        return Ok((values.to_vec(), 0));
    }
    let kept: Vec<f64> = values.iter().copied().filter(|v| (v - mean).abs() / std <= k).collect();
    let removed = values.len() - kept.len();
    Ok((kept, removed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewTest {
    /// Sample skewness `g1 = m3 / m2^1.5` (biased moments).
    pub skewness: f64,
    /// Approximately standard-normal transform of `g1`.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

impl SkewTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// D'Agostino's test of zero skewness.
pub fn skewness_test(values: &[f64]) -> Result<SkewTest> {
    let n = values.len();
    if n < MIN_SKEW_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "skewness test needs at least {MIN_SKEW_SAMPLES} values, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= nf;
    m3 /= nf;
    // a constant sample has no asymmetry
    let g1 = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };

    let y = g1 * ((nf + 1.0) * (nf + 3.0) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let z = delta * (y / alpha).asinh();
    let p = libm::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(SkewTest {
        skewness: g1,
        statistic: z,
        p_value: p,
    })
}

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Cap on the bin count for heavy-tailed inputs.
pub const MAX_BINS: usize = 10_000;

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Histogram {
    /// Bin width `2 IQR n^(-1/3)` (Freedman-Diaconis). A zero width or zero
    /// range gives a single bin.
    pub fn freedman_diaconis(values: &[f64]) -> Histogram {
        if values.is_empty() {
            return Histogram {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
        let bins = if width > 0.0 && hi > lo {
            (((hi - lo) / width).ceil() as usize).clamp(1, MAX_BINS)
        } else {
            1
        };
        let step = if hi > lo { (hi - lo) / bins as f64 } else { 0.0 };
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + step * i as f64).collect();
        edges.push(hi);
        let mut counts = vec![0usize; bins];
        for v in &sorted {
            let i = if step > 0.0 { ((v - lo) / step) as usize } else { 0 };
            counts[i.min(bins - 1)] += 1;
        }
        Histogram { edges, counts }
    }

    /// `bin_left,bin_right,count` rows under a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", self.edges[i], self.edges[i + 1], c);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub ransac_iterations: usize,
    pub inlier_dist: f64,
    pub trim_k: f64,
    /// Significance level of the skewness test.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            ransac_iterations: 500,
            inlier_dist: 0.05,
            trim_k: 2.0,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ransac_iterations == 0 || !(self.inlier_dist > 0.0) || !(self.trim_k > 0.0) {
            return Err(Error::Config(
                "noise ransac_iterations, inlier_dist and trim_k must be positive".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("noise alpha must be in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    pub skewness: f64,
    pub skew_statistic: f64,
    pub skew_p_value: f64,
    pub skew_passes: bool,
    pub trimmed: bool,
    /// Cutoff used, present for the trimmed sample.
    pub trim_k: Option<f64>,
    pub removed: usize,
}

impl NoiseStats {
    fn of(values: &[f64], alpha: f64, trim: Option<(f64, usize)>) -> Result<NoiseStats> {
        let (mu, sigma) = mean_std(values);
        let test = skewness_test(values)?;
        Ok(NoiseStats {
            n: values.len(),
            mu,
            sigma,
            skewness: test.skewness,
            skew_statistic: test.statistic,
            skew_p_value: test.p_value,
            skew_passes: test.passes(alpha),
            trimmed: trim.is_some(),
            trim_k: trim.map(|(k, _)| k),
            removed: trim.map_or(0, |(_, r)| r),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    /// `(nx, ny, nz, offset)` of the fitted plane.
    pub plane: [f64; 4],
    pub raw: NoiseStats,
    pub trimmed: NoiseStats,
    pub raw_histogram: Histogram,
    pub trimmed_histogram: Histogram,
}

/// Plane fit, residuals and statistics before and after trimming.
pub fn characterize(cloud: &PointCloud, config: &NoiseConfig) -> Result<NoiseReport> {
    config.validate()?;
    let plane = ransac_plane(cloud, config.ransac_iterations, config.inlier_dist, config.seed)?;
    let residuals = point_to_plane(cloud, &plane);
    let raw = NoiseStats::of(&residuals, config.alpha, None)?;
    let (kept, removed) = zscore_trim(&residuals, config.trim_k)?;
    let trimmed = NoiseStats::of(&kept, config.alpha, Some((config.trim_k, removed)))?;
    Ok(NoiseReport {
        plane: [plane.normal.x, plane.normal.y, plane.normal.z, plane.offset],
        raw,
        trimmed,
        raw_histogram: Histogram::freedman_diaconis(&residuals),
        trimmed_histogram: Histogram::freedman_diaconis(&kept),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Point3, Vec3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    fn normal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn distances_are_signed() {
        let plane = PlaneModel {
            normal: Vec3::new(0.0, 0.6, 0.8),
            offset: -1.0,
            inlier_count: 0,
        };
        let on = Point3::new(3.0, 0.0, 1.25);
        let c = PointCloud::from_points(vec![on, on + 0.5 * plane.normal, on - 0.25 * plane.normal]).unwrap();
        let d = point_to_plane(&c, &plane);
        assert!(d[0].abs() < 1e-12 && (d[1] - 0.5).abs() < 1e-12 && (d[2] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_outlier_is_trimmed() {
        // mean 1, std sqrt(10000 * 0.99 / 99) ~ 10: the outlier sits at z ~ 9.9
        let mut v = vec![0.0; 99];
        v.push(100.0);
        let (kept, removed) = zscore_trim(&v, 2.0).unwrap();
        assert_eq!(removed, 1);
        assert!(kept.iter().all(|&x| x == 0.0));
        assert_eq!(zscore_trim(&[3.0; 10], 2.0).unwrap(), (vec![3.0; 10], 0));
        assert!(zscore_trim(&[1.0], 2.0).is_err());
        assert!(zscore_trim(&v, 0.0).is_err());
    }

    #[test]
    fn gaussian_trim_fraction() {
        let v = normal(100_000, 1);
        let (_, removed) = zscore_trim(&v, 2.0).unwrap();
        let frac = removed as f64 / v.len() as f64;
        assert!((frac - 0.0455).abs() < 0.005, "{frac}");
    }

    #[test]
    fn symmetric_fixture_has_zero_statistic() {
        let v: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let t = skewness_test(&v).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn matches_reference_implementation() {
        // values from scipy.stats.skewtest on the same sample
        let v: Vec<f64> = (0..25).map(|i| 1.0 / (i + 1) as f64).collect();
        let t = skewness_test(&v).unwrap();
        assert!((t.statistic - 4.893334095064258).abs() < 1e-10);
        assert!((t.p_value - 9.91418926619754e-07).abs() < 1e-15);
    }

    #[test]
    fn exponential_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<f64> = (0..10_000).map(|_| Exp1.sample(&mut rng)).collect();
        assert!(skewness_test(&v).unwrap().p_value < 0.001);
    }

    #[test]
    fn too_few_values() {
        assert!(skewness_test(&[0.0; 19]).is_err());
        assert!(skewness_test(&normal(20, 0)).is_ok());
    }

    #[test]
    fn negation_negates_statistic() {
        let v: Vec<f64> = normal(500, 3).iter().map(|x| x + 0.3 * x * x).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let (a, b) = (skewness_test(&v).unwrap(), skewness_test(&neg).unwrap());
        assert_eq!(a.statistic, -b.statistic);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn histogram_counts_everything() {
        let v = normal(1000, 4);
        let h = Histogram::freedman_diaconis(&v);
        assert_eq!(h.counts.iter().sum::<usize>(), 1000);
        assert_eq!(h.edges.len(), h.counts.len() + 1);
        assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
        let csv = h.to_csv();
        assert!(csv.starts_with("bin_left,bin_right,count\n"));
        assert_eq!(csv.lines().count(), h.counts.len() + 1);
        let flat = Histogram::freedman_diaconis(&[2.0; 5]);
        assert_eq!(flat.counts, vec![5]);
    }

    fn noisy_plane(n: usize, sigma: f64, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                Point3::new((i % 100) as f64 * 0.1, (i / 100) as f64 * 0.1, 2.0 + sigma * e)
            })
            .collect()
    }

    #[test]
    fn noiseless_plane_has_zero_spread() {
        let r = characterize(&noisy_plane(2000, 0.0, 0), &NoiseConfig::default()).unwrap();
        assert!(r.raw.mu.abs() < 1e-12 && r.raw.sigma < 1e-12);
        assert_eq!(r.trimmed.removed, 0);
    }

    #[test]
    fn recovers_sigma_and_trims() {
        let r = characterize(&noisy_plane(20_000, 0.01, 5), &NoiseConfig::default()).unwrap();
        assert!((r.raw.sigma - 0.01).abs() < 0.0005, "{}", r.raw.sigma);
        assert!(r.raw.mu.abs() < 0.0005);
        assert!(r.trimmed.sigma < r.raw.sigma && r.trimmed.sigma > 0.008);
        assert!(r.trimmed.trimmed && !r.raw.trimmed);
        assert_eq!(r.trimmed.n + r.trimmed.removed, r.raw.n);
    }

    #[test]
    fn one_sided_outliers_fail_raw_but_not_trimmed() {
        let mut pts = noisy_plane(10_000, 0.01, 6).into_points();
        for p in pts.iter_mut().step_by(100) {
            p.z += 0.3;
        }
        let r = characterize(&PointCloud::from_points(pts).unwrap(), &NoiseConfig::default()).unwrap();
        assert!(!r.raw.skew_passes);
        assert_eq!(r.trimmed.removed, 100);
        assert!(r.trimmed.skew_passes, "p = {}", r.trimmed.skew_p_value);
    }
}
