//! Virtual multibeam survey by ray casting.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::placement::PlacedObject;
use super::terrain::TerrainField;
use crate::error::{Error, Result};
use crate::geometry::{Hit, ObjectMeshes, Ray, SpatialIndex, TriangleMesh};
use crate::rng::{rng_for, stream};
use crate::types::{Bounds, Point3, PointCloud, Vec3};

pub const MAX_BEAMS: usize = 1024;

/// Survey line orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    /// Lines parallel to the x axis.
    X,
    /// Lines parallel to the y axis.
    Y,
    Both,
    /// One of the above, drawn per scene.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScannerConfig {
    pub beam_count: usize,
    pub swath_half_angle: f64,
    pub sensor_height: f64,
    pub ping_spacing: f64,
    pub line_spacing: f64,
    pub dropout_prob: f64,
    pub noise_sigma: f64,
    pub direction_mode: DirectionMode,
}

impl Default for ScannerConfig {
    fn default() -> Self {
        ScannerConfig {
            beam_count: 256,
            swath_half_angle: 60.0,
            sensor_height: 15.0,
            ping_spacing: 0.2,
            line_spacing: 10.0,
            dropout_prob: 0.02,
            noise_sigma: 0.01,
            direction_mode: DirectionMode::Random,
        }
    }
}

impl ScannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BEAMS).contains(&self.beam_count) {
            return Err(Error::Config(format!(
                "beam_count {} outside [1, {MAX_BEAMS}]",
                self.beam_count
            )));
        }
        if !(self.swath_half_angle >= 0.0 && self.swath_half_angle < 90.0) {
            return Err(Error::Config("swath_half_angle must be in [0, 90) degrees".into()));
        }
        if !(self.sensor_height > 0.0 && self.ping_spacing > 0.0 && self.line_spacing > 0.0) {
            return Err(Error::Config(
                "sensor_height, ping_spacing and line_spacing must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::Config("dropout_prob must be in [0, 1)".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    /// Across-track beam angles in radians, evenly spread over the swath.
    pub fn beam_angles(&self) -> Vec<f64> {
        let half = self.swath_half_angle.to_radians();
        if self.beam_count == 1 {
            return vec![0.0];
        }
        let n = (self.beam_count - 1) as f64;
        (0..self.beam_count)
            .map(|b| -half + 2.0 * half * b as f64 / n)
            .collect()
    }

    /// The concrete line orientations for a scene with this seed.
    pub fn resolve_directions(&self, seed: u64) -> Vec<LineAxis> {
        let mode = match self.direction_mode {
            DirectionMode::Random => {
                match rng_for(seed, &[stream::DIRECTION]).random_range(0..3) {
                    0 => DirectionMode::X,
                    1 => DirectionMode::Y,
                    _ => DirectionMode::Both,
                }
            }
            m => m,
        };
        match mode {
            DirectionMode::X => vec![LineAxis::X],
            DirectionMode::Y => vec![LineAxis::Y],
            _ => vec![LineAxis::X, LineAxis::Y],
        }
    }
}

/// Direction of travel of one family of survey lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineAxis {
    X,
    Y,
}

/// A ping position and the beams cast from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ping {
    pub axis: LineAxis,
    pub line: usize,
    pub index: usize,
    pub origin: Point3,
}

/// Every ping position of a survey over `bounds`, lines first then pings.
pub fn survey_pings(bounds: &Bounds, scanner: &ScannerConfig, axes: &[LineAxis]) -> Vec<Ping> {
    let mut pings = Vec::new();
    for &axis in axes {
        let (along_min, along_len, across_min, across_len) = match axis {
            LineAxis::X => (bounds.min_x, bounds.width(), bounds.min_y, bounds.height()),
            LineAxis::Y => (bounds.min_y, bounds.height(), bounds.min_x, bounds.width()),
        };
        let lines = (across_len / scanner.line_spacing).ceil().max(1.0) as usize;
        let per_line = (along_len / scanner.ping_spacing).ceil().max(1.0) as usize;
        for line in 0..lines {
            let across = across_min + scanner.line_spacing * (line as f64 + 0.5);
            for index in 0..per_line {
                let along = along_min + scanner.ping_spacing * (index as f64 + 0.5);
                let (x, y) = match axis {
                    LineAxis::X => (along, across),
                    LineAxis::Y => (across, along),
                };
                pings.push(Ping {
                    axis,
                    line,
                    index,
                    origin: Point3::new(x, y, scanner.sensor_height),
                });
            }
        }
    }
    pings
}

fn beam_direction(axis: LineAxis, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    match axis {
        LineAxis::X => Vec3::new(0.0, s, -c),
        LineAxis::Y => Vec3::new(s, 0.0, -c),
    }
}

/// One surviving beam: the ray, its exact hit and the noisy measured point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanReturn {
    pub ray: Ray,
    pub hit: Hit,
    pub point: Point3,
}

/// The terrain and every posed object, indexed for ray casting.
pub struct SceneGeometry {
    bounds: Bounds,
    index: SpatialIndex,
}

impl SceneGeometry {
    pub fn new(terrain: &TerrainField, objects: &[PlacedObject], meshes: &ObjectMeshes) -> Self {
        let ground = terrain.to_mesh();
        let posed: Vec<TriangleMesh> = objects.iter().map(|o| o.posed_mesh(meshes)).collect();
        let mut all: Vec<&TriangleMesh> = vec![&ground];
        all.extend(posed.iter());
        SceneGeometry {
            bounds: terrain.bounds(),
            index: SpatialIndex::build(&all),
        }
    }

    /// Geometry from arbitrary meshes; the survey covers `bounds`.
    pub fn from_meshes(bounds: Bounds, meshes: &[&TriangleMesh]) -> Self {
        SceneGeometry {
            bounds,
            index: SpatialIndex::build(meshes),
        }
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }
}

/// Casts every beam of every ping and returns the surviving returns in
/// ping-then-beam order.
///
/// Each ping draws from its own random stream, so the result does not depend
/// on how pings are scheduled across threads. Every beam consumes one dropout
/// draw and one noise draw whether or not it hits anything.
pub fn scan_returns(geometry: &SceneGeometry, scanner: &ScannerConfig, seed: u64) -> Result<Vec<ScanReturn>> {
    scanner.validate()?;
    let axes = scanner.resolve_directions(seed);
    let pings = survey_pings(&geometry.bounds, scanner, &axes);
    scan_returns_at(geometry, scanner, &pings, seed)
}

/// Like [`scan_returns`] but from explicit ping positions.
pub fn scan_returns_at(geometry: &SceneGeometry, scanner: &ScannerConfig, pings: &[Ping], seed: u64) -> Result<Vec<ScanReturn>> {
    scanner.validate()?;
    let angles = scanner.beam_angles();
    let per_ping: Vec<Vec<ScanReturn>> = pings
        .par_iter()
        .map(|ping| {
            let axis_id = match ping.axis {
                LineAxis::X => 0,
                LineAxis::Y => 1,
            };
            let mut rng = rng_for(seed, &[stream::SCAN, axis_id, ping.line as u64, ping.index as u64]);
            let mut out = Vec::new();
            for &angle in &angles {
                let dropped = rng.random::<f64>() < scanner.dropout_prob;
                let z: f64 = rng.sample(StandardNormal);
                if dropped {
                    continue;
                }
                let ray = Ray::new(ping.origin, beam_direction(ping.axis, angle))
                    .expect("beam directions are unit vectors");
                if let Some(hit) = geometry.index.intersect(&ray) {
                    let point = hit.point + ray.direction() * (z * scanner.noise_sigma);
                    out.push(ScanReturn { ray, hit, point });
                }
            }
            out
        })
        .collect();
    Ok(per_ping.into_iter().flatten().collect())
}

/// Scans the scene and returns the measured points.
pub fn simulate_scan(geometry: &SceneGeometry, scanner: &ScannerConfig, seed: u64) -> Result<PointCloud> {
    let returns = scan_returns(geometry, scanner, seed)?;
    Ok(PointCloud::from_points_unchecked(
        returns.into_iter().map(|r| r.point).collect(),
    ))
}
