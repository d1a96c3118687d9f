//! Domain types shared by the simulator, detector and evaluator.
//!
//! Coordinates are meters in a right-handed frame with z pointing up. Simulated
//! seabeds sit near z = 0.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::shapes::ShapeParams;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;

/// An unordered set of 3D points.
///
/// Order carries no meaning. Every consumer in this crate produces results that
/// are invariant under a permutation of the input points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a cloud, rejecting non-finite coordinates.
    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        if let Some((i, p)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "point {i} has non-finite coordinates ({}, {}, {})",
                p.x, p.y, p.z
            )));
        }
        Ok(Self { points })
    }

    /// Builds a cloud from points already known to be finite.
    pub(crate) fn from_points_unchecked(points: Vec<Point3>) -> Self {
        debug_assert!(points
            .iter()
            .all(|p| p.coords.iter().all(|c| c.is_finite())));
        Self { points }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    /// Returns a copy sorted lexicographically by (x, y, z).
    ///
    /// Randomized consumers (RANSAC) sample from this order so their output does
    /// not depend on the input order.
    pub fn canonical(&self) -> PointCloud {
        let mut points = self.points.clone();
        points.sort_by(|a, b| {
            a.x.total_cmp(&b.x)
                .then(a.y.total_cmp(&b.y))
                .then(a.z.total_cmp(&b.z))
        });
        PointCloud { points }
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }

    /// Axis-aligned bounds in the horizontal plane, or `None` for an empty cloud.
    pub fn xy_bounds(&self) -> Option<Bounds> {
        let first = self.points.first()?;
        let mut b = Bounds {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in &self.points[1..] {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Some(b)
    }
}

impl FromIterator<Point3> for PointCloud {
    fn from_iter<I: IntoIterator<Item = Point3>>(iter: I) -> Self {
        let points: Vec<Point3> = iter.into_iter().collect();
        PointCloud::from_points_unchecked(points)
    }
}

impl<'a> IntoIterator for &'a PointCloud {
    type Item = &'a Point3;
    type IntoIter = std::slice::Iter<'a, Point3>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// A proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about +z by `yaw` radians.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vec3::zeros(),
        }
    }

    /// Rotation of `angle` radians about a unit `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Self {
            rotation: *Rotation3::from_axis_angle(&axis, angle).matrix(),
            translation: Vec3::zeros(),
        }
    }

    pub fn with_translation(mut self, translation: Vec3) -> Self {
        self.translation = translation;
        self
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Heading of the rotated x axis in the horizontal plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// Max deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.rotation.transpose() * self.rotation - Matrix3::identity();
        d.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_rigid(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }
}

/// The four artificial-reef object classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    ReefRing,
    ReefCone,
    TetrapodB,
    TetrapodS,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 4] = [
        ObjectClass::ReefRing,
        ObjectClass::ReefCone,
        ObjectClass::TetrapodB,
        ObjectClass::TetrapodS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::ReefRing => "reef_ring",
            ObjectClass::ReefCone => "reef_cone",
            ObjectClass::TetrapodB => "tetrapod_b",
            ObjectClass::TetrapodS => "tetrapod_s",
        }
    }

    /// Column title used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            ObjectClass::ReefRing => "Reef_Ring",
            ObjectClass::ReefCone => "Reef_Cone",
            ObjectClass::TetrapodB => "Tetrapod_B",
            ObjectClass::TetrapodS => "Tetrapod_S",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Nominal height with default shape parameters.
    pub fn nominal_height(self) -> f64 {
        ShapeParams::default().height(self)
    }

    /// Nominal footprint diameter with default shape parameters.
    pub fn footprint_diameter(self) -> f64 {
        ShapeParams::default().footprint_diameter(self)
    }

    pub fn is_surface_of_revolution(self) -> bool {
        matches!(self, ObjectClass::ReefRing | ObjectClass::ReefCone)
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

/// One value per object class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerClass<T> {
    pub reef_ring: T,
    pub reef_cone: T,
    pub tetrapod_b: T,
    pub tetrapod_s: T,
}

impl<T> PerClass<T> {
    pub fn from_fn(mut f: impl FnMut(ObjectClass) -> T) -> Self {
        PerClass {
            reef_ring: f(ObjectClass::ReefRing),
            reef_cone: f(ObjectClass::ReefCone),
            tetrapod_b: f(ObjectClass::TetrapodB),
            tetrapod_s: f(ObjectClass::TetrapodS),
        }
    }

    pub fn splat(v: T) -> Self
    where
        T: Clone,
    {
        Self::from_fn(|_| v.clone())
    }

    pub fn get(&self, class: ObjectClass) -> &T {
        match class {
            ObjectClass::ReefRing => &self.reef_ring,
            ObjectClass::ReefCone => &self.reef_cone,
            ObjectClass::TetrapodB => &self.tetrapod_b,
            ObjectClass::TetrapodS => &self.tetrapod_s,
        }
    }

    pub fn get_mut(&mut self, class: ObjectClass) -> &mut T {
        match class {
            ObjectClass::ReefRing => &mut self.reef_ring,
            ObjectClass::ReefCone => &mut self.reef_cone,
            ObjectClass::TetrapodB => &mut self.tetrapod_b,
            ObjectClass::TetrapodS => &mut self.tetrapod_s,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ObjectClass, &T)> {
        ObjectClass::ALL.into_iter().map(move |c| (c, self.get(c)))
    }

    pub fn map<U>(&self, mut f: impl FnMut(ObjectClass, &T) -> U) -> PerClass<U> {
        PerClass::from_fn(|c| f(c, self.get(c)))
    }
}

/// Axis-aligned rectangle in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let b = Bounds {
            min_x,
            min_y,
            max_x,
            max_y,
        };
        if !(b.width() > 0.0 && b.height() > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bounds must have positive side lengths, got {}x{}",
                b.width(),
                b.height()
            )));
        }
        Ok(b)
    }

    /// A `width × height` rectangle anchored at the origin.
    pub fn from_size(width: f64, height: f64) -> Result<Self> {
        Self::new(0.0, 0.0, width, height)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn shrink(&self, margin: f64) -> Option<Bounds> {
        Bounds::new(
            self.min_x + margin,
            self.min_y + margin,
            self.max_x - margin,
            self.max_y - margin,
        )
        .ok()
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = yaw.rem_euclid(std::f64::consts::TAU);
    if y >= std::f64::consts::TAU {
        0.0
    } else {
        y
    }
}

/// A ground-truth object: class, center of its bounding box and heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub class: ObjectClass,
    pub center: [f64; 3],
    pub yaw: f64,
}

impl ObjectAnnotation {
    pub fn new(class: ObjectClass, center: Point3, yaw: f64) -> Self {
        Self {
            class,
            center: [center.x, center.y, center.z],
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn center_point(&self) -> Point3 {
        Point3::new(self.center[0], self.center[1], self.center[2])
    }
}

/// A detector output: class, center, heading and a confidence in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: ObjectClass,
    pub center: [f64; 3],
    pub yaw: f64,
    pub score: f64,
}

impl Detection {
    pub fn center_point(&self) -> Point3 {
        Point3::new(self.center[0], self.center[1], self.center[2])
    }

    /// Confidence for a registration error: `1 / (1 + rmse)`.
    pub fn score_from_rmse(rmse: f64) -> f64 {
        1.0 / (1.0 + rmse.max(0.0))
    }
}

impl From<ObjectAnnotation> for Detection {
    fn from(a: ObjectAnnotation) -> Self {
        Detection {
            class: a.class,
            center: a.center,
            yaw: a.yaw,
            score: 1.0,
        }
    }
}

/// A simulated survey tile with its ground truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub cloud: PointCloud,
    pub annotations: Vec<ObjectAnnotation>,
    pub bounds: Bounds,
    pub seed: u64,
}
