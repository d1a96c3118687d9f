//! Parametric stand-ins for the reef object classes.
//!
//! Every mesh is expressed in an object frame whose origin is the center of its
//! upright bounding box: z spans `[-height/2, height/2]` and the vertical axis
//! passes through the origin.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use crate::error::{Error, Result};
use crate::types::{ObjectClass, PerClass, Point3, Vec3};

pub const MIN_RESOLUTION: usize = 8;

/// Tetrapod proportions for unit leg length (hub center to tip face center).
const LEG_TIP_RADIUS: f64 = 0.18;
const LEG_BASE_RADIUS: f64 = 0.30;
const HUB_RADIUS: f64 = 0.36;

/// Horizontal and vertical components of a tetrahedral leg axis pointing down.
const DOWN_LEG_H: f64 = 0.942_809_041_582_063_4; // sqrt(8)/3
const DOWN_LEG_Z: f64 = -1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeParams {
    pub ring_height: f64,
    pub ring_outer_diameter: f64,
    pub ring_inner_diameter: f64,
    pub cone_height: f64,
    pub cone_base_diameter: f64,
    pub cone_top_diameter: f64,
    pub cone_wall: f64,
    pub tetrapod_height: f64,
    pub tetrapod_s_scale: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            ring_height: 0.75,
            ring_outer_diameter: 1.8,
            ring_inner_diameter: 1.0,
            cone_height: 1.4,
            cone_base_diameter: 1.6,
            cone_top_diameter: 0.6,
            cone_wall: 0.12,
            tetrapod_height: 2.08,
            tetrapod_s_scale: 0.6,
        }
    }
}

fn tetrapod_unit_height() -> f64 {
    // top face at z = 1, lowest rim point of a down leg at -1/3 - r_tip * sqrt(8)/3
    1.0 - DOWN_LEG_Z + LEG_TIP_RADIUS * DOWN_LEG_H
}

fn tetrapod_unit_reach() -> f64 {
    // outermost rim point of a down leg
    DOWN_LEG_H + LEG_TIP_RADIUS * -DOWN_LEG_Z
}

impl ShapeParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.ring_height,
            self.ring_outer_diameter,
            self.ring_inner_diameter,
            self.cone_height,
            self.cone_base_diameter,
            self.cone_top_diameter,
            self.cone_wall,
            self.tetrapod_height,
            self.tetrapod_s_scale,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("shape dimensions must be positive".into()));
        }
        if self.ring_inner_diameter >= self.ring_outer_diameter {
            return Err(Error::Config("ring inner diameter must be below outer diameter".into()));
        }
        if self.cone_top_diameter >= self.cone_base_diameter
            || 2.0 * self.cone_wall >= self.cone_top_diameter
        {
            return Err(Error::Config(
                "cone needs base > top diameter and a wall thinner than the top radius".into(),
            ));
        }
        Ok(())
    }

    fn tetrapod_scale(&self, class: ObjectClass) -> f64 {
        let s = self.tetrapod_height / tetrapod_unit_height();
        match class {
            ObjectClass::TetrapodS => s * self.tetrapod_s_scale,
            _ => s,
        }
    }

    pub fn height(&self, class: ObjectClass) -> f64 {
        match class {
            ObjectClass::ReefRing => self.ring_height,
            ObjectClass::ReefCone => self.cone_height,
            ObjectClass::TetrapodB => self.tetrapod_height,
            ObjectClass::TetrapodS => self.tetrapod_height * self.tetrapod_s_scale,
        }
    }

    /// Twice the largest horizontal distance of the surface from the vertical axis.
    pub fn footprint_diameter(&self, class: ObjectClass) -> f64 {
        match class {
            ObjectClass::ReefRing => self.ring_outer_diameter,
            ObjectClass::ReefCone => self.cone_base_diameter,
            ObjectClass::TetrapodB | ObjectClass::TetrapodS => {
                2.0 * tetrapod_unit_reach() * self.tetrapod_scale(class)
            }
        }
    }

    pub fn make_mesh(&self, class: ObjectClass, resolution: usize) -> Result<TriangleMesh> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::InvalidInput(format!(
                "mesh resolution {resolution} is below the minimum of {MIN_RESOLUTION}"
            )));
        }
        self.validate()?;
        let mut mesh = match class {
            ObjectClass::ReefRing => {
                let (ro, ri, h) = (
                    self.ring_outer_diameter / 2.0,
                    self.ring_inner_diameter / 2.0,
                    self.ring_height,
                );
                // annulus with chamfered top edges
                let c = 0.2 * h.min(ro - ri);
                let profile = [
                    (ri, 0.0),
                    (ro, 0.0),
                    (ro, h - c),
                    (ro - c, h),
                    (ri + c, h),
                    (ri, h - c),
                ];
                lathe(&profile, resolution)?
            }
            ObjectClass::ReefCone => {
                let (rb, rt, w, h) = (
                    self.cone_base_diameter / 2.0,
                    self.cone_top_diameter / 2.0,
                    self.cone_wall,
                    self.cone_height,
                );
                lathe(&[(rb - w, 0.0), (rb, 0.0), (rt, h), (rt - w, h)], resolution)?
            }
            ObjectClass::TetrapodB | ObjectClass::TetrapodS => {
                let mut m = unit_tetrapod(resolution)?;
                let s = self.tetrapod_scale(class);
                let z_mid = (1.0 + DOWN_LEG_Z - LEG_TIP_RADIUS * DOWN_LEG_H) / 2.0;
                m.map_vertices(|p| Point3::new(p.x * s, p.y * s, (p.z - z_mid) * s));
                return Ok(m);
            }
        };
        let h = self.height(class);
        mesh.map_vertices(|p| Point3::new(p.x, p.y, p.z - h / 2.0));
        Ok(mesh)
    }
}

/// One mesh per class, built once and shared read-only.
#[derive(Debug, Clone)]
pub struct ObjectMeshes {
    meshes: PerClass<TriangleMesh>,
    params: ShapeParams,
    resolution: usize,
}

impl ObjectMeshes {
    pub fn new(params: &ShapeParams, resolution: usize) -> Result<Self> {
        let mut meshes = Vec::with_capacity(4);
        for class in ObjectClass::ALL {
            meshes.push(params.make_mesh(class, resolution)?);
        }
        let mut it = meshes.into_iter();
        Ok(ObjectMeshes {
            meshes: PerClass::from_fn(|_| it.next().unwrap()),
            params: *params,
            resolution,
        })
    }

    pub fn get(&self, class: ObjectClass) -> &TriangleMesh {
        self.meshes.get(class)
    }

    pub fn params(&self) -> &ShapeParams {
        &self.params
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }
}

/// Mesh for `class` with the default shape parameters.
pub fn make_mesh(class: ObjectClass, resolution: usize) -> Result<TriangleMesh> {
    ShapeParams::default().make_mesh(class, resolution)
}

fn orient_outward(mut mesh: TriangleMesh) -> TriangleMesh {
    if mesh.signed_volume() < 0.0 {
        mesh.flip_winding();
    }
    mesh
}

/// Revolves a closed `(radius, z)` polygon about the z axis.
fn lathe(profile: &[(f64, f64)], segments: usize) -> Result<TriangleMesh> {
    let m = profile.len();
    let mut vertices = Vec::with_capacity(m * segments);
    for k in 0..segments {
        let (s, c) = (TAU * k as f64 / segments as f64).sin_cos();
        for &(r, z) in profile {
            vertices.push(Point3::new(r * c, r * s, z));
        }
    }
    let idx = |k: usize, i: usize| ((k % segments) * m + (i % m)) as u32;
    let mut triangles = Vec::with_capacity(2 * m * segments);
    for k in 0..segments {
        for i in 0..m {
            let (a, b, c, d) = (idx(k, i), idx(k, i + 1), idx(k + 1, i + 1), idx(k + 1, i));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Ok(orient_outward(TriangleMesh::new(vertices, triangles)?))
}

/// Closed truncated cone between two capped circular rims.
///
/// `e1` fixes the angular origin of both rims so that chosen extremal points
/// are exact vertices.
fn frustum(
    base: Point3,
    tip: Point3,
    r_base: f64,
    r_tip: f64,
    e1: Vec3,
    segments: usize,
) -> Result<TriangleMesh> {
    let axis = (tip - base).normalize();
    let e2 = axis.cross(&e1);
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for (center, r) in [(base, r_base), (tip, r_tip)] {
        for k in 0..segments {
            let (s, c) = (TAU * k as f64 / segments as f64).sin_cos();
            vertices.push(center + r * (c * e1 + s * e2));
        }
    }
    vertices.push(base);
    vertices.push(tip);
    let n = segments as u32;
    let (cb, ct) = (2 * n, 2 * n + 1);
    let mut triangles = Vec::with_capacity(4 * segments);
    for k in 0..n {
        let k1 = (k + 1) % n;
        triangles.push([k, k1, n + k1]);
        triangles.push([k, n + k1, n + k]);
        triangles.push([cb, k1, k]);
        triangles.push([ct, n + k, n + k1]);
    }
    Ok(orient_outward(TriangleMesh::new(vertices, triangles)?))
}

fn uv_sphere(radius: f64, segments: usize) -> Result<TriangleMesh> {
    let stacks = (segments / 2).max(4);
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for j in 1..stacks {
        let (sp, cp) = (PI * j as f64 / stacks as f64).sin_cos();
        for k in 0..segments {
            let (s, c) = (TAU * k as f64 / segments as f64).sin_cos();
            vertices.push(Point3::new(radius * sp * c, radius * sp * s, radius * cp));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, -radius));
    let n = segments as u32;
    let ring = |j: u32, k: u32| 1 + j * n + (k % n);
    let south = vertices.len() as u32 - 1;
    let mut triangles = Vec::new();
    for k in 0..n {
        triangles.push([0, ring(0, k), ring(0, k + 1)]);
        triangles.push([south, ring(stacks as u32 - 2, k + 1), ring(stacks as u32 - 2, k)]);
    }
    for j in 0..stacks as u32 - 2 {
        for k in 0..n {
            triangles.push([ring(j, k), ring(j + 1, k), ring(j + 1, k + 1)]);
            triangles.push([ring(j, k), ring(j + 1, k + 1), ring(j, k + 1)]);
        }
    }
    Ok(orient_outward(TriangleMesh::new(vertices, triangles)?))
}

/// Four legs on tetrahedral axes (one vertical) fused at a spherical hub.
/// Unit leg length, resting frame: top face at z = 1.
fn unit_tetrapod(resolution: usize) -> Result<TriangleMesh> {
    // even rim count keeps the lowest rim point of each down leg on a vertex
    let segments = resolution + resolution % 2;
    let mut mesh = uv_sphere(HUB_RADIUS, resolution)?;
    let origin = Point3::origin();
    let up = frustum(
        origin,
        Point3::new(0.0, 0.0, 1.0),
        LEG_BASE_RADIUS,
        LEG_TIP_RADIUS,
        Vec3::x(),
        segments,
    )?;
    mesh.append(&up);
    for i in 0..3 {
        let phi = TAU * i as f64 / 3.0;
        let h = Vec3::new(phi.cos(), phi.sin(), 0.0);
        let axis = DOWN_LEG_H * h + DOWN_LEG_Z * Vec3::z();
        // in the vertical plane of the leg, perpendicular to it, pointing outward-up
        let e1 = -DOWN_LEG_Z * h + DOWN_LEG_H * Vec3::z();
        let leg = frustum(
            origin,
            Point3::from(axis),
            LEG_BASE_RADIUS,
            LEG_TIP_RADIUS,
            e1,
            segments,
        )?;
        mesh.append(&leg);
    }
    Ok(mesh)
}
