//! Random object placement with a gravity-style settling rule.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::terrain::TerrainField;
use crate::error::{Error, Result};
use crate::geometry::{transform_mesh, ObjectMeshes, TriangleMesh};
use crate::rng::{rng_for, stream};
use crate::types::{Bounds, ObjectAnnotation, ObjectClass, PerClass, Point3, RigidTransform, Vec3};

/// Placement rules shared by every scene of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementParams {
    /// Extra distance kept between an object's footprint and the scene edge.
    pub margin: f64,
    /// Minimum edge-to-edge gap between footprint circles.
    pub min_gap: f64,
    /// Minimum center-to-center distance regardless of size.
    pub min_center_distance: f64,
    /// Objects sink up to this depth below first contact.
    pub sink_allowance: f64,
    pub max_tilt_deg: f64,
    /// Candidate draws per object before giving up.
    pub max_attempts: usize,
}

impl Default for PlacementParams {
    fn default() -> Self {
        PlacementParams {
            margin: 0.5,
            min_gap: 1.0,
            min_center_distance: 0.0,
            sink_allowance: 0.05,
            max_tilt_deg: 5.0,
            max_attempts: 2000,
        }
    }
}

impl PlacementParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.margin >= 0.0
            && self.min_gap >= 0.0
            && self.min_center_distance >= 0.0
            && self.sink_allowance >= 0.0
            && (0.0..90.0).contains(&self.max_tilt_deg)
            && self.max_attempts > 0;
        if !ok {
            return Err(Error::Config(
                "placement distances must be non-negative, tilt below 90 degrees and max_attempts positive".into(),
            ));
        }
        Ok(())
    }
}

/// What to place in one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub bounds: Bounds,
    pub counts: PerClass<usize>,
    pub placement: PlacementParams,
}

impl SceneSpec {
    pub fn total(&self) -> usize {
        self.counts.iter().map(|(_, n)| *n).sum()
    }
}

/// A settled object: its ground-truth record and the full pose of its mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedObject {
    pub annotation: ObjectAnnotation,
    pub pose: RigidTransform,
}

impl PlacedObject {
    pub fn class(&self) -> ObjectClass {
        self.annotation.class
    }

    pub fn posed_mesh(&self, meshes: &ObjectMeshes) -> TriangleMesh {
        transform_mesh(meshes.get(self.class()), &self.pose)
    }
}

/// Lowest vertical offset that puts the rotated mesh in contact with the terrain.
///
/// `rotation` is applied to the mesh before translating it to `(x, y, z)`.
pub fn settle_height(terrain: &TerrainField, mesh: &TriangleMesh, rotation: &RigidTransform, x: f64, y: f64) -> f64 {
    mesh.vertices()
        .iter()
        .map(|v| {
            let p = rotation.apply(v);
            terrain.height_at(x + p.x, y + p.y) - p.z
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Places `spec.counts` objects on `terrain` by random sequential addition.
///
/// Larger classes go first. Each candidate gets a uniform position inside the
/// bounds shrunk by its footprint radius plus the margin, a uniform yaw, and a
/// random tilt about a horizontal axis, then drops onto the terrain.
pub fn place_objects(
    terrain: &TerrainField,
    spec: &SceneSpec,
    meshes: &ObjectMeshes,
    seed: u64,
) -> Result<Vec<PlacedObject>> {
    spec.placement.validate()?;
    let p = &spec.placement;
    let shapes = meshes.params();
    let mut order: Vec<ObjectClass> = ObjectClass::ALL
        .into_iter()
        .flat_map(|c| std::iter::repeat_n(c, *spec.counts.get(c)))
        .collect();
    order.sort_by(|a, b| {
        shapes
            .footprint_diameter(*b)
            .total_cmp(&shapes.footprint_diameter(*a))
            .then(a.cmp(b))
    });

    let mut rng = rng_for(seed, &[stream::PLACEMENT]);
    let mut placed: Vec<(PlacedObject, f64)> = Vec::with_capacity(order.len());
    let mut attempts = 0usize;
    for class in order {
        let radius = shapes.footprint_diameter(class) / 2.0;
        let area = spec.bounds.shrink(radius + p.margin).ok_or(Error::Placement {
            requested: spec.total(),
            achieved: placed.len(),
            attempts,
        })?;
        let mut found = None;
        for _ in 0..p.max_attempts {
            attempts += 1;
            let x = rng.random_range(area.min_x..=area.max_x);
            let y = rng.random_range(area.min_y..=area.max_y);
            let yaw = rng.random::<f64>() * TAU;
            let tilt_dir = rng.random::<f64>() * TAU;
            let tilt = rng.random::<f64>() * p.max_tilt_deg.to_radians();
            let sink = rng.random::<f64>() * p.sink_allowance;
            let clear = placed.iter().all(|(o, r)| {
                let c = o.annotation.center;
                let d = (c[0] - x).hypot(c[1] - y);
                d >= p.min_center_distance && d >= r + radius + p.min_gap
            });
            if !clear {
                continue;
            }
            let axis = Vec3::new(tilt_dir.cos(), tilt_dir.sin(), 0.0);
            let rotation = RigidTransform::from_axis_angle(&axis, tilt).compose(&RigidTransform::from_yaw(yaw));
            let z = settle_height(terrain, meshes.get(class), &rotation, x, y) - sink;
            let pose = rotation.with_translation(Vec3::new(x, y, z));
            found = Some(PlacedObject {
                annotation: ObjectAnnotation::new(class, Point3::new(x, y, z), yaw),
                pose,
            });
            break;
        }
        match found {
            Some(o) => placed.push((o, radius)),
            None => {
                return Err(Error::Placement {
                    requested: spec.total(),
                    achieved: placed.len(),
                    attempts,
                })
            }
        }
    }
    Ok(placed.into_iter().map(|(o, _)| o).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{mesh_aabb, ShapeParams};
    use crate::simulate::terrain::{generate_terrain, TerrainParams};

    fn meshes() -> ObjectMeshes {
        ObjectMeshes::new(&ShapeParams::default(), 16).unwrap()
    }

    fn spec(counts: PerClass<usize>, placement: PlacementParams) -> SceneSpec {
        SceneSpec {
            bounds: Bounds::from_size(40.0, 40.0).unwrap(),
            counts,
            placement,
        }
    }

    #[test]
    fn settles_on_flat_floor() {
        let m = meshes();
        let t = generate_terrain(Bounds::from_size(40.0, 40.0).unwrap(), &TerrainParams::flat(), 0).unwrap();
        let counts = PerClass::from_fn(|c| usize::from(c == ObjectClass::TetrapodB));
        for seed in 0..20 {
            let objs = place_objects(&t, &spec(counts, PlacementParams::default()), &m, seed).unwrap();
            assert_eq!(objs.len(), 1);
            let lowest = mesh_aabb(&objs[0].posed_mesh(&m)).min.z;
            assert!((-0.05..=1e-6).contains(&lowest), "lowest {lowest}");
        }
    }

    #[test]
    fn nothing_requested() {
        let m = meshes();
        let t = generate_terrain(Bounds::from_size(40.0, 40.0).unwrap(), &TerrainParams::default(), 1).unwrap();
        let objs = place_objects(&t, &spec(PerClass::splat(0), PlacementParams::default()), &m, 1).unwrap();
        assert!(objs.is_empty());
    }

    #[test]
    fn center_separation_is_enforced() {
        let m = meshes();
        let t = generate_terrain(Bounds::from_size(40.0, 40.0).unwrap(), &TerrainParams::default(), 2).unwrap();
        let counts = PerClass::from_fn(|c| if c == ObjectClass::TetrapodB { 12 } else { 0 });
        let params = PlacementParams {
            min_center_distance: 5.0,
            ..Default::default()
        };
        let objs = place_objects(&t, &spec(counts, params), &m, 3).unwrap();
        assert_eq!(objs.len(), 12);
        for (i, a) in objs.iter().enumerate() {
            for b in &objs[i + 1..] {
                let (ca, cb) = (a.annotation.center, b.annotation.center);
                assert!((ca[0] - cb[0]).hypot(ca[1] - cb[1]) >= 5.0);
            }
        }
    }

    #[test]
    fn overfull_request_reports_progress() {
        let m = meshes();
        let t = generate_terrain(Bounds::from_size(10.0, 10.0).unwrap(), &TerrainParams::flat(), 0).unwrap();
        let s = SceneSpec {
            bounds: Bounds::from_size(10.0, 10.0).unwrap(),
            counts: PerClass::from_fn(|c| if c == ObjectClass::TetrapodB { 30 } else { 0 }),
            placement: PlacementParams {
                max_attempts: 200,
                ..Default::default()
            },
        };
        match place_objects(&t, &s, &m, 0) {
            Err(Error::Placement { requested, achieved, .. }) => {
                assert_eq!(requested, 30);
                assert!(achieved > 0 && achieved < 30);
            }
            other => panic!("expected placement error, got {other:?}"),
        }
    }

    #[test]
    fn objects_rest_on_rough_terrain_and_stay_inside() {
        let m = meshes();
        let b = Bounds::from_size(40.0, 40.0).unwrap();
        let t = generate_terrain(b, &TerrainParams::default(), 9).unwrap();
        let objs = place_objects(&t, &spec(PerClass::splat(10), PlacementParams::default()), &m, 9).unwrap();
        assert_eq!(objs.len(), 40);
        for o in &objs {
            let c = o.annotation.center;
            assert!(b.contains(c[0], c[1]));
            assert!(o.pose.is_rigid(1e-12));
            let mesh = o.posed_mesh(&m);
            // deepest vertex penetration is bounded by the sink allowance
            let deepest = mesh
                .vertices()
                .iter()
                .map(|v| v.z - t.height_at(v.x, v.y))
                .fold(f64::INFINITY, f64::min);
            assert!((-0.05 - 1e-9..=1e-9).contains(&deepest), "deepest {deepest}");
        }
    }

    #[test]
    fn placement_is_seeded() {
        let m = meshes();
        let t = generate_terrain(Bounds::from_size(40.0, 40.0).unwrap(), &TerrainParams::default(), 4).unwrap();
        let s = spec(PerClass::splat(5), PlacementParams::default());
        assert_eq!(place_objects(&t, &s, &m, 4).unwrap(), place_objects(&t, &s, &m, 4).unwrap());
        assert_ne!(place_objects(&t, &s, &m, 4).unwrap(), place_objects(&t, &s, &m, 5).unwrap());
    }
}
