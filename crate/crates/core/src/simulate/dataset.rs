//! Whole scenes and on-disk datasets.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::placement::{place_objects, PlacedObject, PlacementParams, SceneSpec};
use super::scan::{simulate_scan, ScannerConfig, SceneGeometry};
use super::terrain::{generate_terrain, TerrainParams};
use crate::error::{Error, Result};
use crate::geometry::{ObjectMeshes, ShapeParams};
use crate::io::{save_annotations, save_cloud, save_json, CloudFormat};
use crate::rng::{derive, rng_for, stream};
use crate::types::{Bounds, ObjectClass, PerClass, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub scene_width: f64,
    pub scene_height: f64,
    pub objects_per_scene: usize,
    /// Relative class frequencies.
    pub class_mix: PerClass<f64>,
    pub mesh_resolution: usize,
    pub shapes: ShapeParams,
    pub terrain: TerrainParams,
    pub placement: PlacementParams,
    pub scanner: ScannerConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            scene_width: 40.0,
            scene_height: 40.0,
            objects_per_scene: 50,
            class_mix: PerClass::splat(1.0),
            mesh_resolution: 32,
            shapes: ShapeParams::default(),
            terrain: TerrainParams::default(),
            placement: PlacementParams::default(),
            scanner: ScannerConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        Bounds::from_size(self.scene_width, self.scene_height)?;
        if self.class_mix.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("class_mix weights must be finite and non-negative".into()));
        }
        if self.objects_per_scene > 0 && self.class_mix.iter().all(|(_, w)| *w == 0.0) {
            return Err(Error::Config("class_mix needs at least one positive weight".into()));
        }
        self.shapes.validate()?;
        self.terrain.validate()?;
        self.placement.validate()?;
        self.scanner.validate()
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::from_size(self.scene_width, self.scene_height).expect("validated scene size")
    }

    pub fn meshes(&self) -> Result<ObjectMeshes> {
        ObjectMeshes::new(&self.shapes, self.mesh_resolution)
    }
}

/// Splits `total` objects across classes in proportion to `mix`.
///
/// Each class gets the floor of its quota; the leftover objects go to the
/// classes with the largest fractional parts, ties broken at random.
pub fn class_counts(total: usize, mix: &PerClass<f64>, rng: &mut impl Rng) -> PerClass<usize> {
    let sum: f64 = mix.iter().map(|(_, w)| *w).sum();
    if total == 0 || sum <= 0.0 {
        return PerClass::splat(0);
    }
    let quota = mix.map(|_, w| total as f64 * w / sum);
    let mut counts = quota.map(|_, q| q.floor() as usize);
    let assigned: usize = counts.iter().map(|(_, n)| *n).sum();
    let mut ranked: Vec<(f64, f64, ObjectClass)> = ObjectClass::ALL
        .into_iter()
        .map(|c| (quota.get(c).fract(), rng.random::<f64>(), c))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    for &(_, _, c) in ranked.iter().cycle().take(total.saturating_sub(assigned)) {
        *counts.get_mut(c) += 1;
    }
    counts
}

/// Builds one scene: terrain, settled objects and the survey cloud.
pub fn generate_scene(config: &SimulationConfig, meshes: &ObjectMeshes, seed: u64) -> Result<(Scene, Vec<PlacedObject>)> {
    config.validate()?;
    let bounds = config.bounds();
    let terrain = generate_terrain(bounds, &config.terrain, derive(seed, stream::TERRAIN))?;
    let counts = class_counts(
        config.objects_per_scene,
        &config.class_mix,
        &mut rng_for(seed, &[stream::CLASS_MIX]),
    );
    let spec = SceneSpec {
        bounds,
        counts,
        placement: config.placement,
    };
    let objects = place_objects(&terrain, &spec, meshes, seed)?;
    let geometry = SceneGeometry::new(&terrain, &objects, meshes);
    let cloud = simulate_scan(&geometry, &config.scanner, seed)?;
    let scene = Scene {
        cloud,
        annotations: objects.iter().map(|o| o.annotation).collect(),
        bounds,
        seed,
    };
    Ok((scene, objects))
}

/// Seed of scene `index` in a dataset with `master_seed`.
pub fn scene_seed(master_seed: u64, index: usize) -> u64 {
    derive(master_seed, index as u64)
}

pub fn scene_stem(index: usize) -> String {
    format!("scene_{index:04}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub index: usize,
    pub seed: u64,
    pub cloud: String,
    pub annotations: String,
    pub points: usize,
    pub class_counts: PerClass<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub master_seed: u64,
    pub scene_count: usize,
    pub total_objects: usize,
    pub class_counts: PerClass<usize>,
    pub scenes: Vec<SceneRecord>,
}

impl DatasetManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    /// Fraction of all objects belonging to each class.
    pub fn class_shares(&self) -> PerClass<f64> {
        let total = self.total_objects.max(1) as f64;
        self.class_counts.map(|_, n| *n as f64 / total)
    }
}

/// Generates `n_scenes` scenes into `out_dir` as `scene_####.ply` clouds and
/// `scene_####.json` annotations, plus `manifest.json`.
pub fn generate_dataset(
    n_scenes: usize,
    config: &SimulationConfig,
    master_seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let meshes = config.meshes()?;
    let scenes: Vec<SceneRecord> = (0..n_scenes)
        .into_par_iter()
        .map(|index| {
            let seed = scene_seed(master_seed, index);
            let (scene, _) = generate_scene(config, &meshes, seed)?;
            let stem = scene_stem(index);
            let cloud = format!("{stem}.ply");
            let annotations = format!("{stem}.json");
            save_cloud(&scene.cloud, out_dir.join(&cloud), CloudFormat::PlyBinary)?;
            save_annotations(&scene.annotations, out_dir.join(&annotations))?;
            let mut class_counts = PerClass::splat(0usize);
            for a in &scene.annotations {
                *class_counts.get_mut(a.class) += 1;
            }
            Ok(SceneRecord {
                index,
                seed,
                cloud,
                annotations,
                points: scene.cloud.len(),
                class_counts,
            })
        })
        .collect::<Result<_>>()?;
    let class_counts = PerClass::from_fn(|c| scenes.iter().map(|s| s.class_counts.get(c)).sum());
    let manifest = DatasetManifest {
        master_seed,
        scene_count: scenes.len(),
        total_objects: scenes.iter().map(|s| s.class_counts.iter().map(|(_, n)| n).sum::<usize>()).sum(),
        class_counts,
        scenes,
    };
    save_json(&manifest, &out_dir.join(DatasetManifest::FILE_NAME))?;
    Ok(manifest)
}
