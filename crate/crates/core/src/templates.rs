//! Template library: class meshes scanned the way the survey scans scenes.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cloud::centroid;
use crate::error::{Error, Result};
use crate::geometry::{transform_mesh, ObjectMeshes, TriangleMesh};
use crate::io::{load_cloud, load_json, save_cloud, save_json, CloudFormat};
use crate::simulate::scan::{LineAxis, Ping};
use crate::simulate::{scan_returns_at, ScannerConfig, SceneGeometry};
use crate::types::{Bounds, ObjectClass, PerClass, Point3, PointCloud, RigidTransform, Vec3};

/// Scans with fewer returns than this cannot serve as templates.
pub const MIN_TEMPLATE_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplateConfig {
    /// Evenly spaced yaws per class.
    pub yaw_counts: PerClass<usize>,
    /// Returns at most this high above the virtual floor are dropped.
    pub floor_clearance: f64,
    /// Across-track offsets of the virtual survey lines from the object center.
    pub line_offsets: Vec<f64>,
    pub rmse_threshold: PerClass<f64>,
    /// Minimum segment size as a fraction of the template's return count.
    pub min_points_fraction: f64,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            yaw_counts: PerClass {
                reef_ring: 1,
                reef_cone: 1,
                tetrapod_b: 8,
                tetrapod_s: 8,
            },
            floor_clearance: 0.04,
            line_offsets: vec![0.0],
            rmse_threshold: PerClass::splat(0.1),
            min_points_fraction: 0.3,
        }
    }
}

impl TemplateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.yaw_counts.iter().any(|(_, n)| *n == 0) {
            return Err(Error::Config("every class needs at least one template yaw".into()));
        }
        if !(self.floor_clearance > 0.0) || self.line_offsets.is_empty() {
            return Err(Error::Config(
                "template floor_clearance must be positive and line_offsets non-empty".into(),
            ));
        }
        if self.rmse_threshold.iter().any(|(_, t)| !(*t > 0.0)) {
            return Err(Error::Config("rmse thresholds must be positive".into()));
        }
        if !(self.min_points_fraction > 0.0 && self.min_points_fraction <= 1.0) {
            return Err(Error::Config("min_points_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn yaws(&self, class: ObjectClass) -> Vec<f64> {
        let n = *self.yaw_counts.get(class);
        (0..n).map(|k| TAU * k as f64 / n as f64).collect()
    }
}

/// Everything that determines template contents.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct FingerprintInput<'a> {
    config: &'a TemplateConfig,
    scanner: &'a ScannerConfig,
    shapes: &'a crate::geometry::ShapeParams,
    mesh_resolution: usize,
}

/// A sensor-view point sample of one class at one yaw, centered at its centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub class: ObjectClass,
    pub source_yaw: f64,
    pub cloud: PointCloud,
    /// The object's bounding-box center in the template frame.
    pub center_offset: Vec3,
    pub rmse_threshold: f64,
    pub min_points: usize,
}

fn floor_mesh(half: f64) -> TriangleMesh {
    let v = vec![
        Point3::new(-half, -half, 0.0),
        Point3::new(half, -half, 0.0),
        Point3::new(half, half, 0.0),
        Point3::new(-half, half, 0.0),
    ];
    TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).expect("floor quad")
}

/// Scans `mesh` standing upright at `yaw` on a flat floor, noise-free, and
/// keeps the returns above `floor_clearance`.
///
/// The thresholds of the returned template come from `config`; `min_points`
/// is derived from this template's own return count.
pub fn build_template(
    mesh: &TriangleMesh,
    class: ObjectClass,
    yaw: f64,
    scanner: &ScannerConfig,
    config: &TemplateConfig,
) -> Result<Template> {
    config.validate()?;
    let aabb = crate::geometry::mesh_aabb(mesh);
    let pose = RigidTransform::from_yaw(yaw).with_translation(Vec3::new(0.0, 0.0, -aabb.min.z));
    let posed = transform_mesh(mesh, &pose);
    let reach = aabb.extent().x.max(aabb.extent().y);
    let floor = floor_mesh(reach + scanner.sensor_height * 2.0);
    let bounds = Bounds::new(-reach, -reach, reach, reach)?;
    let geometry = SceneGeometry::from_meshes(bounds, &[&floor, &posed]);
    let quiet = ScannerConfig {
        noise_sigma: 0.0,
        dropout_prob: 0.0,
        ..*scanner
    };
    let per_line = (2.0 * reach / scanner.ping_spacing).ceil().max(1.0) as usize;
    let mut pings = Vec::new();
    for (line, &offset) in config.line_offsets.iter().enumerate() {
        for index in 0..per_line {
            let x = -reach + scanner.ping_spacing * (index as f64 + 0.5);
            pings.push(Ping {
                axis: LineAxis::X,
                line,
                index,
                origin: Point3::new(x, offset, scanner.sensor_height),
            });
        }
    }
    let returns = scan_returns_at(&geometry, &quiet, &pings, 0)?;
    let points: PointCloud = returns
        .into_iter()
        .map(|r| r.point)
        .filter(|p| p.z > config.floor_clearance)
        .collect();
    if points.len() < MIN_TEMPLATE_POINTS {
        return Err(Error::TemplateTooSmall {
            class: class.to_string(),
            points: points.len(),
            needed: MIN_TEMPLATE_POINTS,
        });
    }
    let points = points.canonical();
    let c = centroid(&points)?;
    let cloud: PointCloud = points.iter().map(|p| Point3::from(p - c)).collect();
    let center = Point3::new(0.0, 0.0, aabb.extent().z / 2.0);
    Ok(Template {
        class,
        source_yaw: crate::types::normalize_yaw(yaw),
        min_points: ((cloud.len() as f64 * config.min_points_fraction).ceil() as usize).max(3),
        cloud,
        center_offset: center - c,
        rmse_threshold: *config.rmse_threshold.get(class),
    })
}

/// Templates grouped by class, built with one scan configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateLibrary {
    templates: Vec<Template>,
    fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateRecord {
    class: ObjectClass,
    yaw: f64,
    file: String,
    rmse_threshold: f64,
    min_points: usize,
    center_offset: [f64; 3],
    points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryFile {
    fingerprint: String,
    templates: Vec<TemplateRecord>,
}

pub const LIBRARY_FILE: &str = "library.json";

impl TemplateLibrary {
    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn for_class(&self, class: ObjectClass) -> impl Iterator<Item = &Template> {
        self.templates.iter().filter(move |t| t.class == class)
    }

    pub fn classes(&self) -> Vec<ObjectClass> {
        let mut c: Vec<ObjectClass> = self.templates.iter().map(|t| t.class).collect();
        c.dedup();
        c
    }

    /// A library holding only the templates of `classes`.
    pub fn subset(&self, classes: &[ObjectClass]) -> TemplateLibrary {
        TemplateLibrary {
            templates: self
                .templates
                .iter()
                .filter(|t| classes.contains(&t.class))
                .cloned()
                .collect(),
            fingerprint: self.fingerprint.clone(),
        }
    }

    /// Builds a library from templates; they are kept in (class, yaw) order.
    pub fn from_templates(mut templates: Vec<Template>, fingerprint: String) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::InvalidInput("template library is empty".into()));
        }
        templates.sort_by(|a, b| a.class.cmp(&b.class).then(a.source_yaw.total_cmp(&b.source_yaw)));
        Ok(TemplateLibrary {
            templates,
            fingerprint,
        })
    }

    /// Writes one double-precision PLY per template plus `library.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut records = Vec::with_capacity(self.templates.len());
        for (i, t) in self.templates.iter().enumerate() {
            let file = format!("{i:03}_{}.ply", t.class);
            save_cloud(&t.cloud, dir.join(&file), CloudFormat::PlyBinaryDouble)?;
            records.push(TemplateRecord {
                class: t.class,
                yaw: t.source_yaw,
                file,
                rmse_threshold: t.rmse_threshold,
                min_points: t.min_points,
                center_offset: t.center_offset.into(),
                points: t.cloud.len(),
            });
        }
        save_json(
            &LibraryFile {
                fingerprint: self.fingerprint.clone(),
                templates: records,
            },
            &dir.join(LIBRARY_FILE),
        )
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let file: LibraryFile = load_json(&dir.join(LIBRARY_FILE))?;
        let mut templates = Vec::with_capacity(file.templates.len());
        for r in file.templates {
            let path = dir.join(&r.file);
            let cloud = load_cloud(&path)?;
            if cloud.len() != r.points {
                return Err(Error::Data(format!(
                    "{} holds {} points, metadata says {}",
                    path.display(),
                    cloud.len(),
                    r.points
                )));
            }
            templates.push(Template {
                class: r.class,
                source_yaw: r.yaw,
                cloud,
                center_offset: r.center_offset.into(),
                rmse_threshold: r.rmse_threshold,
                min_points: r.min_points,
            });
        }
        TemplateLibrary::from_templates(templates, file.fingerprint)
    }
}

/// Hex SHA-256 of everything that determines the templates.
pub fn library_fingerprint(config: &TemplateConfig, scanner: &ScannerConfig, meshes: &ObjectMeshes) -> String {
    let input = FingerprintInput {
        config,
        scanner,
        shapes: meshes.params(),
        mesh_resolution: meshes.resolution(),
    };
    let bytes = serde_json::to_vec(&input).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One template per (class, yaw) for each of `classes`.
pub fn build_library(
    classes: &[ObjectClass],
    config: &TemplateConfig,
    scanner: &ScannerConfig,
    meshes: &ObjectMeshes,
) -> Result<TemplateLibrary> {
    config.validate()?;
    let mut templates = Vec::new();
    for &class in classes {
        for yaw in config.yaws(class) {
            templates.push(build_template(meshes.get(class), class, yaw, scanner, config)?);
        }
    }
    TemplateLibrary::from_templates(templates, library_fingerprint(config, scanner, meshes))
}
