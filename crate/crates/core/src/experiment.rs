//! Dataset-level runs shared by the command line and the acceptance suite.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::detect::detect_scene;
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_dataset, EvalReport};
use crate::io::{load_cloud, save_detections, save_json, write_atomic};
use crate::simulate::{generate_dataset, generate_scene, DatasetManifest, DirectionMode, SimulationConfig, TerrainParams};
use crate::templates::{build_library, TemplateLibrary};
use crate::types::{ObjectClass, PointCloud};

/// Provenance of one command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Config,
    pub config_fingerprint: String,
    pub inputs: Vec<String>,
    /// Written files with their SHA-256.
    pub outputs: Vec<OutputFile>,
    pub duration_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "run_manifest.json";

    pub fn new(command: &str, config: &Config, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: config.clone(),
            config_fingerprint: config.fingerprint(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_secs: 0.0,
        }
    }

    /// Records every regular file under `dir` except run manifests, by path
    /// relative to `dir`, sorted.
    pub fn record_outputs(&mut self, dir: &Path) -> Result<()> {
        let mut files = Vec::new();
        collect_files(dir, &mut files)?;
        files.sort();
        for f in files {
            if f.file_name().and_then(|n| n.to_str()) == Some(Self::FILE_NAME) {
                continue;
            }
            let bytes = std::fs::read(&f).map_err(|e| Error::io(&f, e))?;
            let rel = f.strip_prefix(dir).unwrap_or(&f);
            self.outputs.push(OutputFile {
                path: rel.display().to_string(),
                sha256: sha256_hex(&bytes),
            });
        }
        Ok(())
    }

    /// Writes `run_manifest.json` into `dir` atomically.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(Self::FILE_NAME);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Point clouds of a directory (`*.ply`, `*.xyz`), sorted by file name.
pub fn scene_clouds(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Data(format!("no scenes matched: {} is not a directory", dir.display())));
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ply" | "xyz")))
        .collect();
    if out.is_empty() {
        return Err(Error::Data(format!("no scenes matched in {}", dir.display())));
    }
    out.sort();
    Ok(out)
}

/// Detects objects in every cloud of `scene_dir`, writing `<stem>.json`
/// detection lists to `out_dir`. Returns the detection files in scene order.
pub fn detect_dataset(scene_dir: &Path, library: &TemplateLibrary, config: &Config, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let clouds = scene_clouds(scene_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    clouds
        .par_iter()
        .map(|path| {
            let cloud = load_cloud(path)?;
            let detections = detect_scene(&cloud, library, &config.detect)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
            let out = out_dir.join(format!("{stem}.json"));
            save_detections(&detections, &out)?;
            Ok(out)
        })
        .collect()
}

/// Builds the template library for every class from the simulation settings.
pub fn build_templates(config: &Config) -> Result<TemplateLibrary> {
    let meshes = config.simulate.meshes()?;
    build_library(&ObjectClass::ALL, &config.templates, &config.simulate.scanner, &meshes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndResult {
    pub dataset: DatasetManifest,
    pub report: EvalReport,
    pub elapsed_secs: f64,
}

/// Simulates `n_scenes`, builds templates, detects and evaluates, laying out
/// `out_dir` as `scenes/`, `templates/`, `detections/` and `eval_report.json`.
pub fn end_to_end(config: &Config, n_scenes: usize, seed: u64, out_dir: &Path) -> Result<EndToEndResult> {
    let start = Instant::now();
    config.validate()?;
    let scenes = out_dir.join("scenes");
    let dataset = generate_dataset(n_scenes, &config.simulate, seed, &scenes)?;
    let library = build_templates(config)?;
    library.save(out_dir.join("templates"))?;
    let detections = out_dir.join("detections");
    if n_scenes > 0 {
        detect_dataset(&scenes, &library, config, &detections)?;
    } else {
        std::fs::create_dir_all(&detections).map_err(|e| Error::io(&detections, e))?;
    }
    let report = evaluate_dataset(&detections, &scenes, &config.evaluate)?;
    save_json(&report, &out_dir.join("eval_report.json"))?;
    Ok(EndToEndResult {
        dataset,
        report,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Half-angle of the narrow swath used for noise calibration. Off-nadir
/// beams project range noise onto the plane normal scaled by `cos(angle)`,
/// so the reference patch is kept close to nadir.
pub const CALIBRATION_HALF_ANGLE: f64 = 10.0;

/// A survey of an empty flat seabed with range noise `sigma`.
pub fn calibration_scan(base: &SimulationConfig, sigma: f64, seed: u64) -> Result<PointCloud> {
    let mut config = *base;
    config.objects_per_scene = 0;
    config.terrain = TerrainParams::flat();
    config.scanner.noise_sigma = sigma;
    config.scanner.swath_half_angle = CALIBRATION_HALF_ANGLE;
    config.scanner.direction_mode = DirectionMode::X;
    let meshes = config.meshes()?;
    generate_scene(&config, &meshes, seed).map(|(scene, _)| scene.cloud)
}
