//! Procedural scenes: fractal terrain, settled objects and a virtual multibeam survey.

pub mod dataset;
pub mod placement;
pub mod scan;
pub mod terrain;

pub use dataset::{generate_dataset, generate_scene, DatasetManifest, SceneRecord, SimulationConfig};
pub use placement::{place_objects, PlacedObject, PlacementParams, SceneSpec};
pub use scan::{scan_returns, scan_returns_at, simulate_scan, DirectionMode, ScanReturn, ScannerConfig, SceneGeometry, MAX_BEAMS};
pub use terrain::{generate_terrain, perlin, TerrainField, TerrainParams};
