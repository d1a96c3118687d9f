//! Training-free detection by template matching.

pub mod icp;
pub mod kdtree;
pub mod matching;
pub mod pipeline;
pub mod ransac;
pub mod segment;

pub use icp::{best_rigid_transform, icp_register, IcpParams, IcpResult, Target};
pub use kdtree::KdTree;
pub use matching::{match_segment, nms_dedupe, Hypothesis, MatchParams};
pub use pipeline::{detect_scene, detect_scene_debug, DetectionDebug, DetectorConfig, SegmentMatch, SegmentResult, WindowMode, WindowParams};
pub use ransac::{ransac_plane, remove_seabed, remove_seabed_tiled, PlaneModel, SeabedParams};
pub use segment::{sliding_windows, Segment};
