//! Synthetic multibeam-echosounder surveys of artificial reef objects, a
//! training-free template-matching detector, and a center-distance mAP evaluator.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod config;
pub mod detect;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod noisechar;
pub mod rng;
pub mod simulate;
pub mod templates;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    Bounds, Detection, ObjectAnnotation, ObjectClass, PerClass, Point3, PointCloud, RigidTransform, Scene,
    Vec3,
};
