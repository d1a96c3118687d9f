//! Object meshes, ray casting and the BVH used for beam simulation.

pub mod bvh;
pub mod mesh;
pub mod shapes;

pub use bvh::{ray_intersect, Hit, Ray, SpatialIndex};
pub use mesh::{box_mesh, mesh_aabb, transform_mesh, Aabb, TriangleMesh};
pub use shapes::{make_mesh, ObjectMeshes, ShapeParams};
