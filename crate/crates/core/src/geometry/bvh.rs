//! Ray casting against triangle soups through a bounding-volume hierarchy.

use super::mesh::{Aabb, TriangleMesh};
use crate::error::{Error, Result};
use crate::types::{Point3, Vec3};

const LEAF_SIZE: usize = 4;
const MIN_RANGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Point3,
    direction: Vec3,
    inv_direction: Vec3,
}

impl Ray {
    /// `direction` is normalized; a zero or non-finite direction is rejected.
    pub fn new(origin: Point3, direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidInput("ray direction must be non-zero".into()));
        }
        let direction = direction / n;
        Ok(Ray {
            origin,
            direction,
            inv_direction: direction.map(|c| 1.0 / c),
        })
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + t * self.direction
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Point3,
    pub range: f64,
    /// Index into the concatenated triangle list of all indexed meshes.
    pub triangle: usize,
}

#[derive(Debug, Clone, Copy)]
struct Triangle {
    v0: Point3,
    e1: Vec3,
    e2: Vec3,
}

impl Triangle {
    /// Möller–Trumbore; returns the ray parameter of a hit in front of the origin.
    #[inline]
    fn intersect(&self, ray: &Ray) -> Option<f64> {
        let p = ray.direction.cross(&self.e2);
        let det = self.e1.dot(&p);
        if det.abs() < 1e-300 {
            return None;
        }
        let inv = 1.0 / det;
        let s = ray.origin - self.v0;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(&self.e1);
        let v = ray.direction.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = self.e2.dot(&q) * inv;
        (t > MIN_RANGE).then_some(t)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`. Interior: index of the left child (right = left + 1).
    first: u32,
    /// Zero for interior nodes.
    count: u32,
}

/// BVH over the triangles of one or more meshes.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    triangles: Vec<Triangle>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

fn slab(bounds: &Aabb, ray: &Ray, t_max: f64) -> Option<f64> {
    let mut t0 = 0.0_f64;
    let mut t1 = t_max;
    for a in 0..3 {
        let ta = (bounds.min[a] - ray.origin[a]) * ray.inv_direction[a];
        let tb = (bounds.max[a] - ray.origin[a]) * ray.inv_direction[a];
        // f64::min/max drop NaN, leaving the slab unbounded when 0 * inf occurs
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t0 <= t1).then_some(t0)
}

impl SpatialIndex {
    pub fn build(meshes: &[&TriangleMesh]) -> Self {
        let mut triangles = Vec::new();
        for mesh in meshes {
            for i in 0..mesh.triangles().len() {
                let [a, b, c] = mesh.corners(i);
                triangles.push(Triangle {
                    v0: a,
                    e1: b - a,
                    e2: c - a,
                });
            }
        }
        let mut index = SpatialIndex {
            order: (0..triangles.len() as u32).collect(),
            triangles,
            nodes: Vec::new(),
        };
        if !index.triangles.is_empty() {
            let boxes: Vec<Aabb> = index.triangles.iter().map(tri_bounds).collect();
            let centers: Vec<Point3> = boxes.iter().map(Aabb::center).collect();
            index.nodes.push(Node {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
            });
            let n = index.order.len();
            index.split(0, 0, n, &boxes, &centers);
        }
        index
    }

    pub fn from_mesh(mesh: &TriangleMesh) -> Self {
        Self::build(&[mesh])
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    fn split(&mut self, node: usize, start: usize, end: usize, boxes: &[Aabb], centers: &[Point3]) {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[start..end] {
            bounds = bounds.merge(&boxes[t as usize]);
            cbounds.grow(&centers[t as usize]);
        }
        self.nodes[node].bounds = bounds;
        let extent = cbounds.extent();
        if end - start <= LEAF_SIZE || extent.max() <= 0.0 {
            self.nodes[node].first = start as u32;
            self.nodes[node].count = (end - start) as u32;
            return;
        }
        let axis = extent.imax();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centers[a as usize][axis]
                .total_cmp(&centers[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = self.nodes.len();
        self.nodes.push(Node {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
        });
        self.nodes.push(Node {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
        });
        self.nodes[node].first = left as u32;
        self.split(left, start, mid, boxes, centers);
        self.split(left + 1, mid, end, boxes, centers);
    }

    /// Nearest hit in front of the ray origin. Equal ranges resolve to the lower triangle index.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let root = self.nodes.first()?;
        let mut best: Option<(f64, u32)> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        slab(&root.bounds, ray, f64::INFINITY)?;
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let limit = best.map_or(f64::INFINITY, |b| b.0);
            if slab(&node.bounds, ray, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                for &ti in &self.order[node.first as usize..(node.first + node.count) as usize] {
                    if let Some(t) = self.triangles[ti as usize].intersect(ray) {
                        if best.is_none_or(|(bt, bi)| t < bt || (t == bt && ti < bi)) {
                            best = Some((t, ti));
                        }
                    }
                }
            } else {
                let (l, r) = (node.first, node.first + 1);
                let tl = slab(&self.nodes[l as usize].bounds, ray, limit);
                let tr = slab(&self.nodes[r as usize].bounds, ray, limit);
                match (tl, tr) {
                    (Some(a), Some(b)) => {
                        // visit the nearer child first
                        if a <= b {
                            stack.push(r);
                            stack.push(l);
                        } else {
                            stack.push(l);
                            stack.push(r);
                        }
                    }
                    (Some(_), None) => stack.push(l),
                    (None, Some(_)) => stack.push(r),
                    (None, None) => {}
                }
            }
        }
        best.map(|(t, ti)| Hit {
            point: ray.at(t),
            range: t,
            triangle: ti as usize,
        })
    }

    /// Reference intersection testing every triangle.
    pub fn intersect_brute_force(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<(f64, usize)> = None;
        for (i, tri) in self.triangles.iter().enumerate() {
            if let Some(t) = tri.intersect(ray) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        best.map(|(t, i)| Hit {
            point: ray.at(t),
            range: t,
            triangle: i,
        })
    }
}

fn tri_bounds(t: &Triangle) -> Aabb {
    let mut b = Aabb::empty();
    b.grow(&t.v0);
    b.grow(&(t.v0 + t.e1));
    b.grow(&(t.v0 + t.e2));
    b
}

pub fn ray_intersect(index: &SpatialIndex, ray: &Ray) -> Option<Hit> {
    index.intersect(ray)
}
