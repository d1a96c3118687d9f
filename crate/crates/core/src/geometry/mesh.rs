use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::types::{Point3, RigidTransform, Vec3};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        let m = Vec3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// An indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
}

const MIN_TRIANGLE_AREA: f64 = 1e-14;

impl TriangleMesh {
    /// Validates indices and rejects zero-area triangles.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = TriangleMesh {
            vertices,
            triangles,
        };
        for (i, t) in mesh.triangles.iter().enumerate() {
            if t.iter().any(|&v| v as usize >= mesh.vertices.len()) {
                return Err(Error::InvalidInput(format!(
                    "triangle {i} references a vertex out of range"
                )));
            }
            if mesh.triangle_area(i) <= MIN_TRIANGLE_AREA {
                return Err(Error::InvalidInput(format!("triangle {i} is degenerate")));
            }
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn corners(&self, tri: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[tri];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.corners(tri);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Signed enclosed volume; positive for outward-facing closed meshes.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.corners(i);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    /// True when every undirected edge borders exactly two triangles.
    pub fn is_closed(&self) -> bool {
        let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        counts.values().all(|&n| n == 2)
    }

    /// True when each directed edge appears once, i.e. neighbors agree on winding.
    pub fn is_consistently_wound(&self) -> bool {
        let mut seen: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *seen.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        seen.iter()
            .all(|(&(a, b), &n)| n == 1 && seen.get(&(b, a)) == Some(&1))
    }

    pub(crate) fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    pub(crate) fn flip_winding(&mut self) {
        for t in &mut self.triangles {
            t.swap(1, 2);
        }
    }

    pub(crate) fn map_vertices(&mut self, f: impl Fn(&Point3) -> Point3) {
        for v in &mut self.vertices {
            *v = f(v);
        }
    }

    pub fn write_ascii_stl(&self, w: &mut impl Write, name: &str) -> std::io::Result<()> {
        writeln!(w, "solid {name}")?;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.corners(i);
            let n = (b - a).cross(&(c - a)).normalize();
            writeln!(w, "  facet normal {} {} {}", n.x, n.y, n.z)?;
            writeln!(w, "    outer loop")?;
            for v in [a, b, c] {
                writeln!(w, "      vertex {} {} {}", v.x, v.y, v.z)?;
            }
            writeln!(w, "    endloop")?;
            writeln!(w, "  endfacet")?;
        }
        writeln!(w, "endsolid {name}")
    }

    pub fn write_ascii_ply(&self, w: &mut impl Write) -> std::io::Result<()> {
        write!(
            w,
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
            self.vertices.len(),
            self.triangles.len()
        )?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

pub fn mesh_aabb(mesh: &TriangleMesh) -> Aabb {
    let mut b = Aabb::empty();
    for v in mesh.vertices() {
        b.grow(v);
    }
    b
}

pub fn transform_mesh(mesh: &TriangleMesh, t: &RigidTransform) -> TriangleMesh {
    let mut out = mesh.clone();
    out.map_vertices(|p| t.apply(p));
    out
}

/// Closed box spanning `min`..`max`, outward winding.
pub fn box_mesh(min: Point3, max: Point3) -> Result<TriangleMesh> {
    let v = |x: bool, y: bool, z: bool| {
        Point3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    let vertices = vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::new(vertices, triangles)
}
