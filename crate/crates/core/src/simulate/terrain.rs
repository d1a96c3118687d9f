//! Gradient-noise seabed heightfields.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::rng::{derive, splitmix64};
use crate::types::{Bounds, Point3};

fn lattice_gradient(ix: i64, iy: i64, seed: u64) -> (f64, f64) {
    let h = splitmix64(seed ^ splitmix64((ix as u64).wrapping_mul(0x9e37_79b9) ^ splitmix64(iy as u64)));
    let angle = (h >> 11) as f64 / (1u64 << 53) as f64 * TAU;
    let (s, c) = angle.sin_cos();
    (c, s)
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Classic 2D lattice-gradient noise with unit gradients.
///
/// Zero at integer lattice points, C² smooth, and bounded by `√2/2` in magnitude.
pub fn perlin(x: f64, y: f64, seed: u64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let (dx, dy) = (x - fx, y - fy);
    let corner = |cx: i64, cy: i64, ox: f64, oy: f64| {
        let (gx, gy) = lattice_gradient(ix + cx, iy + cy, seed);
        gx * ox + gy * oy
    };
    let n00 = corner(0, 0, dx, dy);
    let n10 = corner(1, 0, dx - 1.0, dy);
    let n01 = corner(0, 1, dx, dy - 1.0);
    let n11 = corner(1, 1, dx - 1.0, dy - 1.0);
    let (u, v) = (fade(dx), fade(dy));
    lerp(lerp(n00, n10, u), lerp(n01, n11, u), v)
}

/// Fractal (multi-octave) noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainParams {
    pub octaves: u32,
    /// Amplitude of the first octave, meters.
    pub amplitude: f64,
    /// Wavelength of the first octave, meters.
    pub wavelength: f64,
    /// Amplitude ratio between successive octaves.
    pub persistence: f64,
    /// Frequency ratio between successive octaves.
    pub lacunarity: f64,
    /// Grid spacing of the sampled heightfield, meters.
    pub cell_size: f64,
}

impl Default for TerrainParams {
    fn default() -> Self {
        TerrainParams {
            octaves: 4,
            amplitude: 0.25,
            wavelength: 20.0,
            persistence: 0.5,
            lacunarity: 2.0,
            cell_size: 0.25,
        }
    }
}

impl TerrainParams {
    pub fn flat() -> Self {
        TerrainParams {
            amplitude: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0
            && self.wavelength > 0.0
            && self.persistence > 0.0
            && self.lacunarity > 0.0
            && self.cell_size > 0.0)
        {
            return Err(Error::Config(
                "terrain needs amplitude >= 0 and positive wavelength, persistence, lacunarity, cell_size".into(),
            ));
        }
        Ok(())
    }

    /// Upper bound on |height|: the sum of octave amplitudes.
    pub fn amplitude_bound(&self) -> f64 {
        (0..self.octaves)
            .map(|i| self.amplitude * self.persistence.powi(i as i32))
            .sum()
    }

    /// The fractal sum at `(x, y)`.
    pub fn height(&self, x: f64, y: f64, seed: u64) -> f64 {
        let mut sum = 0.0;
        let mut amp = self.amplitude;
        let mut freq = 1.0 / self.wavelength;
        for i in 0..self.octaves {
            if amp == 0.0 {
                break;
            }
            sum += amp * perlin(x * freq, y * freq, derive(seed, i as u64));
            amp *= self.persistence;
            freq *= self.lacunarity;
        }
        sum
    }
}

/// A sampled heightfield over a rectangle.
///
/// Between samples the surface is the piecewise-planar triangulation used by
/// [`TerrainField::to_mesh`], so [`TerrainField::height_at`] agrees with ray casts.
#[derive(Debug, Clone)]
pub struct TerrainField {
    bounds: Bounds,
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    heights: Vec<f64>,
    params: TerrainParams,
    seed: u64,
}

pub fn generate_terrain(bounds: Bounds, params: &TerrainParams, seed: u64) -> Result<TerrainField> {
    params.validate()?;
    let nx = (bounds.width() / params.cell_size).ceil().max(1.0) as usize;
    let ny = (bounds.height() / params.cell_size).ceil().max(1.0) as usize;
    let dx = bounds.width() / nx as f64;
    let dy = bounds.height() / ny as f64;
    let mut heights = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let (x, y) = (bounds.min_x + i as f64 * dx, bounds.min_y + j as f64 * dy);
            heights.push(params.height(x, y, seed));
        }
    }
    Ok(TerrainField {
        bounds,
        nx,
        ny,
        dx,
        dy,
        heights,
        params: *params,
        seed,
    })
}

impl TerrainField {
    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn params(&self) -> &TerrainParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.nx + 1, self.ny + 1)
    }

    pub fn samples(&self) -> &[f64] {
        &self.heights
    }

    fn sample(&self, i: usize, j: usize) -> f64 {
        self.heights[j * (self.nx + 1) + i]
    }

    /// Height of the triangulated surface; positions outside the bounds are clamped.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let u = ((x - self.bounds.min_x) / self.dx).clamp(0.0, self.nx as f64);
        let v = ((y - self.bounds.min_y) / self.dy).clamp(0.0, self.ny as f64);
        let i = (u.floor() as usize).min(self.nx - 1);
        let j = (v.floor() as usize).min(self.ny - 1);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let z00 = self.sample(i, j);
        let z10 = self.sample(i + 1, j);
        let z01 = self.sample(i, j + 1);
        let z11 = self.sample(i + 1, j + 1);
        if fu >= fv {
            z00 + fu * (z10 - z00) + fv * (z11 - z10)
        } else {
            z00 + fv * (z01 - z00) + fu * (z11 - z01)
        }
    }

    pub fn to_mesh(&self) -> TriangleMesh {
        let w = self.nx + 1;
        let mut vertices = Vec::with_capacity(self.heights.len());
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                vertices.push(Point3::new(
                    self.bounds.min_x + i as f64 * self.dx,
                    self.bounds.min_y + j as f64 * self.dy,
                    self.sample(i, j),
                ));
            }
        }
        let mut triangles = Vec::with_capacity(2 * self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let v00 = (j * w + i) as u32;
                let v10 = v00 + 1;
                let v01 = v00 + w as u32;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        TriangleMesh::new(vertices, triangles).expect("grid triangles have positive area")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_on_lattice_points() {
        for seed in [0, 1, 99, u64::MAX] {
            assert_eq!(perlin(3.0, 7.0, seed), 0.0);
            assert_eq!(perlin(-4.0, 0.0, seed), 0.0);
        }
    }

    #[test]
    fn deterministic_across_threads() {
        let a = perlin(0.5, 0.5, 17);
        let b = std::thread::spawn(|| perlin(0.5, 0.5, 17)).join().unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(perlin(0.5, 0.5, 17), perlin(0.5, 0.5, 18));
    }

    #[test]
    fn continuity_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let (x, y) = (rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
            assert!((perlin(x, y, 3) - perlin(x + 1e-4, y, 3)).abs() < 1e-3);
        }
    }

    #[test]
    fn bounded_by_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20_000 {
            let v = perlin(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), 8);
            assert!(v.abs() <= std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
        }
    }

    #[test]
    fn flat_when_amplitude_is_zero() {
        let t = generate_terrain(Bounds::from_size(10.0, 10.0).unwrap(), &TerrainParams::flat(), 4).unwrap();
        assert!(t.samples().iter().all(|&h| h == 0.0));
        assert_eq!(t.height_at(3.3, 7.1), 0.0);
    }

    #[test]
    fn same_seed_same_field() {
        let b = Bounds::from_size(20.0, 20.0).unwrap();
        let p = TerrainParams::default();
        let a = generate_terrain(b, &p, 12).unwrap();
        let c = generate_terrain(b, &p, 12).unwrap();
        assert_eq!(a.samples(), c.samples());
        let d = generate_terrain(b, &p, 13).unwrap();
        assert_ne!(a.samples(), d.samples());
    }

    #[test]
    fn single_octave_amplitude_bound() {
        let p = TerrainParams {
            octaves: 1,
            amplitude: 0.5,
            ..Default::default()
        };
        let mut max = 0.0_f64;
        for i in 0..=400 {
            for j in 0..=400 {
                max = max.max(p.height(i as f64 * 0.1, j as f64 * 0.1, 21).abs());
            }
        }
        assert!(max <= 0.5);
        assert!(max > 0.05);
    }

    #[test]
    fn interpolation_matches_samples_and_mesh() {
        let b = Bounds::from_size(5.0, 4.0).unwrap();
        let t = generate_terrain(b, &TerrainParams::default(), 2).unwrap();
        // at grid nodes the interpolant equals the fractal sum
        assert!((t.height_at(2.5, 1.0) - t.params().height(2.5, 1.0, 2)).abs() < 1e-12);
        let mesh = t.to_mesh();
        assert!(mesh.triangles().len() == 2 * 20 * 16);
        let idx = crate::geometry::SpatialIndex::from_mesh(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (x, y) = (rng.random_range(0.0..5.0), rng.random_range(0.0..4.0));
            let ray = crate::geometry::Ray::new(Point3::new(x, y, 10.0), -crate::types::Vec3::z()).unwrap();
            let hit = idx.intersect(&ray).unwrap();
            assert!((hit.point.z - t.height_at(x, y)).abs() < 1e-9);
        }
    }
}
