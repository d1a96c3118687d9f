//! Static 3-d tree for nearest-neighbor and radius queries.

use crate::types::Point3;

const LEAF_SIZE: usize = 8;

/// Points are stored in tree order; `ids` maps back to input positions.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    ids: Vec<u32>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut axes = vec![0u8; points.len()];
        build(points, &mut order, &mut axes);
        KdTree {
            points: order.iter().map(|&i| points[i as usize].coords.into()).collect(),
            ids: order,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point within `max_dist`, as `(input index, squared distance)`.
    ///
    /// Equidistant candidates resolve to the lowest input index.
    pub fn nearest(&self, q: &Point3, max_dist: f64) -> Option<(usize, f64)> {
        let q = [q.x, q.y, q.z];
        let mut best = (u32::MAX, max_dist * max_dist);
        let mut found = false;
        self.nearest_in(&q, 0, self.points.len(), &mut best, &mut found);
        found.then_some((best.0 as usize, best.1))
    }

    fn consider(&self, q: &[f64; 3], i: usize, best: &mut (u32, f64), found: &mut bool) {
        let p = &self.points[i];
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
        if d2 < best.1 || (d2 == best.1 && (!*found || self.ids[i] < best.0)) {
            *best = (self.ids[i], d2);
            *found = true;
        }
    }

    fn nearest_in(&self, q: &[f64; 3], lo: usize, hi: usize, best: &mut (u32, f64), found: &mut bool) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                self.consider(q, i, best, found);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let a = self.axes[mid] as usize;
        let diff = q[a] - self.points[mid][a];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(q, near.0, near.1, best, found);
        self.consider(q, mid, best, found);
        if diff * diff <= best.1 {
            self.nearest_in(q, far.0, far.1, best, found);
        }
    }

    /// Input indices of all points within `radius` of `q`, ascending.
    pub fn within(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let q = [q.x, q.y, q.z];
        let mut out = Vec::new();
        self.within_in(&q, radius * radius, 0, self.points.len(), &mut out);
        out.sort_unstable();
        out
    }

    fn within_in(&self, q: &[f64; 3], r2: f64, lo: usize, hi: usize, out: &mut Vec<usize>) {
        let check = |i: usize, out: &mut Vec<usize>| {
            let p = &self.points[i];
            if (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2) <= r2 {
                out.push(self.ids[i] as usize);
            }
        };
        if hi - lo <= LEAF_SIZE {
            (lo..hi).for_each(|i| check(i, out));
            return;
        }
        let mid = (lo + hi) / 2;
        let a = self.axes[mid] as usize;
        let diff = q[a] - self.points[mid][a];
        check(mid, out);
        if diff <= 0.0 || diff * diff <= r2 {
            self.within_in(q, r2, lo, mid, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_in(q, r2, mid + 1, hi, out);
        }
    }
}

fn build(points: &[Point3], order: &mut [u32], axes: &mut [u8]) {
    let n = order.len();
    if n <= LEAF_SIZE {
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = &points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap();
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    let (left, right) = order.split_at_mut(mid);
    let (left_axes, right_axes) = axes.split_at_mut(mid);
    build(points, left, left_axes);
    build(points, &mut right[1..], &mut right_axes[1..]);
}
