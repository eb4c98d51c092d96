//! Nearest-neighbour queries over a fixed point set.
//!
//! Below [`BRUTE_FORCE_LIMIT`] points every query is a linear scan; above it a
//! balanced kd-tree is built once. Both paths break distance ties by the lower
//! original index so results never depend on the backend.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::cloud::Vec3;

pub const BRUTE_FORCE_LIMIT: usize = 64;
const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.dist_sq.sqrt()
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist_sq.total_cmp(&other.dist_sq).then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<[f64; 3]>,
    /// Original index of `points[i]`.
    ids: Vec<usize>,
    /// Split axis of the node whose median sits at position `i`; unused for brute force.
    axes: Vec<u8>,
    brute: bool,
}

impl SpatialIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let mut pts: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let brute = points.len() < BRUTE_FORCE_LIMIT;
        let mut axes = vec![0u8; if brute { 0 } else { points.len() }];
        if !brute {
            let mut order: Vec<usize> = (0..pts.len()).collect();
            build(&pts, &mut order, &mut axes, 0);
            pts = order.iter().map(|&i| pts[i]).collect();
            ids = order;
        }
        Self { points: pts, ids, axes, brute }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, q: &Vec3) -> Option<Neighbor> {
        if self.points.is_empty() {
            return None;
        }
        let q = [q.x, q.y, q.z];
        let mut best = Neighbor { index: usize::MAX, dist_sq: f64::INFINITY };
        if self.brute {
            self.scan(0, self.points.len(), &q, &mut |n| {
                if n.key_cmp(&best) == Ordering::Less {
                    best = n;
                }
            });
        } else {
            self.nearest_rec(0, self.points.len(), &q, &mut best);
        }
        Some(best)
    }

    /// Nearest point excluding one original index (used for self-queries).
    pub fn nearest_excluding(&self, q: &Vec3, exclude: usize) -> Option<Neighbor> {
        self.k_nearest(q, 2).into_iter().find(|n| n.index != exclude)
    }

    /// Up to `k` nearest points, sorted by distance then index.
    pub fn k_nearest(&self, q: &Vec3, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let q = [q.x, q.y, q.z];
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if self.brute {
            self.scan(0, self.points.len(), &q, &mut |n| push_bounded(&mut heap, n, k));
        } else {
            self.knn_rec(0, self.points.len(), &q, k, &mut heap);
        }
        heap.into_sorted_vec()
    }

    /// All points with squared distance ≤ `radius²`, unsorted.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<Neighbor> {
        let q = [q.x, q.y, q.z];
        let r2 = radius * radius;
        let mut out = Vec::new();
        if self.brute {
            self.scan(0, self.points.len(), &q, &mut |n| {
                if n.dist_sq <= r2 {
                    out.push(n)
                }
            });
        } else {
            self.within_rec(0, self.points.len(), &q, r2, &mut out);
        }
        out
    }

    fn scan(&self, lo: usize, hi: usize, q: &[f64; 3], f: &mut impl FnMut(Neighbor)) {
        for i in lo..hi {
            f(Neighbor { index: self.ids[i], dist_sq: dist_sq(&self.points[i], q) });
        }
    }

    fn nearest_rec(&self, lo: usize, hi: usize, q: &[f64; 3], best: &mut Neighbor) {
        if hi - lo <= LEAF_SIZE {
            self.scan(lo, hi, q, &mut |n| {
                if n.key_cmp(best) == Ordering::Less {
                    *best = n;
                }
            });
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let n = Neighbor { index: self.ids[mid], dist_sq: dist_sq(&self.points[mid], q) };
        if n.key_cmp(best) == Ordering::Less {
            *best = n;
        }
        let diff = q[axis] - self.points[mid][axis];
        let (first, second) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.nearest_rec(first.0, first.1, q, best);
        if diff * diff <= best.dist_sq {
            self.nearest_rec(second.0, second.1, q, best);
        }
    }

    fn knn_rec(&self, lo: usize, hi: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Neighbor>) {
        if hi - lo <= LEAF_SIZE {
            self.scan(lo, hi, q, &mut |n| push_bounded(heap, n, k));
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        push_bounded(heap, Neighbor { index: self.ids[mid], dist_sq: dist_sq(&self.points[mid], q) }, k);
        let diff = q[axis] - self.points[mid][axis];
        let (first, second) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.knn_rec(first.0, first.1, q, k, heap);
        let bound = if heap.len() < k { f64::INFINITY } else { heap.peek().map_or(f64::INFINITY, |n| n.dist_sq) };
        if diff * diff <= bound {
            self.knn_rec(second.0, second.1, q, k, heap);
        }
    }

    fn within_rec(&self, lo: usize, hi: usize, q: &[f64; 3], r2: f64, out: &mut Vec<Neighbor>) {
        if hi - lo <= LEAF_SIZE {
            self.scan(lo, hi, q, &mut |n| {
                if n.dist_sq <= r2 {
                    out.push(n)
                }
            });
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let d = dist_sq(&self.points[mid], q);
        if d <= r2 {
            out.push(Neighbor { index: self.ids[mid], dist_sq: d });
        }
        let diff = q[axis] - self.points[mid][axis];
        if diff < 0.0 || diff * diff <= r2 {
            self.within_rec(lo, mid, q, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_rec(mid + 1, hi, q, r2, out);
        }
    }
}

fn push_bounded(heap: &mut BinaryHeap<Neighbor>, n: Neighbor, k: usize) {
    if heap.len() < k {
        heap.push(n);
    } else if let Some(top) = heap.peek() {
        if n.key_cmp(top) == Ordering::Less {
            heap.pop();
            heap.push(n);
        }
    }
}

#[inline]
fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Recursively arranges `order[lo..hi]` so the median along the widest axis sits in the
/// middle, records that axis, and recurses into both halves.
fn build(points: &[[f64; 3]], order: &mut [usize], axes: &mut [u8], offset: usize) {
    let n = order.len();
    if n <= LEAF_SIZE {
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    axes[offset + mid] = axis as u8;
    let (left, right) = order.split_at_mut(mid);
    build(points, left, axes, offset);
    build(points, &mut right[1..], axes, offset + mid + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec3::new(rng.r#gen(), rng.r#gen(), rng.r#gen())).collect()
    }

    fn brute(points: &[Vec3], q: &Vec3) -> Neighbor {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| Neighbor { index: i, dist_sq: (p - q).norm_squared() })
            .min()
            .unwrap()
    }

    #[test]
    fn tree_matches_brute_force() {
        let pts = random_points(2000, 1);
        let index = SpatialIndex::new(&pts);
        for q in random_points(300, 2) {
            assert_eq!(index.nearest(&q).unwrap(), brute(&pts, &q));
            let knn = index.k_nearest(&q, 7);
            let mut all: Vec<Neighbor> =
                pts.iter().enumerate().map(|(i, p)| Neighbor { index: i, dist_sq: (p - q).norm_squared() }).collect();
            all.sort();
            assert_eq!(knn, all[..7].to_vec());
            let mut w: Vec<usize> = index.within(&q, 0.1).iter().map(|n| n.index).collect();
            w.sort();
            let expect: Vec<usize> = all.iter().filter(|n| n.dist_sq <= 0.01).map(|n| n.index).collect::<Vec<_>>();
            let mut expect = expect;
            expect.sort();
            assert_eq!(w, expect);
        }
    }

    #[test]
    fn lattice_with_shared_coordinates() {
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                for k in 0..12 {
                    pts.push(Vec3::new(i as f64, j as f64, k as f64));
                }
            }
        }
        let index = SpatialIndex::new(&pts);
        for (i, p) in pts.iter().enumerate().step_by(37) {
            let n = index.nearest(p).unwrap();
            assert_eq!(n.index, i);
            assert_eq!(index.nearest_excluding(p, i).unwrap().dist_sq, 1.0);
        }
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let pts = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)];
        let index = SpatialIndex::new(&pts);
        assert_eq!(index.nearest(&Vec3::zeros()).unwrap().index, 0);
    }
}
