use super::TriMesh;
use crate::geometry::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Distance along the (unit) ray direction.
    pub t: f64,
    pub triangle: usize,
}

#[derive(Debug, Clone)]
struct Node {
    min: Vec3,
    max: Vec3,
    /// Leaf: range into `order`; inner: children indices.
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Bounding volume hierarchy over a mesh's triangles, median split on the widest axis.
#[derive(Debug, Clone)]
pub struct Bvh<'a> {
    mesh: &'a TriMesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl<'a> Bvh<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let mut order: Vec<usize> = (0..mesh.triangles.len()).collect();
        let centroids: Vec<Vec3> = (0..mesh.triangles.len())
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                (a + b + c) / 3.0
            })
            .collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            build(mesh, &centroids, &mut order, 0, mesh.triangles.len(), &mut nodes);
        }
        Self { mesh, nodes, order }
    }

    /// Closest intersection with `t > 1e-9` along `origin + t·dir`.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<RayHit> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let limit = best.map_or(f64::INFINITY, |h| h.t);
            if !slab(origin, &inv, &node.min, &node.max, limit) {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => {
                    for &t in &self.order[node.start..node.end] {
                        if let Some(d) = moller_trumbore(origin, dir, &self.mesh.corners(t)) {
                            if best.is_none_or(|b| d < b.t) {
                                best = Some(RayHit { t: d, triangle: t });
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

fn build(mesh: &TriMesh, centroids: &[Vec3], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let mut min = Vec3::repeat(f64::INFINITY);
    let mut max = Vec3::repeat(f64::NEG_INFINITY);
    for &t in &order[start..end] {
        for p in mesh.corners(t) {
            min = min.inf(&p);
            max = max.sup(&p);
        }
    }
    let id = nodes.len();
    nodes.push(Node { min, max, start, end, children: None });
    if end - start <= LEAF_SIZE {
        return id;
    }
    let axis = (max - min).imax();
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |a, b| centroids[*a][axis].total_cmp(&centroids[*b][axis]));
    let l = build(mesh, centroids, order, start, mid, nodes);
    let r = build(mesh, centroids, order, mid, end, nodes);
    nodes[id].children = Some((l, r));
    id
}

fn slab(origin: &Vec3, inv: &Vec3, min: &Vec3, max: &Vec3, limit: f64) -> bool {
    let mut t0: f64 = 0.0;
    let mut t1 = limit;
    for k in 0..3 {
        let a = (min[k] - origin[k]) * inv[k];
        let b = (max[k] - origin[k]) * inv[k];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        // NaN from 0·∞ (ray in the slab plane) leaves the interval unchanged.
        if lo > t0 {
            t0 = lo;
        }
        if hi < t1 {
            t1 = hi;
        }
        if t0 > t1 {
            return false;
        }
    }
    true
}

fn moller_trumbore(origin: &Vec3, dir: &Vec3, [a, b, c]: &[Vec3; 3]) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 1e-9).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_mesh, icosphere};

    #[test]
    fn matches_brute_force() {
        let m = icosphere(2, 1.0);
        let bvh = Bvh::new(&m);
        let origin = Vec3::new(0.1, -3.0, 0.2);
        for k in 0..50 {
            let target = Vec3::new(-0.5 + 0.02 * k as f64, 0.0, 0.3 - 0.01 * k as f64);
            let dir = (target - origin).normalize();
            let brute = (0..m.triangles.len())
                .filter_map(|t| moller_trumbore(&origin, &dir, &m.corners(t)).map(|d| (d, t)))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let hit = bvh.intersect(&origin, &dir);
            assert_eq!(hit.map(|h| h.t), brute.map(|b| b.0));
        }
    }

    #[test]
    fn axis_aligned_ray_hits_box_face() {
        let m = box_mesh(Vec3::repeat(2.0));
        let hit = Bvh::new(&m).intersect(&Vec3::new(0.2, 0.3, 5.0), &-Vec3::z()).unwrap();
        assert!((hit.t - 4.0).abs() < 1e-12);
        assert!(Bvh::new(&m).intersect(&Vec3::new(3.0, 0.0, 5.0), &-Vec3::z()).is_none());
    }
}
