//! Triangle meshes: OBJ input/output, primitives, surface sampling and ray casting.

mod bvh;
mod primitives;

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, PointCloud, Vec3};

pub use bvh::{Bvh, RayHit};
pub use primitives::{box_mesh, icosphere, torus};

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidInput(format!("triangle {t:?} indexes past {} vertices", vertices.len())));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("non-finite mesh vertex".into()));
        }
        Ok(Self { vertices, triangles })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalised face normal (twice the area).
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| 0.5 * self.face_normal(t).norm()).sum()
    }

    /// Signed volume; positive for outward-facing triangles of a closed mesh.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// How many triangles use each undirected edge.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_counts().values().all(|&c| c == 2)
    }

    /// `V − E + F` over the vertices referenced by triangles.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i] = true;
            }
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        v - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self { vertices: self.vertices.iter().map(f).collect(), triangles: self.triangles.clone() }
    }

    /// Area-weighted uniform samples on the surface.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<PointCloud> {
        if self.triangles.is_empty() {
            return Err(Error::precondition("cannot sample an empty mesh"));
        }
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            total += 0.5 * self.face_normal(t).norm();
            cumulative.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::DegenerateExtent("mesh has zero area".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.r#gen::<f64>() * total;
            let t = cumulative.partition_point(|c| *c < x).min(self.triangles.len() - 1);
            let [a, b, c] = self.corners(t);
            let (mut u, mut v) = (rng.r#gen::<f64>(), rng.r#gen::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            points.push(a + (b - a) * u + (c - a) * v);
            normals.push(self.face_normal(t).try_normalize(0.0).unwrap_or_else(Vec3::z));
        }
        PointCloud::with_normals(points, normals)
    }

    pub fn write_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.encode_obj(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn encode_obj(&self, w: &mut impl Write) -> Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    /// Reads `v` and `f` records; polygons are fan-triangulated, texture and normal
    /// indices ignored.
    pub fn read_obj(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_obj(&mut BufReader::new(std::fs::File::open(path)?))
    }

    pub fn parse_obj(r: &mut impl BufRead) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let err = |what: &str| Error::Parse(format!("OBJ line {}: {what}", lineno + 1));
            match parts.next() {
                Some("v") => {
                    let c: Vec<f64> = parts.take(3).map(|s| s.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| err("bad vertex"))?;
                    if c.len() != 3 {
                        return Err(err("vertex needs three coordinates"));
                    }
                    vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let idx: Vec<usize> = parts
                        .map(|s| {
                            let first = s.split('/').next().unwrap_or("");
                            let i: i64 = first.parse().map_err(|_| err("bad face index"))?;
                            let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                            usize::try_from(resolved).map_err(|_| err("face index out of range"))
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() < 3 {
                        return Err(err("face needs three vertices"));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Self::new(vertices, triangles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_closed() {
        for m in [icosphere(2, 1.0), torus(1.0, 0.3, 24, 12), box_mesh(Vec3::new(1.0, 2.0, 0.5))] {
            assert!(m.is_watertight());
            assert!(m.signed_volume() > 0.0);
        }
        assert_eq!(icosphere(2, 1.0).euler_characteristic(), 2);
        assert_eq!(torus(1.0, 0.3, 24, 12).euler_characteristic(), 0);
        assert!((box_mesh(Vec3::new(1.0, 2.0, 0.5)).signed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn obj_round_trip_and_polygons() {
        let m = icosphere(1, 0.5);
        let mut buf = Vec::new();
        m.encode_obj(&mut buf).unwrap();
        assert_eq!(TriMesh::parse_obj(&mut buf.as_slice()).unwrap(), m);
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 -1\n";
        let q = TriMesh::parse_obj(&mut quad.as_bytes()).unwrap();
        assert_eq!(q.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(TriMesh::parse_obj(&mut "v 0 0 0\nf 1 2 3\n".as_bytes()).is_err());
    }

    #[test]
    fn surface_samples_lie_on_the_sphere_mesh() {
        let m = icosphere(3, 1.0);
        let s = m.sample_surface(500, 1).unwrap();
        assert!(s.points().iter().all(|p| p.norm() <= 1.0 + 1e-12 && p.norm() > 0.98));
        assert_eq!(s, m.sample_surface(500, 1).unwrap());
    }
}
