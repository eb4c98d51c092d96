use std::collections::HashMap;
use std::sync::OnceLock;

use super::grid::GridValues;
use crate::geometry::Vec3;
use crate::mesh::TriMesh;

/// Cube edges as corner pairs; corner `c` sits at offset `(c & 1, c >> 1 & 1, c >> 2 & 1)`.
const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Faces as corner cycles with their outward normal.
const FACES: [([usize; 4], [f64; 3]); 6] = [
    ([0, 2, 6, 4], [-1.0, 0.0, 0.0]),
    ([1, 3, 7, 5], [1.0, 0.0, 0.0]),
    ([0, 1, 5, 4], [0.0, -1.0, 0.0]),
    ([2, 3, 7, 6], [0.0, 1.0, 0.0]),
    ([0, 1, 3, 2], [0.0, 0.0, -1.0]),
    ([4, 5, 7, 6], [0.0, 0.0, 1.0]),
];

fn corner_offset(c: usize) -> Vec3 {
    Vec3::new((c & 1) as f64, (c >> 1 & 1) as f64, (c >> 2 & 1) as f64)
}

fn edge_id(a: usize, b: usize) -> usize {
    EDGES.iter().position(|&(x, y)| (x, y) == (a.min(b), a.max(b))).expect("adjacent corners")
}

fn edge_mid(e: usize) -> Vec3 {
    let (a, b) = EDGES[e];
    (corner_offset(a) + corner_offset(b)) * 0.5
}

/// Directed segment on a face, oriented so that polygons wind counter-clockwise
/// around the outward (increasing-field) normal.
fn oriented(e1: usize, e2: usize, inside_centroid: Vec3, outside_centroid: Vec3, normal: Vec3) -> (usize, usize) {
    let g = outside_centroid - inside_centroid;
    let d = edge_mid(e2) - edge_mid(e1);
    if d.dot(&g.cross(&normal)) >= 0.0 { (e1, e2) } else { (e2, e1) }
}

fn mean(corners: impl Iterator<Item = usize>) -> Vec3 {
    let (mut sum, mut n) = (Vec3::zeros(), 0.0);
    for c in corners {
        sum += corner_offset(c);
        n += 1.0;
    }
    sum / n
}

/// Polygons (cycles of edge ids) for one configuration; bit `c` set = corner `c` inside.
///
/// Each face contributes segments between its crossing edges. Faces with four
/// crossings separate the inside corners, a rule that depends on the face alone,
/// so neighbouring cubes always agree.
fn polygons_for(case: u8) -> Vec<Vec<usize>> {
    let inside = |c: usize| case >> c & 1 == 1;
    let mut next = [usize::MAX; 12];
    for (corners, n) in FACES {
        let normal = Vec3::new(n[0], n[1], n[2]);
        let crossing: Vec<usize> = (0..4).filter(|&i| inside(corners[i]) != inside(corners[(i + 1) % 4])).collect();
        match crossing.len() {
            0 => {}
            2 => {
                let e1 = edge_id(corners[crossing[0]], corners[(crossing[0] + 1) % 4]);
                let e2 = edge_id(corners[crossing[1]], corners[(crossing[1] + 1) % 4]);
                let ins = mean(corners.iter().copied().filter(|&c| inside(c)));
                let out = mean(corners.iter().copied().filter(|&c| !inside(c)));
                let (a, b) = oriented(e1, e2, ins, out, normal);
                next[a] = b;
            }
            4 => {
                for i in (0..4).filter(|&i| inside(corners[i])) {
                    let prev = corners[(i + 3) % 4];
                    let e1 = edge_id(prev, corners[i]);
                    let e2 = edge_id(corners[i], corners[(i + 1) % 4]);
                    let out = mean((0..4).filter(|&k| k != i).map(|k| corners[k]));
                    let (a, b) = oriented(e1, e2, corner_offset(corners[i]), out, normal);
                    next[a] = b;
                }
            }
            _ => unreachable!("a cycle crosses an even number of times"),
        }
    }
    let mut seen = [false; 12];
    let mut polys = Vec::new();
    for start in 0..12 {
        if next[start] == usize::MAX || seen[start] {
            continue;
        }
        let mut poly = Vec::new();
        let mut e = start;
        while !seen[e] {
            seen[e] = true;
            poly.push(e);
            e = next[e];
        }
        polys.push(poly);
    }
    polys
}

fn case_table() -> &'static [Vec<Vec<usize>>] {
    static TABLE: OnceLock<Vec<Vec<Vec<usize>>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..=255u8).map(polygons_for).collect())
}

/// Triangulates the zero level set. Vertices are linearly interpolated on lattice
/// edges and shared between neighbouring cells; faces point towards positive values.
pub fn marching_cubes(grid: &GridValues) -> TriMesh {
    let lat = &grid.lattice;
    let n = lat.resolution;
    let table = case_table();
    let mut vertex_of: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let corner_index = |i: usize, j: usize, k: usize, c: usize| lat.index(i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1));
    for i in 0..n.saturating_sub(1) {
        for j in 0..n - 1 {
            for k in 0..n - 1 {
                let vals: [f64; 8] = std::array::from_fn(|c| grid.values[corner_index(i, j, k, c)]);
                let case = (0..8).fold(0u8, |acc, c| acc | (((vals[c] < 0.0) as u8) << c));
                if case == 0 || case == 255 {
                    continue;
                }
                for poly in &table[case as usize] {
                    let ids: Vec<usize> = poly
                        .iter()
                        .map(|&e| {
                            let (a, b) = EDGES[e];
                            let axis = match b - a {
                                1 => 0,
                                2 => 1,
                                _ => 2,
                            };
                            let key = corner_index(i, j, k, a) * 3 + axis;
                            *vertex_of.entry(key).or_insert_with(|| {
                                let t = vals[a] / (vals[a] - vals[b]);
                                let pa = lat.vertex(i, j, k) + corner_offset(a) * lat.edge;
                                let pb = lat.vertex(i, j, k) + corner_offset(b) * lat.edge;
                                vertices.push(pa + (pb - pa) * t);
                                vertices.len() - 1
                            })
                        })
                        .collect();
                    for m in 1..ids.len() - 1 {
                        triangles.push([ids[0], ids[m], ids[m + 1]]);
                    }
                }
            }
        }
    }
    if triangles.is_empty() {
        log::warn!("marching cubes: the level set does not cross the grid");
    }
    TriMesh { vertices, triangles }
}
