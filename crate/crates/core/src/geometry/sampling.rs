use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cloud::{PointCloud, Vec3};
use super::index::SpatialIndex;
use crate::error::{Error, Result};

/// Distance from every point to its closest *other* point.
pub fn nearest_neighbor_distances(cloud: &PointCloud) -> Result<Vec<f64>> {
    nearest_neighbor_distances_of(cloud.points())
}

pub fn nearest_neighbor_distances_of(points: &[Vec3]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::precondition("nearest-neighbour distances need at least two points"));
    }
    let index = SpatialIndex::new(points);
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| index.nearest_excluding(p, i).map_or(0.0, |n| n.dist()))
        .collect())
}

pub fn mean_nearest_neighbor_distance(points: &[Vec3]) -> Result<f64> {
    let d = nearest_neighbor_distances_of(points)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Coefficient of variation (std / mean) of nearest-neighbour distances; a uniformity statistic.
pub fn nn_distance_cv(points: &[Vec3]) -> Result<f64> {
    let d = nearest_neighbor_distances_of(points)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Greedy farthest-point sampling. The first pick is drawn from `seed`; every later
/// pick maximises the distance to the already chosen set (ties → lowest index).
pub fn farthest_point_sample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    let idx = farthest_point_indices(cloud.points(), n, seed)?;
    cloud.select(&idx)
}

pub fn farthest_point_indices(points: &[Vec3], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > points.len() {
        return Err(Error::precondition(format!("cannot sample {n} points from {}", points.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..points.len());
    farthest_point_indices_from(points, n, first)
}

pub fn farthest_point_indices_from(points: &[Vec3], n: usize, first: usize) -> Result<Vec<usize>> {
    if n > points.len() {
        return Err(Error::precondition(format!("cannot sample {n} points from {}", points.len())));
    }
    let mut chosen = Vec::with_capacity(n);
    if n == 0 {
        return Ok(chosen);
    }
    let mut min_d = vec![f64::INFINITY; points.len()];
    let mut current = first;
    for _ in 0..n {
        chosen.push(current);
        let c = points[current];
        let mut best = 0usize;
        let mut best_d = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d < min_d[i] {
                min_d[i] = d;
            }
            if min_d[i] > best_d {
                best_d = min_d[i];
                best = i;
            }
        }
        current = best;
    }
    Ok(chosen)
}
