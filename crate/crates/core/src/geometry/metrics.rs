//! Distances between point sets: L1 Chamfer and an auction-based EMD.

use super::cloud::{PointCloud, Vec3};
use super::index::SpatialIndex;
use super::sampling::farthest_point_sample;
use crate::error::{Error, Result};

/// Mean distance from each point of `from` to its nearest point in `to`.
pub fn directional_mean_nn(from: &[Vec3], to: &SpatialIndex) -> f64 {
    let sum: f64 = from.iter().map(|p| to.nearest(p).map_or(0.0, |n| n.dist())).sum();
    sum / from.len() as f64
}

/// L1 Chamfer distance, halved-sum convention:
/// `½ (mean_a min_b ‖a−b‖ + mean_b min_a ‖a−b‖)`.
pub fn chamfer_l1(a: &PointCloud, b: &PointCloud) -> f64 {
    chamfer_l1_points(a.points(), b.points())
}

pub fn chamfer_l1_points(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ia = SpatialIndex::new(a);
    let ib = SpatialIndex::new(b);
    0.5 * (directional_mean_nn(a, &ib) + directional_mean_nn(b, &ia))
}

#[derive(Debug, Clone, Copy)]
pub struct EmdOptions {
    /// Common cardinality both clouds are brought to before matching.
    pub size: usize,
    /// Final auction ε as a fraction of the joint bounding-box diagonal.
    pub epsilon_fraction: f64,
    pub seed: u64,
}

impl Default for EmdOptions {
    fn default() -> Self {
        Self { size: 2048, epsilon_fraction: 1e-3, seed: 0 }
    }
}

/// Approximate Earth Mover's distance: both clouds are farthest-point sampled
/// (or cyclically padded) to `opts.size`, then matched one-to-one by ε-scaled auction.
/// Returns the mean per-point transport cost.
pub fn emd_approx(a: &PointCloud, b: &PointCloud, opts: &EmdOptions) -> Result<f64> {
    let pa = resample_to(a, opts.size, opts.seed)?;
    let pb = resample_to(b, opts.size, opts.seed)?;
    if pa.len() != pb.len() {
        return Err(Error::Internal("EMD resampling produced mismatched sizes".into()));
    }
    let diag = super::cloud::Aabb::from_points(&[pa.as_slice(), pb.as_slice()].concat()).diagonal();
    let eps = (opts.epsilon_fraction * diag).max(1e-12);
    let assignment = auction_assignment(&pa, &pb, eps);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| (pa[i] - pb[j]).norm()).sum();
    Ok(total / pa.len() as f64)
}

fn resample_to(cloud: &PointCloud, size: usize, seed: u64) -> Result<Vec<Vec3>> {
    if size == 0 {
        return Err(Error::precondition("EMD size must be positive"));
    }
    match cloud.len() {
        n if n == size => Ok(cloud.points().to_vec()),
        n if n > size => Ok(farthest_point_sample(cloud, size, seed)?.into_points()),
        n => Ok((0..size).map(|i| cloud.points()[i % n]).collect()),
    }
}

/// Forward auction for the min-cost perfect matching between equal-size sets under
/// Euclidean cost. ε is scaled down geometrically to `final_eps`; the result costs at
/// most `n·final_eps` more than optimal.
pub fn auction_assignment(a: &[Vec3], b: &[Vec3], final_eps: f64) -> Vec<usize> {
    let n = a.len();
    assert_eq!(n, b.len(), "auction needs equal-size sets");
    if n == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| (a[i] - b[j]).norm();
    let max_cost = (0..n).map(|i| cost(i, 0)).fold(0.0, f64::max).max(final_eps);

    let mut prices = vec![0.0f64; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut eps = (max_cost / 4.0).max(final_eps);

    loop {
        owner.iter_mut().for_each(|o| *o = None);
        assigned.iter_mut().for_each(|o| *o = None);
        let mut queue: Vec<usize> = (0..n).rev().collect();
        while let Some(i) = queue.pop() {
            let mut best_j = 0;
            let mut best = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            for j in 0..n {
                let v = -cost(i, j) - prices[j];
                if v > best {
                    second = best;
                    best = v;
                    best_j = j;
                } else if v > second {
                    second = v;
                }
            }
            let increment = if second.is_finite() { best - second + eps } else { eps };
            prices[best_j] += increment;
            if let Some(prev) = owner[best_j].replace(i) {
                assigned[prev] = None;
                queue.push(prev);
            }
            assigned[i] = Some(best_j);
        }
        if eps <= final_eps {
            break;
        }
        eps = (eps / 5.0).max(final_eps);
    }
    assigned.into_iter().map(|j| j.expect("auction terminates with a full assignment")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new((0..n).map(|_| Vec3::new(rng.r#gen(), rng.r#gen(), rng.r#gen())).collect()).unwrap()
    }

    #[test]
    fn chamfer_identity_and_single_pair() {
        let c = random_cloud(50, 3);
        assert_eq!(chamfer_l1(&c, &c), 0.0);
        let a = PointCloud::from_slices(&[[0.0, 0.0, 0.0]]).unwrap();
        let b = PointCloud::from_slices(&[[1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(chamfer_l1(&a, &b), 1.0);
    }

    #[test]
    fn emd_identity_and_shift() {
        let c = random_cloud(64, 4);
        let opts = EmdOptions { size: 64, ..Default::default() };
        assert!(emd_approx(&c, &c, &opts).unwrap().abs() < 1e-12);
        let t = Vec3::new(0.3, -0.2, 0.1);
        let shifted = c.map_points(|p| p + t);
        let emd = emd_approx(&c, &shifted, &opts).unwrap();
        // Identity matching achieves ‖t‖ and no matching can do better.
        assert!((emd - t.norm()).abs() < 64.0 * 1e-3 * 2.0, "emd {emd} vs {}", t.norm());
        assert!(emd >= t.norm() - 1e-9);
    }

    #[test]
    fn padding_repeats_points() {
        let c = random_cloud(5, 9);
        let padded = resample_to(&c, 12, 0).unwrap();
        assert_eq!(padded.len(), 12);
        assert_eq!(padded[7], c.points()[2]);
    }
}
