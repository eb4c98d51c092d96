//! Procedural point sets used by tests, examples and the benchmark harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::cloud::Vec3;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653; // π(3 − √5)

/// Unit directions on the Fibonacci spiral; `z` runs from near +1 down to near −1.
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = GOLDEN_ANGLE * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

pub fn fibonacci_sphere_points(n: usize, radius: f64) -> Vec<Vec3> {
    fibonacci_directions(n).into_iter().map(|d| d * radius).collect()
}

pub fn random_unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform random samples on a sphere of `radius` about the origin.
pub fn random_sphere_points(n: usize, radius: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_unit_vector(&mut rng) * radius).collect()
}

/// Uniform samples on the `z ≥ 0` half of a sphere.
pub fn random_hemisphere_points(n: usize, radius: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut v = random_unit_vector(&mut rng);
            v.z = v.z.abs();
            v * radius
        })
        .collect()
}

/// Uniform samples inside a ball of `radius`.
pub fn random_ball_points(n: usize, radius: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = radius * rng.r#gen::<f64>().cbrt();
            random_unit_vector(&mut rng) * r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_is_on_sphere() {
        for p in fibonacci_sphere_points(100, 2.0) {
            assert!((p.norm() - 2.0).abs() < 1e-12);
        }
        assert_eq!(fibonacci_directions(1)[0], Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn hemisphere_is_upper() {
        assert!(random_hemisphere_points(500, 1.0, 3).iter().all(|p| p.z >= 0.0));
        assert!(random_ball_points(500, 0.7, 3).iter().all(|p| p.norm() <= 0.7));
    }
}
