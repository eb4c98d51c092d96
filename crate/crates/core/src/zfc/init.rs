use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ZfcConfig;
use crate::camera::{CameraPose, RelativePose};
use crate::error::{Error, Result};
use crate::geometry::{DEFAULT_NORMAL_NEIGHBORS, PointCloud, Vec3, estimate_normals, mean_nearest_neighbor_distance};
use crate::render::{GaussianSet, colorize_by_normals, logit};

/// Logit of the input Gaussians; any value above 0 binarises to opacity 1.
pub const INPUT_OPACITY_LOGIT: f64 = 4.595_119_850_134_59; // logit(0.99)
pub const COMPLETION_INITIAL_OPACITY: f64 = 0.9;
pub const COMPLETION_INITIAL_COLOR: f64 = 0.5;

/// Adds estimated normals when the cloud has none.
pub fn ensure_normals(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.normals().is_some() {
        return Ok(cloud.clone());
    }
    if cloud.len() < 3 {
        return Err(Error::precondition("normal estimation needs at least three points"));
    }
    estimate_normals(cloud, DEFAULT_NORMAL_NEIGHBORS.min(cloud.len() - 1))
}

/// Frozen Gaussians on the input points: opaque, coloured by normals, scaled by the
/// mean nearest-neighbour distance.
pub fn init_partial_gaussians(p_in: &PointCloud) -> Result<GaussianSet> {
    if p_in.len() < 2 {
        return Err(Error::precondition("partial initialisation needs at least two points"));
    }
    let scale = mean_nearest_neighbor_distance(p_in.points())?;
    let colors = if p_in.normals().is_some() {
        colorize_by_normals(p_in)?
    } else {
        colorize_by_normals(&ensure_normals(p_in)?)?
    };
    let n = p_in.len();
    GaussianSet::new(p_in.points().to_vec(), scale, vec![INPUT_OPACITY_LOGIT; n], colors, true)
}

/// Trainable Gaussians seeded at a noisy copy of the input.
pub fn init_completion_gaussians(p_in: &PointCloud, cfg: &ZfcConfig) -> Result<GaussianSet> {
    let n = p_in.len();
    let m = cfg.completion_size.unwrap_or(n);
    if m < 2 {
        return Err(Error::precondition("completion set needs at least two Gaussians"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let source: Vec<Vec3> = if m == n {
        p_in.points().to_vec()
    } else {
        (0..m).map(|_| p_in.points()[rng.gen_range(0..n)]).collect()
    };
    let centers: Vec<Vec3> = if cfg.sigma_n > 0.0 {
        let normal = Normal::new(0.0, cfg.sigma_n).map_err(|e| Error::precondition(e.to_string()))?;
        source
            .iter()
            .map(|p| p + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect()
    } else {
        source
    };
    let mut scale = mean_nearest_neighbor_distance(&centers)?;
    if scale <= 0.0 {
        scale = mean_nearest_neighbor_distance(p_in.points()).unwrap_or(0.0).max(1e-4);
    }
    GaussianSet::new(
        centers,
        scale,
        vec![logit(COMPLETION_INITIAL_OPACITY); m],
        vec![Vec3::repeat(COMPLETION_INITIAL_COLOR); m],
        false,
    )
}

/// Relative offset and absolute pose of the training view for `step`. The offset is
/// drawn uniformly from the configured ranges with the radius held fixed.
pub fn sample_training_pose(v_p: &CameraPose, cfg: &ZfcConfig, step: usize) -> (RelativePose, CameraPose) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a11);
    rng.set_stream(step as u64);
    let [e0, e1] = cfg.elevation_range;
    let [a0, a1] = cfg.azimuth_range;
    let d_elevation = if e1 > e0 { rng.gen_range(e0..=e1) } else { e0 };
    let d_azimuth = if a1 > a0 { rng.gen_range(a0..a1) } else { a0 };
    let rel = RelativePose { d_elevation, d_azimuth, d_radius: 0.0 };
    (rel, v_p.compose_relative(&rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::binarize_opacity;

    fn lattice(n: usize) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Vec3::new(i as f64, j as f64, 0.0));
            }
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn partial_set_rules() {
        let g = init_partial_gaussians(&lattice(6)).unwrap();
        assert_eq!(g.scale, 1.0);
        assert!(g.frozen);
        assert!(g.opacity_logits.iter().all(|l| binarize_opacity(*l) == 1.0));
        assert!(init_partial_gaussians(&PointCloud::from_slices(&[[0.0; 3]]).unwrap()).is_err());
    }

    #[test]
    fn completion_set_noise() {
        let cloud = PointCloud::new(crate::geometry::shapes::random_sphere_points(4096, 0.5, 1)).unwrap();
        let exact = init_completion_gaussians(&cloud, &ZfcConfig { sigma_n: 0.0, ..Default::default() }).unwrap();
        assert_eq!(exact.centers, cloud.points());
        let cfg = ZfcConfig::default();
        let noisy = init_completion_gaussians(&cloud, &cfg).unwrap();
        for axis in 0..3 {
            let d: Vec<f64> = noisy.centers.iter().zip(cloud.points()).map(|(a, b)| a[axis] - b[axis]).collect();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
            assert!((std - 0.05).abs() < 0.005, "axis {axis}: {std}");
        }
        assert_eq!(noisy, init_completion_gaussians(&cloud, &cfg).unwrap());
        assert!(!noisy.frozen && noisy.opacity_logits.iter().all(|l| binarize_opacity(*l) == 1.0));
        let resized = init_completion_gaussians(&cloud, &ZfcConfig { completion_size: Some(100), ..cfg }).unwrap();
        assert_eq!(resized.len(), 100);
    }

    #[test]
    fn pose_sampling_is_seeded() {
        let vp = CameraPose::new(30.0, 10.0, 1.7);
        let cfg = ZfcConfig { seed: 11, ..Default::default() };
        let (r0, p0) = sample_training_pose(&vp, &cfg, 0);
        assert_eq!(sample_training_pose(&vp, &cfg, 0), (r0, p0));
        assert_ne!(sample_training_pose(&vp, &cfg, 1).0, r0);
        for step in 0..200 {
            let (r, p) = sample_training_pose(&vp, &cfg, step);
            assert_eq!(r.d_radius, 0.0);
            assert!((p.radius - vp.radius).abs() < 1e-12);
            assert!((-45.0..=45.0).contains(&r.d_elevation) && (-180.0..180.0).contains(&r.d_azimuth));
        }
    }
}
