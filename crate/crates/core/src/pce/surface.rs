use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, fibonacci_sphere_poses, frontmost_filter};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::render::GaussianSet;

/// Views used by surface extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceViews {
    pub count: usize,
    /// Orbit radius as a multiple of the opaque centres' bounding-sphere radius.
    pub radius_factor: f64,
    /// Side of the square depth buffer.
    pub resolution: usize,
    /// Vertical field of view, degrees.
    pub fov_y: f64,
}

impl Default for SurfaceViews {
    fn default() -> Self {
        Self { count: 500, radius_factor: 2.5, resolution: 256, fov_y: crate::camera::DEFAULT_FOV_Y }
    }
}

impl SurfaceViews {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::square(self.resolution, self.fov_y)
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceExtraction {
    pub points: PointCloud,
    /// Sorted, unique indices into the concatenation of the input sets.
    pub indices: Vec<usize>,
}

/// Keeps opaque Gaussians, then the union of the frontmost ones over a sphere of
/// views, de-duplicated.
pub fn gaussian_surface_extraction(sets: &[&GaussianSet], views: &SurfaceViews) -> Result<SurfaceExtraction> {
    let all: Vec<Vec3> = sets.iter().flat_map(|s| s.centers.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::precondition("surface extraction needs Gaussians"));
    }
    let opaque: Vec<Vec3> = sets
        .iter()
        .flat_map(|s| (0..s.len()).filter(|&i| s.is_opaque(i)).map(|i| s.centers[i]))
        .collect();
    if opaque.is_empty() {
        return Err(Error::AllTransparent);
    }
    let cloud = PointCloud::new(opaque)?;
    let target = cloud.bounding_box().center();
    if views.count == 0 {
        return Err(Error::precondition("surface extraction needs at least one view"));
    }
    let intr = views.intrinsics();
    intr.validate()?;
    // Coincident centres would otherwise put every camera inside the near plane.
    let radius = (views.radius_factor * cloud.bounding_radius()).max(10.0 * intr.near);
    let poses = fibonacci_sphere_poses(views.count, radius, target);
    let per_view: Vec<Vec<usize>> = poses.par_iter().map(|pose| frontmost_filter(sets, pose, &intr)).collect();
    let mut indices: Vec<usize> = per_view.into_iter().flatten().collect();
    indices.sort_unstable();
    indices.dedup();
    let points = PointCloud::new(indices.iter().map(|&i| all[i]).collect())?;
    Ok(SurfaceExtraction { points, indices })
}
