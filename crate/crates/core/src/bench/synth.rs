use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3, farthest_point_sample};
use crate::mesh::{Bvh, TriMesh};

/// Virtual scanner used to cut partial clouds out of meshes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSetup {
    pub elevation: f64,
    /// Azimuth of the first camera, degrees.
    pub first_azimuth: f64,
    /// Azimuth between consecutive cameras, degrees.
    pub azimuth_step: f64,
    pub fov_y: f64,
    pub resolution: usize,
    /// Camera distance as a multiple of the mesh's bounding-sphere radius.
    pub radius_factor: f64,
    /// Farthest-point sample the merged scan to this many points.
    pub points: Option<usize>,
}

impl Default for ScanSetup {
    fn default() -> Self {
        Self {
            elevation: 0.0,
            first_azimuth: -140.0,
            azimuth_step: 15.0,
            fov_y: 80.0,
            resolution: 256,
            radius_factor: 2.0,
            points: Some(2048),
        }
    }
}

impl ScanSetup {
    /// Camera `i` of a scan.
    pub fn pose(&self, mesh: &TriMesh, i: usize) -> CameraPose {
        let bbox = mesh.bounding_box();
        let center = bbox.center();
        let radius = mesh.vertices.iter().map(|v| (v - center).norm()).fold(0.0, f64::max);
        CameraPose::new(self.elevation, self.first_azimuth + self.azimuth_step * i as f64, self.radius_factor * radius)
            .with_target(center)
    }
}

/// A ray-cast depth map, kept as back-projected hit points.
#[derive(Debug, Clone)]
pub struct DepthScan {
    pub points: Vec<Vec3>,
    /// Mean world-space width of a pixel at the hit depths.
    pub pixel_footprint: f64,
}

/// Ray-casts one depth map: one ray through every pixel centre.
pub fn scan_view(bvh: &Bvh, pose: &CameraPose, intr: &CameraIntrinsics) -> DepthScan {
    let rt = pose.rotation().transpose();
    let eye = pose.eye();
    let f = intr.focal();
    let (cx, cy) = (intr.width as f64 / 2.0, intr.height as f64 / 2.0);
    let mut points = Vec::new();
    let mut depth_sum = 0.0;
    for y in 0..intr.height {
        for x in 0..intr.width {
            let cam = Vec3::new((x as f64 + 0.5 - cx) / f, (y as f64 + 0.5 - cy) / f, 1.0);
            let dir = (rt * cam).normalize();
            if let Some(hit) = bvh.intersect(&eye, &dir) {
                let p = eye + dir * hit.t;
                depth_sum += (rt.transpose() * (p - eye)).z;
                points.push(p);
            }
        }
    }
    let pixel_footprint = if points.is_empty() { 0.0 } else { depth_sum / points.len() as f64 / f };
    DepthScan { points, pixel_footprint }
}

/// Keeps the first point of every cluster closer than `radius`.
fn dedup_within(points: &[Vec3], radius: f64) -> Vec<Vec3> {
    if radius <= 0.0 {
        return points.to_vec();
    }
    let key = |p: &Vec3| ((p.x / radius).floor() as i64, (p.y / radius).floor() as i64, (p.z / radius).floor() as i64);
    let mut cells: HashMap<(i64, i64, i64), Vec<Vec3>> = HashMap::new();
    let mut kept = Vec::new();
    let r2 = radius * radius;
    for p in points {
        let (i, j, k) = key(p);
        let mut close = false;
        'search: for di in -1..=1 {
            for dj in -1..=1 {
                for dk in -1..=1 {
                    if let Some(cell) = cells.get(&(i + di, j + dj, k + dk)) {
                        if cell.iter().any(|q| (q - p).norm_squared() < r2) {
                            close = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !close {
            cells.entry((i, j, k)).or_default().push(*p);
            kept.push(*p);
        }
    }
    kept
}

/// Partial cloud from `level` consecutive depth maps around the mesh.
///
/// Hits are merged, de-duplicated within half the mean pixel footprint and
/// farthest-point sampled to the configured size (starting point drawn from `seed`).
pub fn synth_partial_from_mesh(mesh: &TriMesh, level: usize, seed: u64, setup: &ScanSetup) -> Result<PointCloud> {
    if level == 0 {
        return Err(Error::precondition("incompleteness level must be at least 1"));
    }
    if mesh.is_empty() {
        return Err(Error::InvalidInput("cannot scan an empty mesh".into()));
    }
    let intr = CameraIntrinsics::square(setup.resolution, setup.fov_y);
    intr.validate()?;
    let bvh = Bvh::new(mesh);
    let mut merged = Vec::new();
    let mut footprint = 0.0;
    for i in 0..level {
        let pose = setup.pose(mesh, i);
        let scan = scan_view(&bvh, &pose, &intr);
        if scan.points.is_empty() {
            return Err(Error::precondition(format!(
                "camera {i} (azimuth {:.1}°) sees nothing; check the scan setup",
                pose.azimuth
            )));
        }
        footprint += scan.pixel_footprint / level as f64;
        merged.extend(scan.points);
    }
    let unique = dedup_within(&merged, 0.5 * footprint);
    let cloud = PointCloud::new(unique)?;
    match setup.points {
        Some(n) if n < cloud.len() => farthest_point_sample(&cloud, n, seed),
        _ => Ok(cloud),
    }
}

/// Per-coordinate Gaussian perturbation. Normals, if any, are kept.
pub fn add_noise(cloud: &PointCloud, std: f64, seed: u64) -> Result<PointCloud> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::precondition("noise std must be finite and non-negative"));
    }
    if std == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, std).expect("valid std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec3> = cloud
        .points()
        .iter()
        .map(|p| p + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    match cloud.normals() {
        Some(n) => PointCloud::with_normals(points, n.to_vec()),
        None => PointCloud::new(points),
    }
}
