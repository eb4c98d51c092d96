//! Look-at cameras, viewpoint sets, projection, the frontmost-Gaussian filter and
//! the reference-viewpoint search.
//!
//! World space is z-up. A pose at elevation `e` and azimuth `a` sits at
//! `target + radius·(cos e cos a, cos e sin a, sin e)` and looks at `target`.
//! Camera space follows the x-right, y-down, z-forward convention, so the
//! world-to-camera rotation is proper (det = +1) and depth is the z coordinate.

use std::io::{BufRead, Write};

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex, Vec3, mean_nearest_neighbor_distance, shapes};
use crate::render::GaussianSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    /// Degrees above the xy-plane.
    pub elevation: f64,
    /// Degrees counter-clockwise from +x.
    pub azimuth: f64,
    pub radius: f64,
    pub target: Vec3,
    pub up_hint: Vec3,
}

/// Pose offset expressed in the orbit frame anchored at a reference pose.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelativePose {
    pub d_elevation: f64,
    pub d_azimuth: f64,
    pub d_radius: f64,
}

impl CameraPose {
    pub fn new(elevation: f64, azimuth: f64, radius: f64) -> Self {
        Self { elevation, azimuth, radius, target: Vec3::zeros(), up_hint: Vec3::z() }
    }

    pub fn with_target(mut self, target: Vec3) -> Self {
        self.target = target;
        self
    }

    pub fn from_direction(dir: &Vec3, radius: f64, target: Vec3) -> Self {
        let d = dir.normalize();
        let elevation = d.z.clamp(-1.0, 1.0).asin().to_degrees();
        let azimuth = d.y.atan2(d.x).to_degrees();
        Self { elevation, azimuth, radius, target, up_hint: Vec3::z() }
    }

    /// Unit vector from the target towards the eye.
    pub fn direction(&self) -> Vec3 {
        let (e, a) = (self.elevation.to_radians(), self.azimuth.to_radians());
        Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin())
    }

    pub fn eye(&self) -> Vec3 {
        self.target + self.direction() * self.radius
    }

    /// Rows are the camera's right, down and forward axes in world coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        let forward = -self.direction();
        let mut up = self.up_hint.normalize();
        if forward.cross(&up).norm() < 1e-9 {
            up = [Vec3::y(), Vec3::x(), Vec3::z()]
                .into_iter()
                .min_by(|a, b| forward.dot(a).abs().total_cmp(&forward.dot(b).abs()))
                .unwrap();
        }
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()])
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation() * (p - self.eye())
    }

    /// Pose reached from `self` by moving along its own orbit frame: azimuth turns
    /// about the camera's up axis, elevation tilts towards it.
    pub fn compose_relative(&self, rel: &RelativePose) -> CameraPose {
        let a = self.direction();
        let up = -self.rotation().row(1).transpose();
        let c = up.cross(&a);
        let (de, da) = (rel.d_elevation.to_radians(), rel.d_azimuth.to_radians());
        let dir = (a * da.cos() + c * da.sin()) * de.cos() + up * de.sin();
        let mut pose = CameraPose::from_direction(&dir, self.radius + rel.d_radius, self.target);
        pose.up_hint = self.up_hint;
        pose
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: usize,
    pub height: usize,
    /// Vertical field of view in degrees.
    pub fov_y: f64,
    pub near: f64,
    pub far: f64,
}

pub const DEFAULT_FOV_Y: f64 = 49.1;

impl CameraIntrinsics {
    pub fn square(size: usize, fov_y: f64) -> Self {
        Self { width: size, height: size, fov_y, near: 0.01, far: 100.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::precondition("image size must be positive"));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::precondition("intrinsics need 0 < near < far"));
        }
        if !(self.fov_y > 1.0 && self.fov_y < 179.0) {
            return Err(Error::precondition("fov must lie in (1°, 179°)"));
        }
        Ok(())
    }

    /// Focal length in pixels (square pixels).
    pub fn focal(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.fov_y.to_radians()).tan()
    }

    pub fn with_size(mut self, size: usize) -> Self {
        self.width = size;
        self.height = size;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Continuous pixel coordinates; pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub in_frustum: bool,
}

impl Projection {
    pub fn pixel(&self) -> (usize, usize) {
        (self.u.floor() as usize, self.v.floor() as usize)
    }
}

/// Precomputed world→pixel mapping for one pose and set of intrinsics.
#[derive(Debug, Clone, Copy)]
pub struct Projector {
    pub rotation: Matrix3<f64>,
    pub eye: Vec3,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

impl Projector {
    pub fn new(pose: &CameraPose, intr: &CameraIntrinsics) -> Self {
        Self {
            rotation: pose.rotation(),
            eye: pose.eye(),
            focal: intr.focal(),
            cx: 0.5 * intr.width as f64,
            cy: 0.5 * intr.height as f64,
            width: intr.width,
            height: intr.height,
            near: intr.near,
            far: intr.far,
        }
    }

    pub fn camera_coords(&self, p: &Vec3) -> Vec3 {
        self.rotation * (p - self.eye)
    }

    pub fn project(&self, p: &Vec3) -> Projection {
        let c = self.camera_coords(p);
        let depth = c.z;
        if depth <= self.near {
            return Projection { u: f64::NAN, v: f64::NAN, depth, in_frustum: false };
        }
        let u = self.cx + self.focal * c.x / depth;
        let v = self.cy + self.focal * c.y / depth;
        let in_frustum =
            depth < self.far && u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64;
        Projection { u, v, depth, in_frustum }
    }
}

pub fn project_points(points: &[Vec3], pose: &CameraPose, intr: &CameraIntrinsics) -> Vec<Projection> {
    let proj = Projector::new(pose, intr);
    points.iter().map(|p| proj.project(p)).collect()
}

/// `n` poses on the Fibonacci spiral around `target`.
pub fn fibonacci_sphere_poses(n: usize, radius: f64, target: Vec3) -> Vec<CameraPose> {
    shapes::fibonacci_directions(n).iter().map(|d| CameraPose::from_direction(d, radius, target)).collect()
}

/// Mean view-axis depth of the points.
pub fn mean_depth(points: &[Vec3], pose: &CameraPose) -> f64 {
    let r = pose.rotation();
    let eye = pose.eye();
    let forward = r.row(2).transpose();
    points.iter().map(|p| forward.dot(&(p - eye))).sum::<f64>() / points.len() as f64
}

/// Squared footprint radius (in units of σ²) inside which a Gaussian claims a pixel:
/// the disk where an opaque splat's alpha is at least ½.
pub const FRONTMOST_COVERAGE_SIGMA_SQ: f64 = 2.0 * std::f64::consts::LN_2;

/// Per-pixel z-buffer over Gaussian footprints.
///
/// A Gaussian claims every pixel whose centre lies inside the disk where an opaque
/// splat reaches alpha ½, plus the pixel containing its projected centre. Each pixel
/// keeps the claimant with the smallest depth (ties → lower index). Returns the
/// sorted, de-duplicated winners.
pub fn frontmost_indices(
    centers: &[Vec3],
    world_scales: &[f64],
    pose: &CameraPose,
    intr: &CameraIntrinsics,
) -> Vec<usize> {
    let proj = Projector::new(pose, intr);
    let (w, h) = (intr.width, intr.height);
    let mut zbuf: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); w * h];
    let claim = |zbuf: &mut Vec<(f64, usize)>, px: usize, depth: f64, i: usize| {
        let slot = &mut zbuf[px];
        if depth < slot.0 || (depth == slot.0 && i < slot.1) {
            *slot = (depth, i);
        }
    };
    for (i, c) in centers.iter().enumerate() {
        let p = proj.project(c);
        if !(p.depth > proj.near && p.depth < proj.far) {
            continue;
        }
        let sigma = world_scales[i] * proj.focal / p.depth;
        let r2 = FRONTMOST_COVERAGE_SIGMA_SQ * sigma * sigma;
        let r = r2.sqrt();
        let x0 = (p.u - r - 0.5).ceil().max(0.0);
        let x1 = (p.u + r - 0.5).floor().min(w as f64 - 1.0);
        let y0 = (p.v - r - 0.5).ceil().max(0.0);
        let y1 = (p.v + r - 0.5).floor().min(h as f64 - 1.0);
        if x0 <= x1 && y0 <= y1 {
            for y in y0 as usize..=y1 as usize {
                let dy = y as f64 + 0.5 - p.v;
                for x in x0 as usize..=x1 as usize {
                    let dx = x as f64 + 0.5 - p.u;
                    if dx * dx + dy * dy <= r2 {
                        claim(&mut zbuf, y * w + x, p.depth, i);
                    }
                }
            }
        }
        if p.in_frustum {
            let (x, y) = p.pixel();
            claim(&mut zbuf, y * w + x, p.depth, i);
        }
    }
    let mut out: Vec<usize> = zbuf.into_iter().filter(|s| s.1 != usize::MAX).map(|s| s.1).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// `h(G, V)`: indices (into the concatenation of `sets`) of the frontmost Gaussians.
/// Transparent Gaussians (binarised opacity below ½) never claim pixels.
pub fn frontmost_filter(sets: &[&GaussianSet], pose: &CameraPose, intr: &CameraIntrinsics) -> Vec<usize> {
    let mut centers = Vec::new();
    let mut scales = Vec::new();
    let mut ids = Vec::new();
    let mut offset = 0;
    for set in sets {
        for i in 0..set.len() {
            if set.is_opaque(i) {
                centers.push(set.centers[i]);
                scales.push(set.scale);
                ids.push(offset + i);
            }
        }
        offset += set.len();
    }
    frontmost_indices(&centers, &scales, pose, intr).into_iter().map(|k| ids[k]).collect()
}

/// Settings for the reference-viewpoint search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewpointSearch {
    pub candidates: usize,
    /// Orbit radius as a multiple of the cloud's bounding-sphere radius.
    pub radius_factor: f64,
    pub fov_y: f64,
    pub resolution: usize,
    /// Weight of the mean-depth term.
    pub w0: f64,
}

impl Default for ViewpointSearch {
    fn default() -> Self {
        Self { candidates: 5000, radius_factor: 2.5, fov_y: DEFAULT_FOV_Y, resolution: 256, w0: 1e-3 }
    }
}

impl ViewpointSearch {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::square(self.resolution, self.fov_y)
    }

    /// Orbit radius and target for a cloud: bounding-box centre, scaled bounding sphere.
    pub fn orbit(&self, cloud: &PointCloud) -> (f64, Vec3) {
        let target = cloud.bounding_box().center();
        let radius = (self.radius_factor * cloud.bounding_radius()).max(10.0 * self.intrinsics().near);
        (radius, target)
    }

    pub fn candidate_poses(&self, cloud: &PointCloud) -> Vec<CameraPose> {
        let (radius, target) = self.orbit(cloud);
        fibonacci_sphere_poses(self.candidates, radius, target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewpointEstimate {
    pub index: usize,
    pub pose: CameraPose,
    pub objective: f64,
}

/// Objective minimised by the reference-viewpoint search for one candidate:
/// `CD(P[h(G, V)], P) + w0 · depth(P, V)`. An empty visible set scores +∞.
pub fn viewpoint_objective(
    points: &[Vec3],
    scale: f64,
    index: &SpatialIndex,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    w0: f64,
) -> f64 {
    let scales = vec![scale; points.len()];
    let visible = frontmost_indices(points, &scales, pose, intr);
    if visible.is_empty() {
        return f64::INFINITY;
    }
    visible_chamfer(points, &visible, index) + w0 * mean_depth(points, pose)
}

/// Chamfer distance between `points[visible]` and `points`. The visible subset lies
/// inside the full set, so only the full→subset direction contributes and only for
/// points outside the subset.
fn visible_chamfer(points: &[Vec3], visible: &[usize], _full: &SpatialIndex) -> f64 {
    let subset: Vec<Vec3> = visible.iter().map(|&i| points[i]).collect();
    let sub_index = SpatialIndex::new(&subset);
    let mut is_visible = vec![false; points.len()];
    for &i in visible {
        is_visible[i] = true;
    }
    let sum: f64 = points
        .iter()
        .zip(&is_visible)
        .filter(|(_, v)| !**v)
        .map(|(p, _)| sub_index.nearest(p).map_or(0.0, |n| n.dist()))
        .sum();
    0.5 * sum / points.len() as f64
}

/// Exhaustive search over `candidates`; ties resolve to the lowest candidate index.
/// The Gaussians' shared scale is the mean nearest-neighbour distance of the cloud.
pub fn estimate_reference_viewpoint(
    p_in: &PointCloud,
    candidates: &[CameraPose],
    intr: &CameraIntrinsics,
    w0: f64,
) -> Result<ViewpointEstimate> {
    if candidates.is_empty() {
        return Err(Error::precondition("reference-viewpoint search needs candidates"));
    }
    intr.validate()?;
    let points = p_in.points();
    let scale = mean_nearest_neighbor_distance(points)?;
    let index = SpatialIndex::new(points);
    let scores: Vec<f64> =
        candidates.par_iter().map(|pose| viewpoint_objective(points, scale, &index, pose, intr, w0)).collect();
    let (best, objective) = scores
        .iter()
        .enumerate()
        .fold((0usize, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    Ok(ViewpointEstimate { index: best, pose: candidates[best], objective })
}

/// Writes `elevation,azimuth,radius` rows with a header line.
pub fn write_pose_csv(w: &mut impl Write, poses: &[CameraPose]) -> Result<()> {
    writeln!(w, "elevation,azimuth,radius")?;
    for p in poses {
        writeln!(w, "{},{},{}", p.elevation, p.azimuth, p.radius)?;
    }
    Ok(())
}

pub fn read_pose_csv(r: &mut impl BufRead, target: Vec3) -> Result<Vec<CameraPose>> {
    let mut poses = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with("elevation") {
            continue;
        }
        let v: Vec<f64> = t
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Parse(format!("bad pose row `{t}`: {e}")))?;
        if v.len() != 3 {
            return Err(Error::Parse(format!("pose row needs 3 values: `{t}`")));
        }
        poses.push(CameraPose::new(v[0], v[1], v[2]).with_target(target));
    }
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_proper() {
        for pose in fibonacci_sphere_poses(200, 2.0, Vec3::new(0.1, -0.2, 0.3)) {
            let r = pose.rotation();
            assert!((r.determinant() - 1.0).abs() < 1e-6);
            assert!((r * r.transpose() - Matrix3::identity()).norm() < 1e-9);
        }
        let pole = CameraPose::new(90.0, 0.0, 1.0);
        assert!((pole.rotation().determinant() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn target_projects_to_centre() {
        let intr = CameraIntrinsics::square(64, 50.0);
        let pose = CameraPose::new(20.0, 40.0, 3.0).with_target(Vec3::new(1.0, 2.0, 3.0));
        let p = project_points(&[pose.target], &pose, &intr)[0];
        assert!((p.u - 32.0).abs() < 1e-9 && (p.v - 32.0).abs() < 1e-9);
        assert!((p.depth - 3.0).abs() < 1e-12);
        assert!(p.in_frustum);
        let behind = pose.eye() + (pose.eye() - pose.target);
        assert!(!project_points(&[behind], &pose, &intr)[0].in_frustum);
    }

    #[test]
    fn camera_on_x_axis_hand_projection() {
        // Eye at (2,0,0) looking at the origin: right = +y, down = −z.
        let intr = CameraIntrinsics::square(100, 90.0);
        let pose = CameraPose::new(0.0, 0.0, 2.0);
        let f = intr.focal();
        assert!((f - 50.0).abs() < 1e-9);
        let pts = [Vec3::new(0.0, 0.5, 0.0), Vec3::new(0.0, 0.0, 0.5), Vec3::new(1.0, 0.3, -0.2)];
        let expect = [(50.0 + 50.0 * 0.5 / 2.0, 50.0), (50.0, 50.0 - 50.0 * 0.5 / 2.0), (50.0 + 50.0 * 0.3, 50.0 + 50.0 * 0.2)];
        for (p, (u, v)) in project_points(&pts, &pose, &intr).iter().zip(expect) {
            assert!((p.u - u).abs() < 1e-6 && (p.v - v).abs() < 1e-6, "{p:?} vs {u},{v}");
        }
    }

    #[test]
    fn occlusion_keeps_nearer_point() {
        let intr = CameraIntrinsics::square(64, 49.1);
        let pose = CameraPose::new(0.0, 0.0, 3.0);
        let centers = [Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        assert_eq!(frontmost_indices(&centers, &[0.01, 0.01], &pose, &intr), vec![1]);
        assert_eq!(frontmost_indices(&centers[..1], &[0.01], &pose, &intr), vec![0]);
    }

    #[test]
    fn mean_depth_shifts_with_radius() {
        let pts = vec![Vec3::new(0.1, 0.2, 0.0), Vec3::new(-0.3, 0.0, 0.1)];
        let a = CameraPose::new(10.0, 30.0, 2.0);
        let b = CameraPose { radius: 2.75, ..a };
        assert!((mean_depth(&pts, &b) - mean_depth(&pts, &a) - 0.75).abs() < 1e-12);
        assert!((mean_depth(&[Vec3::zeros()], &a) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn relative_pose_identity_and_antipode() {
        let vp = CameraPose::new(35.0, -60.0, 2.0);
        let same = vp.compose_relative(&RelativePose::default());
        assert!((same.direction() - vp.direction()).norm() < 1e-9);
        let back = vp.compose_relative(&RelativePose { d_azimuth: 180.0, ..Default::default() });
        assert!((back.direction() + vp.direction()).norm() < 1e-9);
        let pole = CameraPose::new(90.0, 0.0, 1.5);
        let below = pole.compose_relative(&RelativePose { d_azimuth: 180.0, d_radius: 0.5, ..Default::default() });
        assert!((below.elevation + 90.0).abs() < 1e-6);
        assert!((below.radius - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pose_csv_round_trip() {
        let poses = fibonacci_sphere_poses(5, 1.5, Vec3::zeros());
        let mut buf = Vec::new();
        write_pose_csv(&mut buf, &poses).unwrap();
        let back = read_pose_csv(&mut buf.as_slice(), Vec3::zeros()).unwrap();
        for (a, b) in poses.iter().zip(&back) {
            assert!((a.elevation - b.elevation).abs() < 1e-12 && (a.radius - b.radius).abs() < 1e-12);
        }
    }
}
