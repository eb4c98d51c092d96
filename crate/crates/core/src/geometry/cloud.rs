use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Ordered set of 3D points with optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::precondition("point cloud must contain at least one point"));
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(Self { points, normals: None })
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(Error::InvalidInput(format!(
                "{} normals for {} points",
                normals.len(),
                points.len()
            )));
        }
        if normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-4) {
            return Err(Error::InvalidInput("normals must be unit length".into()));
        }
        let mut cloud = Self::new(points)?;
        cloud.normals = Some(normals);
        Ok(cloud)
    }

    pub fn from_slices(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn without_normals(&self) -> Self {
        Self { points: self.points.clone(), normals: None }
    }

    /// Picks a subset by index; normals follow their points.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let mut out = Self::new(points)?;
        out.normals = self.normals.as_ref().map(|n| indices.iter().map(|&i| n[i]).collect());
        Ok(out)
    }

    /// Concatenates two clouds. Normals survive only when both carry them.
    pub fn union(&self, other: &PointCloud) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let normals = match (&self.normals, &other.normals) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self { points, normals }
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }

    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }

    /// Radius of the sphere centred at the bounding-box centre that encloses every point.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.bounding_box().center();
        self.points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }

    pub fn map_points(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self { points: self.points.iter().map(f).collect(), normals: self.normals.clone() }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.iter().zip(max.iter()).all(|(a, b)| a <= b));
        Self { min, max }
    }

    pub fn from_points(points: &[Vec3]) -> Self {
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        Self { min, max }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn max_extent(&self) -> f64 {
        self.extent().max()
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    /// Grows each side by `fraction` of the largest extent.
    pub fn padded(&self, fraction: f64) -> Self {
        let pad = Vec3::repeat(self.max_extent() * fraction);
        Self { min: self.min - pad, max: self.max + pad }
    }

    /// Smallest cube sharing this box's centre that contains it.
    pub fn cubic(&self) -> Self {
        let half = Vec3::repeat(self.max_extent() * 0.5);
        let c = self.center();
        Self { min: c - half, max: c + half }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Uniform scale followed by translation: `x ↦ scale·x + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub offset: Vec3,
}

impl Similarity {
    pub fn identity() -> Self {
        Self { scale: 1.0, offset: Vec3::zeros() }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p * self.scale + self.offset
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        (p - self.offset) / self.scale
    }

    pub fn inverse(&self) -> Self {
        Self { scale: 1.0 / self.scale, offset: -self.offset / self.scale }
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map_points(|p| self.apply(p))
    }

    pub fn invert_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map_points(|p| self.invert(p))
    }
}

/// Maps the cloud into `[-0.5, 0.5]³`: bounding-box centre to the origin, largest
/// extent to 1. Normals are unaffected by a uniform positive scale.
pub fn normalize_unit_box(cloud: &PointCloud) -> Result<(PointCloud, Similarity)> {
    let bbox = cloud.bounding_box();
    let extent = bbox.max_extent();
    if !(extent > 0.0) {
        return Err(Error::DegenerateExtent("all points coincide".into()));
    }
    let scale = 1.0 / extent;
    let transform = Similarity { scale, offset: -bbox.center() * scale };
    Ok((transform.apply_cloud(cloud), transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_corners_map_to_half_unit() {
        let mut pts = Vec::new();
        for &x in &[-1.0, 1.0] {
            for &y in &[-1.0, 1.0] {
                for &z in &[-1.0, 1.0] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        let (out, t) = normalize_unit_box(&PointCloud::new(pts.clone()).unwrap()).unwrap();
        assert!((t.scale - 0.5).abs() < 1e-15);
        for (p, q) in pts.iter().zip(out.points()) {
            assert!((p * 0.5 - q).norm() < 1e-15);
        }
    }

    #[test]
    fn segment_scales_by_longest_axis() {
        let cloud = PointCloud::from_slices(&[[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let (out, _) = normalize_unit_box(&cloud).unwrap();
        assert_eq!(out.points()[0], Vec3::new(-0.5, 0.0, 0.0));
        assert_eq!(out.points()[1], Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(out.points()[2], Vec3::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn round_trip_restores_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec3> = (0..100)
            .map(|_| Vec3::new(rng.gen_range(-3.0..5.0), rng.gen_range(-1.0..1.0), rng.gen_range(10.0..12.0)))
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let (out, t) = normalize_unit_box(&cloud).unwrap();
        let bbox = out.bounding_box();
        assert!(bbox.min.iter().all(|&c| c >= -0.5 - 1e-12));
        assert!(bbox.max.iter().all(|&c| c <= 0.5 + 1e-12));
        let back = t.invert_cloud(&out);
        for (a, b) in cloud.points().iter().zip(back.points()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn identical_points_are_degenerate() {
        let cloud = PointCloud::from_slices(&[[1.0, 2.0, 3.0]; 5]).unwrap();
        assert!(matches!(normalize_unit_box(&cloud), Err(Error::DegenerateExtent(_))));
    }

    #[test]
    fn empty_and_non_unit_normals_rejected() {
        assert!(PointCloud::new(vec![]).is_err());
        let pts = vec![Vec3::zeros()];
        assert!(PointCloud::with_normals(pts, vec![Vec3::new(0.0, 0.0, 2.0)]).is_err());
    }
}
