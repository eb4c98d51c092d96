use nalgebra::{Matrix3, SymmetricEigen};

use super::cloud::{PointCloud, Vec3};
use super::index::SpatialIndex;
use crate::error::{Error, Result};

pub const DEFAULT_NORMAL_NEIGHBORS: usize = 30;

/// Normals from the covariance of each point's `k` nearest neighbours.
///
/// The normal is the eigenvector of the smallest eigenvalue, flipped to point away
/// from the neighbourhood centroid. The second return value flags points whose
/// neighbourhood is collinear; their normal is an arbitrary unit vector orthogonal
/// to the dominant direction.
pub fn estimate_normals_flagged(cloud: &PointCloud, k: usize) -> Result<(PointCloud, Vec<bool>)> {
    if k == 0 || cloud.len() < k + 1 {
        return Err(Error::precondition(format!(
            "normal estimation with k = {k} needs at least {} points, got {}",
            k + 1,
            cloud.len()
        )));
    }
    let points = cloud.points();
    let index = SpatialIndex::new(points);
    let mut normals = Vec::with_capacity(points.len());
    let mut flags = Vec::with_capacity(points.len());
    for p in points {
        let hood = index.k_nearest(p, k + 1);
        let centroid = hood.iter().map(|n| points[n.index]).sum::<Vec3>() / hood.len() as f64;
        let mut cov = Matrix3::zeros();
        for n in &hood {
            let d = points[n.index] - centroid;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let largest = eig.eigenvalues[order[2]].max(0.0);
        let middle = eig.eigenvalues[order[1]].max(0.0);
        let degenerate = largest <= 0.0 || middle <= 1e-12 * largest;
        let mut normal: Vec3 = if degenerate {
            any_orthogonal(&eig.eigenvectors.column(order[2]).into_owned())
        } else {
            eig.eigenvectors.column(order[0]).into_owned()
        };
        normal.normalize_mut();
        if normal.dot(&(p - centroid)) < 0.0 {
            normal = -normal;
        }
        normals.push(normal);
        flags.push(degenerate);
    }
    Ok((PointCloud::with_normals(points.to_vec(), normals)?, flags))
}

pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    estimate_normals_flagged(cloud, k).map(|(c, _)| c)
}

fn any_orthogonal(v: &Vec3) -> Vec3 {
    let v = if v.norm() > 0.0 { v.normalize() } else { Vec3::x() };
    let axis = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&axis).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::fibonacci_sphere_points;

    #[test]
    fn plane_normals_are_vertical() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                let x = i as f64 * 0.05 + 0.001 * ((i * 7 + j * 3) % 5) as f64;
                pts.push(Vec3::new(x, j as f64 * 0.05, 0.0));
            }
        }
        let out = estimate_normals(&PointCloud::new(pts).unwrap(), 30).unwrap();
        for n in out.normals().unwrap() {
            assert!(n.z.abs() >= 1f64.to_radians().cos(), "{n:?}");
        }
    }

    #[test]
    fn sphere_normals_point_outward() {
        let pts = fibonacci_sphere_points(4096, 1.0);
        let out = estimate_normals(&PointCloud::new(pts.clone()).unwrap(), 30).unwrap();
        let good = out.normals().unwrap().iter().zip(&pts).filter(|(n, p)| n.dot(&p.normalize()) >= 0.95).count();
        assert!(good as f64 >= 0.98 * pts.len() as f64);
        for n in out.normals().unwrap() {
            assert!((n.norm() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn collinear_points_flagged() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let (out, flags) = estimate_normals_flagged(&PointCloud::new(pts).unwrap(), 4).unwrap();
        assert!(flags.iter().all(|&f| f));
        for n in out.normals().unwrap() {
            assert!(n.x.abs() < 1e-9);
        }
    }

    #[test]
    fn k_too_large() {
        let c = PointCloud::from_slices(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert!(estimate_normals(&c, 30).is_err());
    }
}
