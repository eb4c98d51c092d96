//! Finds the camera from which a partial scan looks most complete.

use compc::camera::{ViewpointSearch, estimate_reference_viewpoint};
use compc::geometry::{PointCloud, shapes};
use compc::zfc::ensure_normals;

fn main() -> compc::Result<()> {
    let search = ViewpointSearch { candidates: 1000, ..Default::default() };
    // Half of a sphere, open towards -z, and a quarter open towards -x-z.
    let hemi = PointCloud::new(shapes::random_hemisphere_points(1500, 0.5, 0))?;
    let quarter = hemi.select(&(0..hemi.len()).filter(|&i| hemi.points()[i].x > 0.0).collect::<Vec<_>>())?;
    for (name, cloud) in [("hemisphere", hemi), ("quarter", quarter)] {
        let cloud = ensure_normals(&cloud)?;
        let est = estimate_reference_viewpoint(&cloud, &search.candidate_poses(&cloud), &search.intrinsics(), search.w0)?;
        println!(
            "{name:>10}: elevation {:6.1}°, azimuth {:6.1}°, objective {:.5}",
            est.pose.elevation, est.pose.azimuth, est.objective
        );
    }
    Ok(())
}
