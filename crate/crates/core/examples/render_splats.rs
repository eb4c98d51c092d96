//! Renders a normal-coloured sphere of splats from a few views and writes PNGs.

use compc::camera::{CameraIntrinsics, CameraPose, DEFAULT_FOV_Y};
use compc::geometry::{PointCloud, shapes};
use compc::render::render;
use compc::zfc::init_partial_gaussians;

fn main() -> compc::Result<()> {
    let pts = shapes::fibonacci_sphere_points(3000, 0.5);
    let normals = pts.iter().map(|p| p.normalize()).collect();
    let gaussians = init_partial_gaussians(&PointCloud::with_normals(pts, normals)?)?;
    let intr = CameraIntrinsics::square(256, DEFAULT_FOV_Y);
    for (i, (el, az)) in [(20.0, 0.0), (60.0, 90.0), (-30.0, 200.0)].into_iter().enumerate() {
        let img = render(&[&gaussians], &CameraPose::new(el, az, 2.5), &intr);
        let path = format!("view_{i}.png");
        img.write_png(&path)?;
        println!("{path}: elevation {el}, azimuth {az}");
    }
    Ok(())
}
