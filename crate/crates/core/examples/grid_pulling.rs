//! Fits a signed distance network to a point cloud by pulling queries onto it,
//! resamples the zero set uniformly and writes a marching-cubes mesh.
//!
//! `cargo run --release --example grid_pulling -- [iterations]`

use compc::geometry::io::write_cloud;
use compc::geometry::{PointCloud, nn_distance_cv, shapes};
use compc::pce::{GridConfig, PullingConfig, evaluate_grid, extract_uniform_points, marching_cubes, train_grid_pulling};

fn main() -> compc::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    // Uneven sampling: dense on one side, sparse on the other.
    let raw = shapes::random_sphere_points(6000, 0.5, 2);
    let pts: Vec<_> = raw.into_iter().enumerate().filter(|(i, p)| p.x > 0.0 || i % 4 == 0).map(|(_, p)| p).collect();
    let cloud = PointCloud::new(pts)?;

    let cfg = PullingConfig { iterations, ..Default::default() };
    let field = train_grid_pulling(&cloud, &cloud, &cfg)?;
    let grid = GridConfig::default();
    let uniform = extract_uniform_points(&field.network, &field.merge, &cloud, &cloud, &grid)?;
    println!(
        "input CV {:.3}, resampled {} points with CV {:.3}",
        nn_distance_cv(cloud.points())?,
        uniform.len(),
        nn_distance_cv(uniform.points())?
    );
    write_cloud("pulled.ply", &uniform)?;

    let mesh = marching_cubes(&evaluate_grid(&field.network, &grid.lattice_for(cloud.points())?));
    mesh.write_obj("pulled.obj")?;
    println!("mesh: {} triangles, watertight {}", mesh.triangles.len(), mesh.is_watertight());
    Ok(())
}
