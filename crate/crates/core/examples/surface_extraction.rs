//! Keeps only the Gaussians visible from outside: a shell with a filled interior
//! comes back as the shell.

use compc::geometry::{Vec3, shapes};
use compc::pce::{SurfaceViews, gaussian_surface_extraction};
use compc::render::{GaussianSet, logit};

fn main() -> compc::Result<()> {
    let shell = shapes::fibonacci_sphere_points(4000, 0.5);
    let body = shapes::random_ball_points(6000, 0.47, 1);
    let mut centers = shell.clone();
    centers.extend(&body);
    let n = centers.len();
    let set = GaussianSet::new(centers, 0.03, vec![logit(0.9); n], vec![Vec3::repeat(0.5); n], false)?;
    let out = gaussian_surface_extraction(&[&set], &SurfaceViews { count: 300, ..Default::default() })?;
    let kept_shell = out.indices.iter().filter(|&&i| i < shell.len()).count();
    println!("kept {} of {n} Gaussians, {kept_shell} of {} shell points", out.indices.len(), shell.len());
    Ok(())
}
