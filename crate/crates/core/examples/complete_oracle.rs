//! Completes a hemisphere scan into a sphere with the ground-truth oracle standing in
//! for the diffusion prior, then scores the result.
//!
//! `cargo run --release --example complete_oracle -- [iterations] [out.ply]`

use compc::bench::{EvalConfig, evaluate};
use compc::geometry::io::write_cloud;
use compc::geometry::{PointCloud, shapes};
use compc::pipeline::{PipelineConfig, complete, oracle_for};

fn main() -> compc::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let iterations = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let out = args.next().unwrap_or_else(|| "completed.ply".into());

    let p_in = PointCloud::new(shapes::random_hemisphere_points(2048, 0.5, 1))?;
    let gt = PointCloud::new(shapes::fibonacci_sphere_points(4096, 0.5))?;
    let mut oracle = oracle_for(&p_in, &gt)?;

    let mut cfg = PipelineConfig::default();
    cfg.zfc.iterations = iterations;
    cfg.zfc.render_size = 128;
    cfg.zfc.lr.centers = 3e-3;
    cfg.zfc.viewpoint.candidates = 500;
    cfg.pulling.iterations = 2000;
    cfg.output_points = Some(2048);

    let done = complete(&p_in, &mut oracle, &cfg)?;
    let scores = evaluate(&done.points, &gt, &EvalConfig { resolution: 2048, emd_size: 1024, seed: 0 })?;
    println!("{} points, CDx100 {:.3}, EMDx100 {:.3}", done.points.len(), scores.cd_x100, scores.emd_x100);
    write_cloud(&out, &done.points)?;
    println!("wrote {out}");
    Ok(())
}
