//! Chamfer, EMD and the multi-modal scores on a few synthetic completions.

use compc::bench::{EvalConfig, add_noise, evaluate, multimodal_metrics};
use compc::geometry::{PointCloud, shapes};

fn main() -> compc::Result<()> {
    let gt = PointCloud::new(shapes::fibonacci_sphere_points(4096, 0.5))?;
    let p_in = PointCloud::new(shapes::random_hemisphere_points(1024, 0.5, 0))?;
    let cfg = EvalConfig { resolution: 2048, emd_size: 1024, seed: 0 };

    let mut completions = Vec::new();
    for (i, std) in [0.0, 0.005, 0.02].into_iter().enumerate() {
        let pred = if std > 0.0 { add_noise(&gt, std, i as u64)? } else { gt.clone() };
        let s = evaluate(&pred, &gt, &cfg)?;
        println!("noise {std:<6} CDx100 {:.3}  EMDx100 {:.3}", s.cd_x100, s.emd_x100);
        completions.push(pred);
    }
    let half = PointCloud::new(shapes::random_hemisphere_points(4096, 0.5, 9))?;
    let s = evaluate(&half, &gt, &cfg)?;
    println!("hemisphere   CDx100 {:.3}  EMDx100 {:.3}", s.cd_x100, s.emd_x100);

    let m = multimodal_metrics(&completions, &p_in, &gt)?;
    println!("TMD {:.3}  UHD {:.3}  MMD {:.3}", m.tmd, m.uhd, m.mmd);
    Ok(())
}
