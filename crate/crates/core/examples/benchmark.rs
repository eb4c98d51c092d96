//! Cuts partial scans from meshes, completes them with the oracle and prints the
//! result table.
//!
//! `cargo run --release --example benchmark -- [level] [results.csv]`

use compc::bench::{BenchObject, BenchmarkSpec, EvalConfig, GuidanceMode, format_table, run_benchmark, write_csv};
use compc::geometry::Vec3;
use compc::mesh::{box_mesh, icosphere, torus};
use compc::pipeline::PipelineConfig;

fn main() -> compc::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let level = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let csv = args.next();

    let objects = vec![
        BenchObject { id: "ball".into(), mesh: icosphere(3, 0.5) },
        BenchObject { id: "ring".into(), mesh: torus(0.35, 0.12, 48, 16) },
        BenchObject { id: "crate".into(), mesh: box_mesh(Vec3::new(0.8, 0.5, 0.4)) },
    ];
    let spec = BenchmarkSpec {
        level,
        resolution: 4096,
        repeats: 2,
        guidance: GuidanceMode::Oracle,
        eval: EvalConfig { resolution: 4096, emd_size: 512, seed: 0 },
        ..Default::default()
    };
    let mut cfg = PipelineConfig::default();
    cfg.zfc.iterations = 300;
    cfg.zfc.render_size = 96;
    cfg.zfc.lr.centers = 3e-3;
    cfg.zfc.viewpoint.candidates = 300;
    cfg.pulling.iterations = 1500;
    cfg.grid.resolution = 96;

    let report = run_benchmark(&objects, &spec, &cfg)?;
    print!("{}", format_table(&report.rows));
    for (id, seed, err) in &report.failures {
        eprintln!("{id} seed {seed}: {err}");
    }
    if let Some(path) = csv {
        write_csv(std::fs::File::create(&path)?, &report.rows)?;
    }
    Ok(())
}
